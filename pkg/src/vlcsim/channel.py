"""Frequency-selective link, AWGN, and the Lambertian line-of-sight room model.

BER experiments run on normalized discrete channels with a gain of one; the
geometric model below feeds only the illuminance and SNR maps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .errors import CyclicPrefixError

# flat link and the documented three-tap test channel, normalized to unit energy
NAMED_CHANNELS = {
    "flat": np.array([1.0]),
    "threetap": np.array([1.0, 0.5, 0.25]) / np.sqrt(1.3125),
}


def add_cp(x: np.ndarray, cp_len: int) -> np.ndarray:
    """Prepend the last cp_len samples of each frame."""
    x = np.asarray(x)
    n = x.shape[-1]
    if not 0 <= cp_len < n:
        raise ValueError(f"cyclic prefix must satisfy 0 <= cp < {n}, got {cp_len}")
    if cp_len == 0:
        return x.copy()
    return np.concatenate([x[..., n - cp_len:], x], axis=-1)


def remove_cp(y: np.ndarray, cp_len: int) -> np.ndarray:
    """Drop the first cp_len samples of each frame."""
    y = np.asarray(y)
    if not 0 <= cp_len < y.shape[-1]:
        raise ValueError(f"cyclic prefix must satisfy 0 <= cp < {y.shape[-1]}, got {cp_len}")
    return y[..., cp_len:]


def propagate_extended(frames: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Convolve already CP-extended frames with the taps, frame by frame.

    The convolution tail beyond each frame is dropped; the embedded prefix of
    the following frame absorbs it in a continuous stream.
    """
    frames = np.asarray(frames, dtype=float)
    h = np.asarray(h, dtype=float).reshape(-1)
    shape = [1] * frames.ndim
    shape[-1] = len(h)
    full = fftconvolve(frames, h.reshape(shape), axes=-1)
    return full[..., : frames.shape[-1]]


def transmit(x: np.ndarray, h: np.ndarray, cp_len: int) -> np.ndarray:
    """Linear convolution of the CP-extended frame with the taps.

    With cp_len >= taps-1 the prefix absorbs the channel memory, so removing
    it recovers exactly the cyclic convolution of the frame with the taps.
    """
    h = np.asarray(h, dtype=float).reshape(-1)
    if cp_len < len(h) - 1:
        raise CyclicPrefixError(
            f"cp_len={cp_len} cannot absorb a {len(h)}-tap channel; need >= {len(h) - 1}"
        )
    return propagate_extended(add_cp(np.asarray(x, dtype=float), cp_len), h)


@dataclass(frozen=True)
class AwgnSpec:
    """Noise power spectral density (A^2/Hz) and receiver bandwidth (Hz)."""

    n0: float = 1e-22
    bandwidth: float = 20e6

    def __post_init__(self):
        if self.n0 <= 0 or self.bandwidth <= 0:
            raise ValueError("noise PSD and bandwidth must be positive")

    @property
    def variance(self) -> float:
        return self.n0 * self.bandwidth


def awgn(x: np.ndarray, spec: AwgnSpec, rng: np.random.Generator) -> np.ndarray:
    """Add i.i.d. zero-mean Gaussian samples of variance n0*bandwidth."""
    x = np.asarray(x, dtype=float)
    return x + rng.normal(0.0, np.sqrt(spec.variance), size=x.shape)


def lambertian_order(semi_angle: float) -> float:
    """Lambertian mode number m = -ln2 / ln cos(half-power semi-angle in radians)."""
    if not 0.0 < semi_angle < np.pi / 2:
        raise ValueError(f"semi-angle must lie in (0, pi/2) radians, got {semi_angle}")
    return float(-np.log(2.0) / np.log(np.cos(semi_angle)))


@dataclass(frozen=True)
class ReceiverSpec:
    """Photodetector: active area (m^2), field of view (rad), responsivity (A/W), height (m)."""

    area: float = 1e-4
    fov: float = np.radians(85.0)
    responsivity: float = 0.4
    height: float = 0.0

    def __post_init__(self):
        if self.area <= 0:
            raise ValueError("receiver area must be positive")
        if not 0 < self.fov <= np.pi / 2:
            raise ValueError("field of view must lie in (0, pi/2] radians")


@dataclass(frozen=True)
class LedLuminaire:
    """A ceiling LED: position (m), Lambertian order, electrical power (W), color split."""

    position: tuple[float, float, float]
    m: float = lambertian_order(np.radians(30.0))
    electrical_power: float = 100.0 / 36.0
    color_split: tuple[float, float, float, float] = (0.25, 0.25, 0.25, 0.25)


def los_gain(tx: LedLuminaire, rx_point: np.ndarray, rx: ReceiverSpec) -> float:
    """Line-of-sight channel gain for a down-facing LED and an up-facing detector.

    H = (m+1) A / (2 pi d^2) cos^m(phi) cos(psi), zero beyond the field of view.
    """
    p = np.asarray(tx.position, dtype=float) - np.asarray(rx_point, dtype=float)
    d = float(np.linalg.norm(p))
    if d == 0.0:
        raise ValueError("transmitter and receiver coincide")
    cos_phi = p[2] / d  # emission angle off the downward normal
    cos_psi = cos_phi  # incidence angle on the upward-facing detector
    if cos_psi <= 0.0 or np.arccos(np.clip(cos_psi, -1, 1)) > rx.fov:
        return 0.0
    return float((tx.m + 1) * rx.area / (2.0 * np.pi * d * d) * cos_phi**tx.m * cos_psi)


@dataclass(frozen=True)
class RoomGeometry:
    """Room footprint with ceiling luminaires and the evaluation grid step."""

    dimensions: tuple[float, float, float] = (5.0, 5.0, 3.0)
    luminaires: tuple[LedLuminaire, ...] = ()
    grid_step: float = 0.1

    def __post_init__(self):
        lx, ly, _ = self.dimensions
        for lum in self.luminaires:
            x, y, _ = lum.position
            if not (0 <= x <= lx and 0 <= y <= ly):
                raise ValueError(f"luminaire at {lum.position} is outside the room footprint")

    def grid_points(self, height: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
        """Axis coordinates of the evaluation grid at the given plane height."""
        lx, ly, _ = self.dimensions
        xs = np.arange(0.0, lx + self.grid_step / 2, self.grid_step)
        ys = np.arange(0.0, ly + self.grid_step / 2, self.grid_step)
        return xs, ys

    def gain_map(self, rx: ReceiverSpec) -> np.ndarray:
        """Summed LOS gain of all luminaires over the receiver-plane grid."""
        xs, ys = self.grid_points(rx.height)
        gains = np.zeros((len(xs), len(ys)))
        for i, x in enumerate(xs):
            for j, y in enumerate(ys):
                point = (x, y, rx.height)
                gains[i, j] = sum(los_gain(lum, point, rx) for lum in self.luminaires)
        return gains


def default_room(
    total_electrical_power: float = 100.0,
    semi_angle: float = np.radians(30.0),
    grid_step: float = 0.1,
) -> RoomGeometry:
    """The 5 m x 5 m x 3 m office with four 3x3 LED luminaires (36 LEDs).

    Luminaire centers sit at (+-1.25, +-1.25) m around the room center on the
    ceiling; LEDs within a luminaire are pitched 0.1 m apart.  The electrical
    budget is split equally over the 36 LEDs and equally over the four color
    channels within each LED.
    """
    m = lambertian_order(semi_angle)
    per_led = total_electrical_power / 36.0
    luminaires = []
    for sx in (-1.0, 1.0):
        for sy in (-1.0, 1.0):
            cx, cy = 2.5 + sx * 1.25, 2.5 + sy * 1.25
            for ix in (-1, 0, 1):
                for iy in (-1, 0, 1):
                    luminaires.append(
                        LedLuminaire(
                            position=(cx + 0.1 * ix, cy + 0.1 * iy, 3.0),
                            m=m,
                            electrical_power=per_led,
                        )
                    )
    return RoomGeometry(dimensions=(5.0, 5.0, 3.0), luminaires=tuple(luminaires), grid_step=grid_step)
