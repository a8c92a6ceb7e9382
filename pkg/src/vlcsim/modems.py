"""Bit-to-waveform chains: DCO-OFDM, the DC-biased quartered-transform modem,
and a four-band intensity color-keying baseline with spectrum-derived crosstalk.

All constellations are normalized to unit average symbol energy and
Gray-coded, so analytic bit-error expressions apply directly.  DC bias levels
are computed from the expected (ensemble) pre-bias signal power, which both
ends of the link can derive from the configuration alone.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import add_cp, remove_cp
from .errors import SingularChannelError
from .photometry import GRID, LED_CHANNELS, CHANNEL_ORDER, SpectralDistribution, h_model_spd
from .spectral import (
    TransformFamily,
    build_qct_family,
    channel_frequency_response,
    circulant_matched_apply,
    dft,
    hermitian_extend,
    idft,
)

# receiver optical filter passbands (nm), ordered as red, amber, green, blue
DEFAULT_FILTER_BANDS = ((612.0, 680.0), (575.0, 612.0), (483.0, 575.0), (400.0, 483.0))

_SINGULAR_TOL = 1e-12


def _check_bits(bits: np.ndarray, chunk: int, what: str) -> np.ndarray:
    bits = np.asarray(bits, dtype=int).reshape(-1)
    if bits.size == 0 or bits.size % chunk:
        raise ValueError(f"bit count {bits.size} is not a positive multiple of {chunk} ({what})")
    if np.any((bits != 0) & (bits != 1)):
        raise ValueError("bits must be 0 or 1")
    return bits


def _gray_codes(m: int) -> np.ndarray:
    """Gray code of each level index, so adjacent levels differ in one bit."""
    idx = np.arange(m)
    return idx ^ (idx >> 1)


def _codes_to_bits(codes: np.ndarray, width: int) -> np.ndarray:
    return ((codes[:, None] >> np.arange(width - 1, -1, -1)) & 1).reshape(-1)


def _bits_to_codes(bits: np.ndarray, width: int) -> np.ndarray:
    return bits.reshape(-1, width) @ (1 << np.arange(width - 1, -1, -1))


@dataclass(frozen=True)
class PamConstellation:
    """Gray-coded M-PAM levels at unit average symbol energy."""

    order: int
    levels: np.ndarray = field(repr=False)
    gray_to_index: np.ndarray = field(repr=False)

    @classmethod
    def from_order(cls, m: int) -> "PamConstellation":
        if m < 2 or m & (m - 1):
            raise ValueError(f"PAM order must be a power of two >= 2, got {m}")
        raw = np.arange(-(m - 1), m, 2, dtype=float)
        levels = raw / np.sqrt(np.mean(raw**2))
        gray = _gray_codes(m)
        inverse = np.empty(m, dtype=int)
        inverse[gray] = np.arange(m)
        return cls(order=m, levels=levels, gray_to_index=inverse)

    @property
    def bits_per_symbol(self) -> int:
        return int(np.log2(self.order))

    def map_bits(self, bits: np.ndarray) -> np.ndarray:
        bits = _check_bits(bits, self.bits_per_symbol, f"{self.order}-PAM")
        codes = _bits_to_codes(bits, self.bits_per_symbol)
        return self.levels[self.gray_to_index[codes]]

    def demap(self, estimates: np.ndarray) -> np.ndarray:
        idx = mld_index(estimates, self.levels)
        return _codes_to_bits(_gray_codes(self.order)[idx], self.bits_per_symbol)


@dataclass(frozen=True)
class QamConstellation:
    """Square M-QAM, Gray-coded independently on the I and Q rails, unit energy."""

    order: int
    points: np.ndarray = field(repr=False)
    rail: PamConstellation = field(repr=False)

    @classmethod
    def from_order(cls, m: int) -> "QamConstellation":
        side = int(round(np.sqrt(m)))
        if side * side != m or side < 2 or side & (side - 1):
            raise ValueError(f"QAM order must be an even power of two, got {m}")
        rail = PamConstellation.from_order(side)
        i, q = np.meshgrid(rail.levels, rail.levels, indexing="ij")
        points = ((i + 1j * q) / np.sqrt(2.0)).reshape(-1)
        return cls(order=m, points=points, rail=rail)

    @property
    def bits_per_symbol(self) -> int:
        return int(np.log2(self.order))

    def map_bits(self, bits: np.ndarray) -> np.ndarray:
        bits = _check_bits(bits, self.bits_per_symbol, f"{self.order}-QAM")
        half = self.bits_per_symbol // 2
        pairs = bits.reshape(-1, self.bits_per_symbol)
        i = self.rail.map_bits(pairs[:, :half].reshape(-1))
        q = self.rail.map_bits(pairs[:, half:].reshape(-1))
        return (i + 1j * q) / np.sqrt(2.0)

    def demap(self, estimates: np.ndarray) -> np.ndarray:
        estimates = np.asarray(estimates, dtype=complex).reshape(-1)
        scale = np.sqrt(2.0)
        i_bits = self.rail.demap(estimates.real * scale)
        q_bits = self.rail.demap(estimates.imag * scale)
        half = self.bits_per_symbol // 2
        out = np.empty((estimates.size, self.bits_per_symbol), dtype=int)
        out[:, :half] = i_bits.reshape(-1, half)
        out[:, half:] = q_bits.reshape(-1, half)
        return out.reshape(-1)


def mld_index(estimates: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Index of the nearest constellation point; ties go to the lower index."""
    estimates = np.asarray(estimates).reshape(-1)
    points = np.asarray(points)
    if (
        points.ndim == 1
        and points.size > 1
        and not np.iscomplexobj(points)
        and not np.iscomplexobj(estimates)
        and np.all(np.diff(points) > 0)
    ):
        # ascending real levels: decision boundaries at midpoints, ties downward
        bounds = 0.5 * (points[:-1] + points[1:])
        return np.searchsorted(bounds, estimates, side="left")
    d = np.abs(estimates[:, None] - points[None, :])
    return np.argmin(d, axis=1)


def mld_detect(estimates: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Maximum-likelihood decisions: the nearest constellation point per estimate."""
    points = np.asarray(points)
    return points[mld_index(estimates, points)]


def dc_bias_factor(bias_db: float) -> float:
    """Bias factor mu = sqrt(10^(dB/10) - 1); the DC level is mu times the signal RMS."""
    if bias_db < 0:
        raise ValueError(f"bias must be nonnegative dB, got {bias_db}")
    return float(np.sqrt(10.0 ** (bias_db / 10.0) - 1.0))


def _check_frame_size(n: int):
    if n < 4 or n & (n - 1):
        raise ValueError(f"frame size must be a power of two >= 4, got {n}")


@dataclass(frozen=True)
class OfdmConfig:
    """DCO-OFDM framing: size, cyclic prefix, electrical bias, QAM order."""

    n: int = 512
    cp_len: int = 4
    bias_db: float = 13.0
    constellation: QamConstellation = field(default_factory=lambda: QamConstellation.from_order(4))

    def __post_init__(self):
        _check_frame_size(self.n)
        if not 0 <= self.cp_len < self.n:
            raise ValueError(f"cp_len must lie in [0, {self.n}), got {self.cp_len}")
        if self.bias_db < 0:
            raise ValueError("bias_db must be nonnegative")

    @property
    def bits_per_frame(self) -> int:
        return (self.n // 2 - 1) * self.constellation.bits_per_symbol

    @property
    def signal_power(self) -> float:
        """Expected pre-bias per-sample electrical power of the real frame."""
        return (self.n - 2) / self.n**2

    @property
    def dc_level(self) -> float:
        return dc_bias_factor(self.bias_db) * np.sqrt(self.signal_power)


@dataclass(frozen=True)
class QctConfig:
    """Quartered-transform framing: size, prefix, bias, PAM order, transform family."""

    n: int = 512
    cp_len: int = 4
    bias_db: float = 13.0
    pam: PamConstellation = field(default_factory=lambda: PamConstellation.from_order(4))
    family: TransformFamily | None = None

    def __post_init__(self):
        _check_frame_size(self.n)
        if not 0 <= self.cp_len < self.n:
            raise ValueError(f"cp_len must lie in [0, {self.n}), got {self.cp_len}")
        if self.bias_db < 0:
            raise ValueError("bias_db must be nonnegative")
        if self.family is None:
            object.__setattr__(self, "family", build_qct_family(self.n))
        elif self.family.n != self.n:
            raise ValueError(f"transform family is sized {self.family.n}, config wants {self.n}")

    @property
    def bits_per_frame(self) -> int:
        return self.n * self.pam.bits_per_symbol

    @property
    def signal_power(self) -> float:
        """Expected pre-bias per-sample power of one LED stream (quarter of the total)."""
        return 0.25

    @property
    def dc_level(self) -> float:
        """Bias added to each of the four streams: mu * sqrt(0.25 * sum E[x^2])."""
        return dc_bias_factor(self.bias_db) * np.sqrt(self.signal_power)


def finalize_frames(baseband: np.ndarray, cfg, clip: bool = True) -> np.ndarray:
    """Prefix, bias, and clip pre-computed baseband frames."""
    frames = add_cp(baseband, cfg.cp_len) + cfg.dc_level
    return np.maximum(frames, 0.0) if clip else frames


def ofdm_baseband_frames(bits: np.ndarray, cfg: OfdmConfig) -> np.ndarray:
    """Pre-bias, pre-prefix real OFDM frames of shape (frames, n)."""
    bits = _check_bits(bits, cfg.bits_per_frame, "per OFDM frame")
    symbols = cfg.constellation.map_bits(bits).reshape(-1, cfg.n // 2 - 1)
    spectrum = hermitian_extend(symbols, n=cfg.n)
    return idft(spectrum).real


def dco_ofdm_modulate(bits: np.ndarray, cfg: OfdmConfig, clip: bool = True) -> np.ndarray:
    """Biased, optionally clipped, CP-prepended transmit frames (frames, n + cp)."""
    return finalize_frames(ofdm_baseband_frames(bits, cfg), cfg, clip)


def _equalizer_taps(h: np.ndarray, n: int, bins: np.ndarray) -> np.ndarray:
    hk = channel_frequency_response(h, n)
    wanted = hk[bins]
    if np.any(np.abs(wanted) <= _SINGULAR_TOL * np.abs(hk).max()):
        dead = bins[np.abs(wanted) <= _SINGULAR_TOL * np.abs(hk).max()]
        raise SingularChannelError(f"channel response vanishes on data bins {dead.tolist()}")
    return wanted


def dco_ofdm_demodulate(rx: np.ndarray, h: np.ndarray, cfg: OfdmConfig) -> np.ndarray:
    """Recover bits: drop CP, DFT, single-tap equalize each bin, detect, demap."""
    rx = np.atleast_2d(np.asarray(rx, dtype=float))
    spectrum = dft(remove_cp(rx, cfg.cp_len))
    bins = np.arange(1, cfg.n // 2)
    estimates = spectrum[:, bins] / _equalizer_taps(h, cfg.n, bins)
    return cfg.constellation.demap(estimates.reshape(-1))


def qct_baseband_frames(bits: np.ndarray, cfg: QctConfig) -> np.ndarray:
    """Pre-bias per-LED streams of shape (4, frames, n)."""
    bits = _check_bits(bits, cfg.bits_per_frame, "per QCT frame")
    symbols = cfg.pam.map_bits(bits).reshape(-1, 4, cfg.n // 4)
    return np.moveaxis(cfg.family.synthesize(symbols), 1, 0)


def qct_modulate(bits: np.ndarray, cfg: QctConfig, clip: bool = True) -> np.ndarray:
    """Four biased transmit streams, one per LED color, shape (4, frames, n + cp)."""
    return finalize_frames(qct_baseband_frames(bits, cfg), cfg, clip)


def qct_stream_gains(h: np.ndarray, cfg: QctConfig) -> np.ndarray:
    """Per-stream diagonal equalizer gains |H(k)|^2; raises when any vanishes."""
    hk = channel_frequency_response(h, cfg.n)
    amp = np.abs(hk)
    gains = cfg.family.stream_gains(h)
    if np.any(np.sqrt(gains) <= _SINGULAR_TOL * amp.max()):
        raise SingularChannelError("channel response vanishes on an assigned carrier")
    return gains


def qct_demodulate(rx: np.ndarray, h: np.ndarray, cfg: QctConfig) -> np.ndarray:
    """Recover bits from the photodetector sum of the four streams.

    Drop CP, subtract the known bias contribution, apply the matched circulant
    C^T, project onto each transform block, divide by the diagonal gains, then
    reassemble the symbol vector in stream order for detection.
    """
    rx = np.atleast_2d(np.asarray(rx, dtype=float))
    gains = qct_stream_gains(h, cfg)
    h0 = float(np.sum(np.asarray(h, dtype=float)))
    y = remove_cp(rx, cfg.cp_len) - 4.0 * cfg.dc_level * h0
    y = circulant_matched_apply(h, y)
    estimates = cfg.family.analyze(y) / gains  # (frames, 4, n/4)
    return cfg.pam.demap(estimates.reshape(-1))


def crosstalk_matrix(
    spds: tuple[SpectralDistribution, ...],
    bands: tuple[tuple[float, float], ...] = DEFAULT_FILTER_BANDS,
) -> np.ndarray:
    """Fraction of each LED channel's optical power captured per receiver band.

    K[i, j] integrates channel j's spectrum over band i and divides by the
    channel's full 380-780 nm power; unit filter gains are assumed.
    """
    if len(spds) != len(bands):
        raise ValueError("need one spectrum per receiver band")
    ordered = sorted(bands)
    for (_, hi), (lo, _) in zip(ordered, ordered[1:]):
        if lo < hi:
            raise ValueError(f"receiver bands overlap near {lo} nm")
    k = np.zeros((len(bands), len(spds)))
    for j, spd in enumerate(spds):
        total = spd.total_power()
        if total <= 0:
            raise ValueError(f"channel {j} spectrum carries no power")
        for i, (lo, hi) in enumerate(bands):
            mask = (GRID >= lo) & (GRID <= hi)
            k[i, j] = np.trapezoid(spd.values[mask], GRID[mask]) / total
    return k


def default_crosstalk_matrix() -> np.ndarray:
    """Crosstalk of the modeled LED channels through the standard filter bands."""
    spds = tuple(h_model_spd(LED_CHANNELS[c]) for c in CHANNEL_ORDER)
    return crosstalk_matrix(spds, DEFAULT_FILTER_BANDS)


@dataclass(frozen=True)
class CskConfig:
    """Four-band one-hot intensity keying with a known receive crosstalk matrix."""

    crosstalk: np.ndarray = field(default_factory=default_crosstalk_matrix)
    avg_power: float = 1.0

    def __post_init__(self):
        k = np.asarray(self.crosstalk, dtype=float)
        if k.shape != (4, 4):
            raise ValueError(f"crosstalk matrix must be 4x4, got {k.shape}")
        if np.any(k < 0) or np.any(k > 1):
            raise ValueError("crosstalk entries must lie in [0, 1]")
        if self.avg_power <= 0:
            raise ValueError("average electrical power must be positive")
        object.__setattr__(self, "crosstalk", k)

    @property
    def bits_per_symbol(self) -> int:
        return 2

    @property
    def symbol_patterns(self) -> np.ndarray:
        """One-hot intensity patterns scaled so mean electrical power is avg_power."""
        return np.sqrt(self.avg_power) * np.eye(4)


def csk_modulate(bits: np.ndarray, cfg: CskConfig) -> np.ndarray:
    """Map bit pairs to one-hot four-channel intensity symbols, shape (symbols, 4)."""
    bits = _check_bits(bits, cfg.bits_per_symbol, "per CSK symbol")
    idx = _bits_to_codes(bits, cfg.bits_per_symbol)
    return cfg.symbol_patterns[idx]


def csk_demodulate(rx: np.ndarray, cfg: CskConfig) -> np.ndarray:
    """Maximum-likelihood detection against the crosstalk-filtered patterns."""
    rx = np.atleast_2d(np.asarray(rx, dtype=float))
    candidates = cfg.symbol_patterns @ cfg.crosstalk.T  # row i = K @ pattern_i
    d2 = ((rx[:, None, :] - candidates[None, :, :]) ** 2).sum(axis=2)
    idx = np.argmin(d2, axis=1)
    return _codes_to_bits(idx, cfg.bits_per_symbol)
