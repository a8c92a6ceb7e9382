"""LED spectra and CIE photometric metrics: flux, chromaticity, CCT, CRI.

All spectra live on a shared 1 nm wavelength grid from 380 to 780 nm.  The
color matching functions and test-color-sample reflectances ship as CSV files
at their native 5 nm resolution and are linearly interpolated onto the grid at
load time; set VLCSIM_DATA_DIR to point the loader at replacement tables.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from .errors import NoMeaningfulCctError, UndefinedChromaticityError

GRID = np.arange(380.0, 781.0)
GRID_STEP_NM = 1.0

# Planck's law second radiation constant, CIE convention (m*K)
_C2 = 1.4388e-2

CCT_MIN_K = 1000.0
CCT_MAX_K = 20000.0
MAX_PLANCKIAN_DISTANCE = 0.05


@dataclass(frozen=True)
class SpectralDistribution:
    """Spectral power density in W/nm sampled on the shared 380-780 nm grid."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != GRID.shape:
            raise ValueError(f"expected {GRID.size} samples on the 380-780 nm grid, got {v.shape}")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise ValueError("spectral power density must be finite and nonnegative")
        object.__setattr__(self, "values", v)

    @property
    def grid(self) -> np.ndarray:
        return GRID

    def total_power(self) -> float:
        """Integrated optical power in watts (trapezoidal rule)."""
        return float(np.trapezoid(self.values, GRID))

    def __add__(self, other: "SpectralDistribution") -> "SpectralDistribution":
        return SpectralDistribution(self.values + other.values)

    def __mul__(self, scalar: float) -> "SpectralDistribution":
        return SpectralDistribution(self.values * float(scalar))

    __rmul__ = __mul__


def data_dir() -> Path:
    override = os.environ.get("VLCSIM_DATA_DIR")
    return Path(override) if override else Path(__file__).parent / "data"


def _read_table(name: str, columns: tuple[str, ...]) -> np.ndarray:
    path = data_dir() / name
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        if tuple(header) != columns:
            raise ValueError(f"{path} has columns {header}, expected {list(columns)}")
        rows = np.array([[float(v) for v in row] for row in reader])
    lam = rows[:, 0]
    if lam[0] > GRID[0] or lam[-1] < GRID[-1]:
        raise ValueError(f"{path} does not cover 380-780 nm")
    if np.any(np.diff(lam) <= 0):
        raise ValueError(f"{path} wavelengths must be strictly increasing")
    return rows


def load_cmf() -> np.ndarray:
    """CIE 1931 2-degree color matching functions on the grid, shape (401, 3)."""
    return _load_cmf_cached(str(data_dir()))


@lru_cache(maxsize=4)
def _load_cmf_cached(dir_key: str) -> np.ndarray:
    rows = _read_table("cie_cmf_1931.csv", ("wavelength_nm", "xbar", "ybar", "zbar"))
    return np.column_stack(
        [np.interp(GRID, rows[:, 0], rows[:, c]) for c in (1, 2, 3)]
    )


def load_tcs() -> np.ndarray:
    """The 14 CIE test-color-sample reflectances on the grid, shape (401, 14)."""
    return _load_tcs_cached(str(data_dir()))


@lru_cache(maxsize=4)
def _load_tcs_cached(dir_key: str) -> np.ndarray:
    cols = ("wavelength_nm",) + tuple(f"tcs{i:02d}" for i in range(1, 15))
    rows = _read_table("tcs_reflectance.csv", cols)
    return np.column_stack(
        [np.interp(GRID, rows[:, 0], rows[:, c]) for c in range(1, 15)]
    )


@dataclass(frozen=True)
class HModelParams:
    """Asymmetric Gaussian-composite shape parameters for one LED color channel."""

    peak_nm: float
    width_left_nm: float
    width_right_nm: float
    k1: float
    k2: float

    def __post_init__(self):
        if self.width_left_nm <= 0 or self.width_right_nm <= 0:
            raise ValueError("spectral half-widths must be positive")
        if self.k1 < 0 or self.k2 < 1:
            raise ValueError("shape parameters require k1 >= 0 and k2 >= 1")


# Luxeon C RAGB channel parameters (peak nm, left/right half-widths nm, k1, k2)
LED_CHANNELS = {
    "red": HModelParams(632.5, 23.84, 14.74, 2.0, 6.0),
    "amber": HModelParams(600.0, 19.66, 14.97, 2.0, 5.0),
    "green": HModelParams(517.7, 29.38, 45.21, 2.0, 3.0),
    "blue": HModelParams(453.0, 18.99, 25.5, 2.0, 5.0),
}
CHANNEL_ORDER = ("red", "amber", "green", "blue")


def h_model_value(lam: np.ndarray, p: HModelParams) -> np.ndarray:
    """Continuous composite-Gaussian density: (g + k1*g^k2) / (1 + k1)."""
    lam = np.asarray(lam, dtype=float)
    width = np.where(lam < p.peak_nm, p.width_left_nm, p.width_right_nm)
    g = np.exp(-((lam - p.peak_nm) ** 2) / width**2)
    return (g + p.k1 * g**p.k2) / (1.0 + p.k1)


def h_model_spd(p: HModelParams) -> SpectralDistribution:
    """Channel spectrum on the grid, normalized to a unit peak sample."""
    values = h_model_value(GRID, p)
    return SpectralDistribution(values / values.max())


def scale_to_power(spd: SpectralDistribution, optical_watts: float) -> SpectralDistribution:
    """Rescale so the trapezoidal integral equals the target optical power."""
    total = spd.total_power()
    if total <= 0:
        raise ValueError("cannot scale a zero-power spectrum")
    return SpectralDistribution(spd.values * (optical_watts / total))


def luminous_flux(spd: SpectralDistribution) -> float:
    """Photopically weighted power: 683 * sum(spd * V(lambda) * dlambda) in lumens."""
    vbar = load_cmf()[:, 1]
    return float(683.0 * np.sum(spd.values * vbar) * GRID_STEP_NM)


def illuminance(flux_lm: float, area_m2: float) -> float:
    """Lux: lumens per square meter."""
    if area_m2 <= 0:
        raise ValueError("area must be positive")
    return flux_lm / area_m2


@dataclass(frozen=True)
class TristimulusXYZ:
    X: float
    Y: float
    Z: float


def tristimulus(spd: SpectralDistribution) -> TristimulusXYZ:
    """Integrate the spectrum against the CIE 1931 color matching functions."""
    cmf = load_cmf()
    x, y, z = (float(np.sum(spd.values * cmf[:, c]) * GRID_STEP_NM) for c in range(3))
    return TristimulusXYZ(x, y, z)


def chromaticity(xyz: TristimulusXYZ) -> tuple[float, float]:
    """CIE 1931 (x, y) coordinates."""
    total = xyz.X + xyz.Y + xyz.Z
    if total <= 0:
        raise UndefinedChromaticityError("chromaticity requires X+Y+Z > 0")
    return xyz.X / total, xyz.Y / total


def uv_1960(x: float, y: float) -> tuple[float, float]:
    """CIE 1960 uniform chromaticity coordinates."""
    den = -2.0 * x + 12.0 * y + 3.0
    return 4.0 * x / den, 6.0 * y / den


def planckian_spd(temperature_k: float) -> SpectralDistribution:
    """Blackbody spectral radiance on the grid, normalized to a unit peak."""
    if not CCT_MIN_K <= temperature_k <= CCT_MAX_K:
        raise ValueError(f"temperature must lie in [{CCT_MIN_K}, {CCT_MAX_K}] K")
    lam_m = GRID * 1e-9
    radiance = lam_m**-5 / np.expm1(_C2 / (lam_m * temperature_k))
    return SpectralDistribution(radiance / radiance.max())


def _source_uv(spd: SpectralDistribution) -> tuple[float, float]:
    return uv_1960(*chromaticity(tristimulus(spd)))


@lru_cache(maxsize=4)
def _planckian_locus(dir_key: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    temps = np.arange(CCT_MIN_K, CCT_MAX_K + 1e-9, 10.0)
    uv = np.array([_source_uv(planckian_spd(t)) for t in temps])
    return temps, uv[:, 0], uv[:, 1]


@dataclass(frozen=True)
class CctResult:
    """Correlated color temperature and the (u, v) distance to the Planckian locus."""

    kelvin: float
    duv: float


def cct(spd: SpectralDistribution) -> CctResult:
    """Closest-Planckian-point color temperature in CIE 1960 (u, v).

    A 10 K coarse scan over 1000-20000 K seeds a ternary refinement down to
    0.1 K.  Raises NoMeaningfulCctError when the chromaticity sits farther
    than 0.05 from the locus.
    """
    u, v = _source_uv(spd)
    temps, lu, lv = _planckian_locus(str(data_dir()))
    dist2 = (lu - u) ** 2 + (lv - v) ** 2
    i = int(np.argmin(dist2))
    lo = temps[max(i - 1, 0)]
    hi = temps[min(i + 1, len(temps) - 1)]

    def d(t: float) -> float:
        uu, vv = _source_uv(planckian_spd(t))
        return float(np.hypot(uu - u, vv - v))

    while hi - lo > 0.1:
        m1 = lo + (hi - lo) / 3.0
        m2 = hi - (hi - lo) / 3.0
        if d(m1) <= d(m2):
            hi = m2
        else:
            lo = m1
    best = 0.5 * (lo + hi)
    duv = d(best)
    if duv > MAX_PLANCKIAN_DISTANCE:
        raise NoMeaningfulCctError(
            f"chromaticity lies {duv:.4f} from the Planckian locus (limit {MAX_PLANCKIAN_DISTANCE})"
        )
    return CctResult(kelvin=float(best), duv=duv)


@dataclass(frozen=True)
class CriReport:
    """Special color rendering indices, their first-eight average, and context."""

    special_indices: np.ndarray
    general: float
    reference_cct: float
    duv: float


def _cd_coords(u: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    c = (4.0 - u - 10.0 * v) / v
    d = (1.708 * v + 0.404 - 1.481 * u) / v
    return c, d


def cri(spd: SpectralDistribution) -> CriReport:
    """General color rendering index per the standard test-sample procedure.

    The reference is a Planckian radiator at the test source's correlated
    color temperature; test-sample chromaticities are chromatically adapted
    to the reference white before the color difference is taken in U*V*W*.
    """
    cmf = load_cmf()
    tcs = load_tcs()
    result = cct(spd)
    reference = planckian_spd(result.kelvin)

    def sample_xyz(source: SpectralDistribution) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        spectra = source.values[:, None] * tcs
        x, y, z = (spectra.T @ cmf[:, c] for c in range(3))
        y_src = float(np.sum(source.values * cmf[:, 1]))
        scale = 100.0 / y_src
        return x * scale, y * scale, z * scale

    def uv_of(x: np.ndarray, y: np.ndarray, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        den = x + 15.0 * y + 3.0 * z
        return 4.0 * x / den, 6.0 * y / den

    u_t, v_t = _source_uv(spd)
    u_r, v_r = _source_uv(reference)

    xt, yt, zt = sample_xyz(spd)
    xr, yr, zr = sample_xyz(reference)
    uti, vti = uv_of(xt, yt, zt)
    uri, vri = uv_of(xr, yr, zr)

    # Von Kries-style adaptation of the test-sample chromaticities to the
    # reference white, via the standard c/d intermediate coordinates.
    c_t, d_t = _cd_coords(np.asarray(u_t), np.asarray(v_t))
    c_r, d_r = _cd_coords(np.asarray(u_r), np.asarray(v_r))
    c_i, d_i = _cd_coords(uti, vti)
    cc = c_i * (c_r / c_t)
    dd = d_i * (d_r / d_t)
    den = 16.518 + 1.481 * cc - dd
    u_adapted = (10.872 + 0.404 * cc - 4.0 * dd) / den
    v_adapted = 5.520 / den

    def uvw(y: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        w = 25.0 * np.cbrt(y) - 17.0
        return np.stack([13.0 * w * (u - u_r), 13.0 * w * (v - v_r), w])

    delta = uvw(yr, uri, vri) - uvw(yt, u_adapted, v_adapted)
    delta_e = np.sqrt(np.sum(delta**2, axis=0))
    indices = 100.0 - 4.6 * delta_e
    return CriReport(
        special_indices=indices,
        general=float(np.mean(indices[:8])),
        reference_cct=result.kelvin,
        duv=result.duv,
    )


def combined_led_spd(per_channel_power: dict[str, float]) -> SpectralDistribution:
    """Mix the named LED channels, each scaled to its optical power in watts."""
    total = SpectralDistribution(np.zeros_like(GRID))
    for name, watts in per_channel_power.items():
        if watts < 0:
            raise ValueError(f"channel power must be nonnegative, got {watts} for {name}")
        if watts > 0:
            total = total + scale_to_power(h_model_spd(LED_CHANNELS[name]), watts)
    return total


# Optical power fractions of the four dies at the device's white operating
# point: solved once so the combined spectrum sits on the Planckian locus at
# the nominal 3471 K and attains the highest general rendering index that the
# channel spectra allow.  An equal four-way optical split lands far below the
# locus (around 3089 K at a 0.038 (u,v) offset) and cannot represent the
# advertised warm-white point, so the die powers are treated as a factory
# calibration rather than an equal split.
WHITE_POINT_FRACTIONS = {"red": 0.2311, "amber": 0.2629, "green": 0.3708, "blue": 0.1352}


def white_mix_spd(total_optical_watts: float = 1.0) -> SpectralDistribution:
    """Combined warm-white RAGB spectrum at the calibrated operating point."""
    return combined_led_spd(
        {c: f * total_optical_watts for c, f in WHITE_POINT_FRACTIONS.items()}
    )
