"""Monte Carlo BER sweeps, analytic oracles, PAPR statistics, spatial maps,
and the combined illumination report.

Every experiment is deterministic given (config, seed): each SNR point draws
from its own generator keyed by (seed, point index), so results do not depend
on worker count or execution order.  Signal power for noise calibration is
measured on the pre-bias, pre-prefix waveform, excluding the DC bias.
"""

from __future__ import annotations

import csv
import json
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import quad
from scipy.special import erfc

from . import modems as md
from .channel import AwgnSpec, ReceiverSpec, RoomGeometry, propagate_extended
from .photometry import cct, cri, luminous_flux, white_mix_spd

BER_SCHEMES = ("qct", "dco_ofdm", "csk")
PAPR_SCHEMES = ("dco_ofdm", "qct", "qct_sum")


def qfunc(x):
    """Gaussian tail probability Q(x)."""
    return 0.5 * erfc(np.asarray(x, dtype=float) / np.sqrt(2.0))


def analytic_pam_ber(m: int, snr_per_bit_db: float) -> float:
    """Gray-coded M-PAM bit error probability at the given SNR per bit."""
    if m not in (2, 4, 8, 16):
        raise ValueError(f"unsupported PAM order {m}")
    k = np.log2(m)
    gamma = 10.0 ** (np.asarray(snr_per_bit_db, dtype=float) / 10.0)
    arg = np.sqrt(6.0 * k / (m**2 - 1) * gamma)
    return float(2.0 * (m - 1) / (m * k) * qfunc(arg))


def analytic_qam_ber(m: int, snr_per_bit_db: float) -> float:
    """Gray-coded square M-QAM bit error probability (per-rail PAM decomposition)."""
    side = int(round(np.sqrt(m)))
    if side * side != m:
        raise ValueError(f"QAM order must be square, got {m}")
    return analytic_pam_ber(side, snr_per_bit_db)


def analytic_csk4_ber(snr_per_bit_db: float) -> float:
    """Ideal (crosstalk-free) 4-ary orthogonal intensity signaling bit error rate.

    One branch carries amplitude a with a/sigma = 2*sqrt(gamma_b); the symbol
    is decided by the largest branch, and each symbol error flips 2/3 of the
    two labeling bits on average.
    """
    gamma = 10.0 ** (snr_per_bit_db / 10.0)
    ratio = 2.0 * np.sqrt(gamma)

    def integrand(t):
        phi = np.exp(-0.5 * t * t) / np.sqrt(2.0 * np.pi)
        cdf = 1.0 - qfunc(t + ratio)
        return phi * cdf**3

    p_correct, _ = quad(integrand, -12.0, 12.0 + ratio, limit=200)
    p_sym = min(max(1.0 - p_correct, 0.0), 1.0)
    return float(p_sym * 2.0 / 3.0)


@dataclass
class BerCurve:
    """One scheme's Monte Carlo BER sweep with per-point reliability flags."""

    scheme: str
    snr_per_bit_db: list[float]
    ber: list[float]
    bits_simulated: list[int]
    errors_counted: list[int]
    unreliable: list[bool]
    seed: int

    def rows(self):
        for i in range(len(self.snr_per_bit_db)):
            yield {
                "snr_per_bit_db": self.snr_per_bit_db[i],
                "ber": self.ber[i],
                "bits": self.bits_simulated[i],
                "errors": self.errors_counted[i],
                "unreliable": int(self.unreliable[i]),
            }


def _noise_sigma(energy_per_bit: float, snr_per_bit_db: float) -> float:
    """Per-sample noise deviation from E_b and the SNR-per-bit target (N0 = 2 sigma^2)."""
    gamma = 10.0 ** (snr_per_bit_db / 10.0)
    return float(np.sqrt(energy_per_bit / (2.0 * gamma)))


def _simulate_qct_point(cfg, h, snr_db, rng, min_errors, max_bits):
    errors = bits_done = 0
    frame_bits = cfg.bits_per_frame
    batch_frames = max(1, int(2_000_000 // frame_bits))
    while errors < min_errors and bits_done < max_bits:
        frames = min(batch_frames, max(1, (max_bits - bits_done) // frame_bits))
        bits = rng.integers(0, 2, frames * frame_bits)
        baseband = md.qct_baseband_frames(bits, cfg)
        energy_per_bit = float(np.sum(baseband**2)) / bits.size
        tx = md.finalize_frames(baseband, cfg)
        rx = propagate_extended(tx.sum(axis=0), h)
        sigma = _noise_sigma(energy_per_bit, snr_db)
        rx = rx + rng.normal(0.0, sigma, size=rx.shape)
        out = md.qct_demodulate(rx, h, cfg)
        errors += int(np.sum(out != bits))
        bits_done += bits.size
    return errors, bits_done


def _simulate_ofdm_point(cfg, h, snr_db, rng, min_errors, max_bits):
    errors = bits_done = 0
    frame_bits = cfg.bits_per_frame
    batch_frames = max(1, int(2_000_000 // frame_bits))
    while errors < min_errors and bits_done < max_bits:
        frames = min(batch_frames, max(1, (max_bits - bits_done) // frame_bits))
        bits = rng.integers(0, 2, frames * frame_bits)
        baseband = md.ofdm_baseband_frames(bits, cfg)
        energy_per_bit = float(np.sum(baseband**2)) / bits.size
        tx = md.finalize_frames(baseband, cfg)
        rx = propagate_extended(tx, h)
        sigma = _noise_sigma(energy_per_bit, snr_db)
        rx = rx + rng.normal(0.0, sigma, size=rx.shape)
        out = md.dco_ofdm_demodulate(rx, h, cfg)
        errors += int(np.sum(out != bits))
        bits_done += bits.size
    return errors, bits_done


def _simulate_csk_point(cfg, h, snr_db, rng, min_errors, max_bits):
    errors = bits_done = 0
    batch_bits = 1_000_000
    while errors < min_errors and bits_done < max_bits:
        nbits = min(batch_bits, max(2, (max_bits - bits_done) // 2 * 2))
        bits = rng.integers(0, 2, nbits)
        tx = md.csk_modulate(bits, cfg)
        energy_per_bit = float(np.mean(np.sum(tx**2, axis=1))) / cfg.bits_per_symbol
        rx = tx @ cfg.crosstalk.T
        sigma = _noise_sigma(energy_per_bit, snr_db)
        rx = rx + rng.normal(0.0, sigma, size=rx.shape)
        out = md.csk_demodulate(rx, cfg)
        errors += int(np.sum(out != bits))
        bits_done += bits.size
    return errors, bits_done


_POINT_WORKERS = {
    "qct": _simulate_qct_point,
    "dco_ofdm": _simulate_ofdm_point,
    "csk": _simulate_csk_point,
}


def run_ber_sweep(
    scheme: str,
    cfg,
    h: np.ndarray,
    snr_list: list[float],
    *,
    seed: int,
    min_errors: int = 100,
    max_bits: int = 10_000_000,
    threads: int = 1,
) -> BerCurve:
    """Simulate one scheme over the SNR-per-bit grid until the stop rule fires.

    Each point consumes its own generator seeded by (seed, point index), so a
    sweep is reproducible bit for bit at any worker count.
    """
    if scheme not in _POINT_WORKERS:
        raise ValueError(f"unknown scheme {scheme!r}; choose from {BER_SCHEMES}")
    worker = _POINT_WORKERS[scheme]

    def run_point(idx_snr):
        idx, snr_db = idx_snr
        rng = np.random.default_rng([seed, idx])
        return worker(cfg, h, snr_db, rng, min_errors, max_bits)

    jobs = list(enumerate(snr_list))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run_point, jobs))
    else:
        results = [run_point(j) for j in jobs]

    errors = [r[0] for r in results]
    bits = [r[1] for r in results]
    return BerCurve(
        scheme=scheme,
        snr_per_bit_db=[float(s) for s in snr_list],
        ber=[e / b for e, b in zip(errors, bits)],
        bits_simulated=bits,
        errors_counted=errors,
        unreliable=[e < min_errors for e in errors],
        seed=seed,
    )


@dataclass
class PaprCcdf:
    """Empirical P[PAPR > threshold] with the underlying per-frame samples."""

    scheme: str
    thresholds_db: list[float]
    ccdf: list[float]
    frames_simulated: int
    n: int
    samples_db: np.ndarray = field(repr=False)

    def rows(self):
        for t, c in zip(self.thresholds_db, self.ccdf):
            yield {"threshold_db": t, "ccdf": c}


def ccdf_from_samples(samples_db: np.ndarray, thresholds_db) -> list[float]:
    """Exceedance fraction of the stored samples at each threshold."""
    samples_db = np.asarray(samples_db, dtype=float)
    return [float(np.mean(samples_db > t)) for t in thresholds_db]


def _frame_papr_db(frames: np.ndarray) -> np.ndarray:
    power = frames**2
    return 10.0 * np.log10(power.max(axis=-1) / power.mean(axis=-1))


def run_papr_ccdf(
    scheme: str,
    cfg,
    *,
    n_frames: int = 10_000,
    thresholds_db=None,
    seed: int = 0,
) -> PaprCcdf:
    """Per-frame PAPR statistics on pre-bias frames.

    ``qct`` measures each LED stream separately (four samples per frame);
    ``qct_sum`` measures the photodetector-facing sum of the four streams.
    """
    if scheme not in PAPR_SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; choose from {PAPR_SCHEMES}")
    if thresholds_db is None:
        thresholds_db = [round(0.25 * i, 2) for i in range(0, 61)]
    rng = np.random.default_rng([seed, 0])
    samples = []
    frame_bits = cfg.bits_per_frame
    batch = max(1, int(2_000_000 // frame_bits))
    done = 0
    while done < n_frames:
        take = min(batch, n_frames - done)
        bits = rng.integers(0, 2, take * frame_bits)
        if scheme == "dco_ofdm":
            frames = md.ofdm_baseband_frames(bits, cfg)
            samples.append(_frame_papr_db(frames))
        elif scheme == "qct":
            streams = md.qct_baseband_frames(bits, cfg)
            samples.append(_frame_papr_db(streams).reshape(-1))
        else:  # qct_sum
            streams = md.qct_baseband_frames(bits, cfg)
            samples.append(_frame_papr_db(streams.sum(axis=0)))
        done += take
    samples_db = np.concatenate(samples)
    return PaprCcdf(
        scheme=scheme,
        thresholds_db=[float(t) for t in thresholds_db],
        ccdf=ccdf_from_samples(samples_db, thresholds_db),
        frames_simulated=done,
        n=cfg.n,
        samples_db=samples_db,
    )


@dataclass
class HeatMap:
    """Grid of values over the room floor with summary statistics."""

    grid_step: float
    values: np.ndarray

    @property
    def vmin(self) -> float:
        return float(self.values.min())

    @property
    def vmax(self) -> float:
        return float(self.values.max())

    @property
    def mean(self) -> float:
        return float(self.values.mean())


def _scheme_optical_and_signal(scheme: str, per_led_electrical: float, qct_cfg, ofdm_cfg, csk_cfg):
    """Per-LED time-average optical power and electrical AC signal power.

    QCT: each color stream carries signal power P_led/4/(1+mu^2) and rides on
    a bias of mu times its RMS; the bias sets the optical mean.  DCO-OFDM: one
    biased composite stream at the full LED power.  CSK: one-hot keying at
    amplitude sqrt(P_led), a quarter duty per color.
    """
    if scheme == "qct":
        mu = md.dc_bias_factor(qct_cfg.bias_db)
        per_color_signal = per_led_electrical / 4.0 / (1.0 + mu**2)
        optical_mean = 4.0 * mu * np.sqrt(per_color_signal)
        signal_power = 4.0 * per_color_signal  # independent streams add at the detector
        return optical_mean, signal_power
    if scheme == "dco_ofdm":
        mu = md.dc_bias_factor(ofdm_cfg.bias_db)
        signal_power = per_led_electrical / (1.0 + mu**2)
        return mu * np.sqrt(signal_power), signal_power
    if scheme == "csk":
        amplitude = np.sqrt(per_led_electrical)
        optical_mean = amplitude  # four colors at quarter duty each
        k = np.asarray(csk_cfg.crosstalk, dtype=float)
        signal_power = amplitude**2 * float(np.mean(np.diag(k) ** 2))
        return optical_mean, signal_power
    raise ValueError(f"room maps support {BER_SCHEMES}, got {scheme!r}")


def run_room_maps(
    room: RoomGeometry,
    rx: ReceiverSpec,
    scheme: str,
    *,
    qct_cfg=None,
    ofdm_cfg=None,
    csk_cfg=None,
    noise: AwgnSpec | None = None,
) -> tuple[HeatMap, HeatMap]:
    """Illuminance and electrical-SNR maps over the receiver plane.

    The lux map weights the received optical power by the luminous efficacy of
    the calibrated white mix; the SNR map squares the photocurrent from the
    scheme's AC signal power against the receiver noise floor.
    """
    if not room.luminaires:
        raise ValueError("room has no luminaires")
    qct_cfg = qct_cfg or md.QctConfig()
    ofdm_cfg = ofdm_cfg or md.OfdmConfig()
    csk_cfg = csk_cfg or md.CskConfig()
    noise = noise or AwgnSpec()
    gains = room.gain_map(rx)
    per_led = room.luminaires[0].electrical_power
    optical_mean, signal_power = _scheme_optical_and_signal(
        scheme, per_led, qct_cfg, ofdm_cfg, csk_cfg
    )

    lumens_per_optical_watt = luminous_flux(white_mix_spd(1.0))
    lux = gains / rx.area * optical_mean * lumens_per_optical_watt
    electrical = (rx.responsivity * gains * np.sqrt(signal_power)) ** 2
    snr_db = 10.0 * np.log10(electrical / noise.variance)
    return (
        HeatMap(grid_step=room.grid_step, values=lux),
        HeatMap(grid_step=room.grid_step, values=snr_db),
    )


@dataclass
class IlluminationReport:
    """Per-scheme illumination quality and clipping summary."""

    schemes: dict[str, dict]
    notes: list[str]

    def rows(self):
        for name, entry in self.schemes.items():
            yield {"scheme": name, **entry}


def run_illumination_report(
    room: RoomGeometry,
    rx: ReceiverSpec,
    *,
    qct_cfg=None,
    ofdm_cfg=None,
    csk_cfg=None,
    seed: int = 0,
    clip_probe_bits: int = 200_000,
) -> IlluminationReport:
    """CRI, CCT, normalized mean illuminance, and clipped-sample fraction per scheme.

    Both schemes emit the same calibrated white mix on time average (the CSK
    duty cycles are exactly one quarter), so their color metrics coincide
    while their optical means differ.  Lux maps are normalized by the peak
    cell of the brighter (QCT) map.
    """
    qct_cfg = qct_cfg or md.QctConfig()
    ofdm_cfg = ofdm_cfg or md.OfdmConfig()
    csk_cfg = csk_cfg or md.CskConfig()

    white = white_mix_spd(1.0)
    color = cct(white)
    rendering = cri(white)

    kwargs = {"qct_cfg": qct_cfg, "ofdm_cfg": ofdm_cfg, "csk_cfg": csk_cfg}
    qct_lux, _ = run_room_maps(room, rx, "qct", **kwargs)
    csk_lux, _ = run_room_maps(room, rx, "csk", **kwargs)
    ofdm_lux, _ = run_room_maps(room, rx, "dco_ofdm", **kwargs)
    reference = qct_lux.vmax

    rng = np.random.default_rng([seed, 0])
    frames = max(1, clip_probe_bits // qct_cfg.bits_per_frame)
    bits = rng.integers(0, 2, frames * qct_cfg.bits_per_frame)
    unclipped_qct = md.qct_modulate(bits, qct_cfg, clip=False)
    qct_clip = float(np.mean(unclipped_qct < 0))

    bits_ofdm = rng.integers(0, 2, max(1, clip_probe_bits // ofdm_cfg.bits_per_frame) * ofdm_cfg.bits_per_frame)
    unclipped_ofdm = md.dco_ofdm_modulate(bits_ofdm, ofdm_cfg, clip=False)
    ofdm_clip = float(np.mean(unclipped_ofdm < 0))

    entry = {
        "cri": rendering.general,
        "cct_kelvin": color.kelvin,
        "duv": color.duv,
    }
    return IlluminationReport(
        schemes={
            "qct": {
                **entry,
                "mean_normalized_lux": qct_lux.mean / reference,
                "clipped_fraction": qct_clip,
            },
            "csk": {
                **entry,
                "mean_normalized_lux": csk_lux.mean / reference,
                "clipped_fraction": 0.0,
            },
            "dco_ofdm": {
                **entry,
                "mean_normalized_lux": ofdm_lux.mean / reference,
                "clipped_fraction": ofdm_clip,
            },
        },
        notes=[
            "lux maps normalized by the peak QCT cell",
            "csk uses equal-average-power normalization (one band on at 4x per-band average)",
        ],
    )


def _atomic_write(path: Path, writer) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as f:
            writer(f)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path: Path, rows, fieldnames) -> None:
    """RFC-4180 CSV: header row, comma separator, CRLF line endings."""

    def writer(f):
        out = csv.DictWriter(f, fieldnames=fieldnames)
        out.writeheader()
        for row in rows:
            out.writerow(row)

    _atomic_write(Path(path), writer)


def write_json(path: Path, payload: dict) -> None:
    def writer(f):
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")

    _atomic_write(Path(path), writer)


def heatmap_rows(heat: HeatMap, reference: float | None = None):
    """One row per grid cell: coordinates, value, optionally normalized value."""
    nx, ny = heat.values.shape
    for i in range(nx):
        for j in range(ny):
            row = {
                "x_m": round(i * heat.grid_step, 6),
                "y_m": round(j * heat.grid_step, 6),
                "value": heat.values[i, j],
            }
            if reference is not None:
                row["normalized"] = heat.values[i, j] / reference
            yield row
