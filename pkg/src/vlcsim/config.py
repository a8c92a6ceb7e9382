"""Experiment configuration: TOML parsing, schema validation, stable hashing.

Every key has a documented default and unit; unknown keys are rejected with
their full path so typos cannot silently fall back to defaults.  The config
hash is a SHA-256 digest of the canonicalized (fully defaulted) content, so
output files are traceable to the exact settings that produced them.
"""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import modems as md
from .channel import AwgnSpec, NAMED_CHANNELS, ReceiverSpec, RoomGeometry, default_room


class ConfigError(ValueError):
    """Configuration file cannot be parsed or violates the schema."""


# key -> (default, unit, description)
CONFIG_SCHEMA: dict[str, dict[str, tuple]] = {
    "experiment": {
        "seed": (12345, "-", "master RNG seed; every result is reproducible from it"),
        "threads": (1, "-", "worker threads for per-SNR-point parallelism"),
    },
    "modem": {
        "n": (512, "samples", "frame size (power of two, multiple of 4)"),
        "cp_len": (4, "samples", "cyclic prefix length"),
        "bias_db": (13.0, "dB", "electrical DC bias for QCT and DCO-OFDM"),
        "pam_order": (4, "-", "M-PAM order for the quartered-transform modem"),
        "qam_order": (4, "-", "M-QAM order for DCO-OFDM"),
    },
    "channel": {
        "name": ("flat", "-", "named discrete channel: 'flat' or 'threetap'"),
        "taps": ([], "gain", "explicit impulse response; overrides 'name' when nonempty"),
        "n0_a2_per_hz": (1e-22, "A^2/Hz", "receiver noise power spectral density"),
        "bandwidth_hz": (20e6, "Hz", "receiver bandwidth for the noise floor"),
    },
    "power": {
        "total_electrical_w": (100.0, "W", "room-wide electrical budget over 36 LEDs"),
    },
    "room": {
        "semi_angle_deg": (30.0, "deg", "LED half-power semi-angle (Lambertian order)"),
        "grid_step_m": (0.1, "m", "heatmap grid spacing over the 5x5 m floor"),
    },
    "receiver": {
        "area_m2": (1e-4, "m^2", "photodetector active area"),
        "fov_deg": (85.0, "deg", "receiver field of view"),
        "responsivity_a_per_w": (0.4, "A/W", "photodetector responsivity"),
        "height_m": (0.0, "m", "receiver plane height above the floor"),
    },
    "ber": {
        "schemes": (["qct", "dco_ofdm", "csk"], "-", "modems included in the BER sweep"),
        "snr_per_bit_db": (
            [0.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0, 14.0, 16.0],
            "dB",
            "average electrical SNR per bit grid (signal power excludes DC bias)",
        ),
        "min_errors": (100, "-", "bit errors collected per point before stopping"),
        "max_bits": (10_000_000, "-", "hard per-point bit budget"),
    },
    "papr": {
        "schemes": (["dco_ofdm", "qct", "qct_sum"], "-", "waveforms included in the PAPR study"),
        "n_frames": (10_000, "-", "frames simulated per scheme"),
        "threshold_min_db": (0.0, "dB", "lowest CCDF threshold"),
        "threshold_max_db": (15.0, "dB", "highest CCDF threshold"),
        "threshold_step_db": (0.25, "dB", "CCDF threshold spacing"),
    },
    "csk": {
        "band_lower_nm": ([612.0, 575.0, 483.0, 400.0], "nm", "receiver filter lower bounds"),
        "band_upper_nm": ([680.0, 612.0, 575.0, 483.0], "nm", "receiver filter upper bounds"),
    },
}


def schema_help() -> str:
    """Human-readable key/default/unit listing for --help."""
    lines = ["configuration keys (TOML sections, defaults in parentheses):"]
    for section, keys in CONFIG_SCHEMA.items():
        lines.append(f"  [{section}]")
        for key, (default, unit, text) in keys.items():
            lines.append(f"    {key} = {default!r}  [{unit}]  {text}")
    return "\n".join(lines)


def _defaulted(raw: dict) -> dict:
    out = {}
    for section, keys in CONFIG_SCHEMA.items():
        given = raw.get(section, {})
        if not isinstance(given, dict):
            raise ConfigError(f"section [{section}] must be a table")
        for key in given:
            if key not in keys:
                raise ConfigError(f"unknown key '{section}.{key}'")
        out[section] = {k: given.get(k, spec[0]) for k, spec in keys.items()}
    for section in raw:
        if section not in CONFIG_SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
    return out


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated, fully defaulted experiment settings."""

    content: dict

    @classmethod
    def from_file(cls, path: str | Path) -> "ExperimentConfig":
        path = Path(path)
        try:
            with open(path, "rb") as f:
                raw = tomllib.load(f)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}")
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(f"{path}: {e}")
        return cls.from_dict(raw)

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        return cls(content=_defaulted(raw))

    def __getitem__(self, section: str) -> dict:
        return self.content[section]

    @property
    def hash(self) -> str:
        # worker count cannot change results, so it is not part of the identity
        content = {
            section: {k: v for k, v in keys.items() if (section, k) != ("experiment", "threads")}
            for section, keys in self.content.items()
        }
        canonical = json.dumps(content, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()[:12]

    @property
    def seed(self) -> int:
        return int(self["experiment"]["seed"])

    @property
    def threads(self) -> int:
        return int(self["experiment"]["threads"])

    def channel_taps(self) -> np.ndarray:
        taps = self["channel"]["taps"]
        if taps:
            h = np.asarray(taps, dtype=float)
            if h.ndim != 1 or not np.any(h):
                raise ConfigError("channel.taps must be a nonzero 1-D list")
            return h
        name = self["channel"]["name"]
        if name not in NAMED_CHANNELS:
            raise ConfigError(f"channel.name must be one of {sorted(NAMED_CHANNELS)}")
        return NAMED_CHANNELS[name]

    def awgn_spec(self) -> AwgnSpec:
        return AwgnSpec(
            n0=float(self["channel"]["n0_a2_per_hz"]),
            bandwidth=float(self["channel"]["bandwidth_hz"]),
        )

    def room(self) -> RoomGeometry:
        return default_room(
            total_electrical_power=float(self["power"]["total_electrical_w"]),
            semi_angle=np.radians(float(self["room"]["semi_angle_deg"])),
            grid_step=float(self["room"]["grid_step_m"]),
        )

    def receiver(self) -> ReceiverSpec:
        r = self["receiver"]
        return ReceiverSpec(
            area=float(r["area_m2"]),
            fov=np.radians(float(r["fov_deg"])),
            responsivity=float(r["responsivity_a_per_w"]),
            height=float(r["height_m"]),
        )

    def qct_config(self) -> md.QctConfig:
        m = self["modem"]
        return md.QctConfig(
            n=int(m["n"]),
            cp_len=int(m["cp_len"]),
            bias_db=float(m["bias_db"]),
            pam=md.PamConstellation.from_order(int(m["pam_order"])),
        )

    def ofdm_config(self) -> md.OfdmConfig:
        m = self["modem"]
        return md.OfdmConfig(
            n=int(m["n"]),
            cp_len=int(m["cp_len"]),
            bias_db=float(m["bias_db"]),
            constellation=md.QamConstellation.from_order(int(m["qam_order"])),
        )

    def csk_bands(self) -> tuple[tuple[float, float], ...]:
        lows = self["csk"]["band_lower_nm"]
        highs = self["csk"]["band_upper_nm"]
        if len(lows) != 4 or len(highs) != 4:
            raise ConfigError("csk bands need exactly four lower and upper bounds")
        return tuple((float(lo), float(hi)) for lo, hi in zip(lows, highs))

    def csk_config(self) -> md.CskConfig:
        from .photometry import CHANNEL_ORDER, LED_CHANNELS, h_model_spd

        spds = tuple(h_model_spd(LED_CHANNELS[c]) for c in CHANNEL_ORDER)
        k = md.crosstalk_matrix(spds, self.csk_bands())
        per_led = float(self["power"]["total_electrical_w"]) / 36.0
        return md.CskConfig(crosstalk=k, avg_power=per_led)

    def papr_thresholds(self) -> list[float]:
        p = self["papr"]
        lo, hi, step = (
            float(p["threshold_min_db"]),
            float(p["threshold_max_db"]),
            float(p["threshold_step_db"]),
        )
        if step <= 0 or hi <= lo:
            raise ConfigError("papr thresholds need threshold_max > threshold_min and step > 0")
        count = int(round((hi - lo) / step)) + 1
        return [round(lo + i * step, 9) for i in range(count)]


def paper_defaults_path() -> Path:
    """The shipped reference configuration for the default evaluation scenario."""
    return Path(__file__).parent / "data" / "paper_defaults.toml"
