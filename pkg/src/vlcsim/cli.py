"""Command-line front end: `vlcsim validate` and `vlcsim run <config> <experiment>`.

Experiments write RFC-4180 CSV files plus a JSON summary, named
`<experiment>_<scheme>_<confighash>.csv`, and echo headline statistics to
stdout.  Identical config and seed produce byte-identical outputs at any
worker count.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import experiments as ex
from . import modems as md
from . import photometry as ph
from .config import ConfigError, ExperimentConfig, paper_defaults_path, schema_help
from .channel import NAMED_CHANNELS, propagate_extended
from .spectral import build_qct_family

EXPERIMENTS = ("ber", "papr", "roommap", "illum")


# ---------------------------------------------------------------- validation

def _check_cmf_data():
    cmf = ph.load_cmf()
    if cmf.shape != (401, 3):
        raise AssertionError(f"CMF table has shape {cmf.shape}")
    peak = ph.GRID[int(np.argmax(cmf[:, 1]))]
    if peak != 555.0 or abs(cmf[:, 1].max() - 1.0) > 1e-9:
        raise AssertionError(f"V(lambda) peak {cmf[:, 1].max():.4f} at {peak} nm, expected 1 at 555")
    return "CIE color matching functions load, V peaks at 555 nm"


def _check_tcs_data():
    tcs = ph.load_tcs()
    if tcs.shape != (401, 14):
        raise AssertionError(f"TCS table has shape {tcs.shape}")
    if np.any(tcs <= 0) or np.any(tcs >= 1):
        raise AssertionError("reflectances must lie strictly inside (0, 1)")
    return "14 test-color samples load"


def _check_transform_orthogonality():
    fam = build_qct_family(64)
    stacked = np.hstack(fam.matrices)
    err = np.max(np.abs(stacked.T @ stacked - np.eye(64)))
    if err > 1e-10:
        raise AssertionError(f"concatenated blocks deviate from orthogonality by {err:.2e}")
    return f"orthogonality defect {err:.1e}"


def _check_transform_diagonalization(perturb: bool = False):
    fam = build_qct_family(64)
    matrices = [m.copy() for m in fam.matrices]
    if perturb:
        matrices[0][0, 0] += 1e-3
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(25):
        h = rng.normal(size=rng.integers(1, 9))
        if not np.any(h):
            continue
        c = np.zeros(64)
        c[: len(h)] = h
        cmat = np.column_stack([np.roll(c, s) for s in range(64)])
        gram = cmat.T @ cmat
        for v in range(4):
            for u in range(4):
                block = matrices[v].T @ gram @ matrices[u]
                if v == u:
                    block = block - np.diag(np.diag(block))
                worst = max(worst, float(np.max(np.abs(block))))
    if worst > 1e-9:
        raise AssertionError(f"off-diagonal leakage {worst:.2e} exceeds 1e-9")
    return f"worst leakage {worst:.1e} over 25 random channels"


def _check_loopback_qct():
    cfg = md.QctConfig(n=64, cp_len=4, bias_db=13.0)
    h = NAMED_CHANNELS["threetap"]
    rng = np.random.default_rng(1)
    bits = rng.integers(0, 2, cfg.bits_per_frame * 20)
    rx = propagate_extended(md.qct_modulate(bits, cfg).sum(axis=0), h)
    if not np.array_equal(md.qct_demodulate(rx, h, cfg), bits):
        raise AssertionError("noiseless three-tap loopback lost bits")
    return f"{bits.size} bits exact over the three-tap channel"


def _check_loopback_ofdm():
    cfg = md.OfdmConfig(n=64, cp_len=4, bias_db=13.0)
    h = NAMED_CHANNELS["threetap"]
    rng = np.random.default_rng(2)
    bits = rng.integers(0, 2, cfg.bits_per_frame * 20)
    rx = propagate_extended(md.dco_ofdm_modulate(bits, cfg), h)
    if not np.array_equal(md.dco_ofdm_demodulate(rx, h, cfg), bits):
        raise AssertionError("noiseless three-tap loopback lost bits")
    return f"{bits.size} bits exact over the three-tap channel"


def _check_loopback_csk():
    cfg = md.CskConfig()
    rng = np.random.default_rng(3)
    bits = rng.integers(0, 2, 5000 * cfg.bits_per_symbol)
    rx = md.csk_modulate(bits, cfg) @ cfg.crosstalk.T
    if not np.array_equal(md.csk_demodulate(rx, cfg), bits):
        raise AssertionError("noiseless crosstalk loopback lost bits")
    return f"{bits.size} bits exact through the filter-bank crosstalk"


def _check_cct_round_trip():
    for t in (2500.0, 3500.0, 5000.0):
        got = ph.cct(ph.planckian_spd(t)).kelvin
        if abs(got - t) / t > 0.005:
            raise AssertionError(f"cct(planckian {t}) = {got}")
    return "round trip within 0.5% at 2500/3500/5000 K"


def _check_cri_planckian():
    ra = ph.cri(ph.planckian_spd(3500.0)).general
    if abs(ra - 100.0) > 0.5:
        raise AssertionError(f"Planckian CRI {ra:.2f} differs from 100")
    return f"Planckian radiator scores {ra:.2f}"


def _check_illuminant_a():
    x, y = ph.chromaticity(ph.tristimulus(ph.planckian_spd(2856.0)))
    if abs(x - 0.4476) > 0.002 or abs(y - 0.4074) > 0.002:
        raise AssertionError(f"Illuminant A chromaticity ({x:.4f}, {y:.4f})")
    return f"Illuminant A at ({x:.4f}, {y:.4f})"


def _check_white_point():
    spd = ph.white_mix_spd()
    cct = ph.cct(spd)
    ra = ph.cri(spd).general
    if not 3350 <= cct.kelvin <= 3650:
        raise AssertionError(f"white mix CCT {cct.kelvin:.0f} K outside [3350, 3650]")
    if not 77 <= ra <= 83:
        raise AssertionError(f"white mix CRI {ra:.2f} outside [77, 83]")
    return f"white mix at {cct.kelvin:.0f} K, CRI {ra:.1f}"


def cmd_validate(json_output: bool = False, perturb_transform: bool = False) -> int:
    """Run the invariant suite; returns a process exit status."""
    checks = [
        ("data_cmf", _check_cmf_data),
        ("data_tcs", _check_tcs_data),
        ("transform_orthogonality", _check_transform_orthogonality),
        (
            "transform_diagonalization",
            lambda: _check_transform_diagonalization(perturb_transform),
        ),
        ("loopback_qct", _check_loopback_qct),
        ("loopback_dco_ofdm", _check_loopback_ofdm),
        ("loopback_csk", _check_loopback_csk),
        ("cct_round_trip", _check_cct_round_trip),
        ("cri_planckian", _check_cri_planckian),
        ("illuminant_a", _check_illuminant_a),
        ("white_point", _check_white_point),
    ]
    results = []
    for name, fn in checks:
        try:
            detail = fn()
            results.append({"check": name, "ok": True, "detail": detail})
        except Exception as e:  # noqa: BLE001 - each check reports independently
            results.append({"check": name, "ok": False, "detail": str(e)})
    failed = [r for r in results if not r["ok"]]
    if json_output:
        print(json.dumps({"ok": not failed, "checks": results}, indent=2))
    else:
        for r in results:
            print(f"{'ok  ' if r['ok'] else 'FAIL'} {r['check']}: {r['detail']}")
        print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return 1 if failed else 0


# ---------------------------------------------------------------- experiments

def _resolve_config(path_str: str) -> Path:
    path = Path(path_str)
    if path.exists():
        return path
    if path_str in ("paper_defaults", "paper_defaults.toml"):
        return paper_defaults_path()
    raise ConfigError(f"config file not found: {path_str}")


def _run_ber(cfg: ExperimentConfig, out: Path) -> dict:
    taps = cfg.channel_taps()
    ber_cfg = cfg["ber"]
    snr_list = [float(s) for s in ber_cfg["snr_per_bit_db"]]
    curves = {}
    for scheme in ber_cfg["schemes"]:
        modem = {
            "qct": cfg.qct_config,
            "dco_ofdm": cfg.ofdm_config,
            "csk": cfg.csk_config,
        }[scheme]()
        curve = ex.run_ber_sweep(
            scheme,
            modem,
            taps,
            snr_list,
            seed=cfg.seed,
            min_errors=int(ber_cfg["min_errors"]),
            max_bits=int(ber_cfg["max_bits"]),
            threads=cfg.threads,
        )
        curves[scheme] = curve
        ex.write_csv(
            out / f"ber_{scheme}_{cfg.hash}.csv",
            curve.rows(),
            ["snr_per_bit_db", "ber", "bits", "errors", "unreliable"],
        )

    pam_m = int(cfg["modem"]["pam_order"])
    qam_m = int(cfg["modem"]["qam_order"])
    oracle_rows = [
        {
            "snr_per_bit_db": s,
            "pam_ber": ex.analytic_pam_ber(pam_m, s),
            "qam_ber": ex.analytic_qam_ber(qam_m, s),
            "csk4_ideal_ber": ex.analytic_csk4_ber(s),
        }
        for s in snr_list
    ]
    ex.write_csv(
        out / f"ber_analytic_{cfg.hash}.csv",
        oracle_rows,
        ["snr_per_bit_db", "pam_ber", "qam_ber", "csk4_ideal_ber"],
    )

    summary = {"snr_per_bit_db": snr_list}
    for scheme, curve in curves.items():
        summary[scheme] = {"ber": curve.ber, "errors": curve.errors_counted}
    if "qct" in curves and "csk" in curves:
        crossover = None
        for s, bq, bc in zip(snr_list, curves["qct"].ber, curves["csk"].ber):
            if bc < bq:
                crossover = s
                break
        summary["qct_csk_crossover_db"] = crossover
    return summary


def _run_papr(cfg: ExperimentConfig, out: Path) -> dict:
    thresholds = cfg.papr_thresholds()
    papr_cfg = cfg["papr"]
    summary = {}
    for scheme in papr_cfg["schemes"]:
        modem = cfg.qct_config() if scheme.startswith("qct") else cfg.ofdm_config()
        result = ex.run_papr_ccdf(
            scheme,
            modem,
            n_frames=int(papr_cfg["n_frames"]),
            thresholds_db=thresholds,
            seed=cfg.seed,
        )
        ex.write_csv(
            out / f"papr_{scheme}_{cfg.hash}.csv",
            result.rows(),
            ["threshold_db", "ccdf"],
        )
        summary[scheme] = {
            "frames": result.frames_simulated,
            "median_papr_db": float(np.median(result.samples_db)),
            "p999_papr_db": float(np.quantile(result.samples_db, 0.999)),
        }
    return summary


def _run_roommap(cfg: ExperimentConfig, out: Path) -> dict:
    room = cfg.room()
    rx = cfg.receiver()
    kwargs = {
        "qct_cfg": cfg.qct_config(),
        "ofdm_cfg": cfg.ofdm_config(),
        "csk_cfg": cfg.csk_config(),
        "noise": cfg.awgn_spec(),
    }
    maps = {scheme: ex.run_room_maps(room, rx, scheme, **kwargs) for scheme in ("qct", "csk")}
    reference = maps["qct"][0].vmax
    summary = {}
    for scheme, (lux, snr) in maps.items():
        rows = (
            {
                "x_m": r["x_m"],
                "y_m": r["y_m"],
                "lux": r["value"],
                "lux_normalized": r["normalized"],
                "snr_db": snr.values[int(round(r["x_m"] / lux.grid_step)), int(round(r["y_m"] / lux.grid_step))],
            }
            for r in ex.heatmap_rows(lux, reference)
        )
        ex.write_csv(
            out / f"roommap_{scheme}_{cfg.hash}.csv",
            rows,
            ["x_m", "y_m", "lux", "lux_normalized", "snr_db"],
        )
        summary[scheme] = {
            "mean_normalized_lux": lux.mean / reference,
            "snr_db_mean": snr.mean,
            "snr_db_min": snr.vmin,
            "snr_db_max": snr.vmax,
            "snr_db_spread": snr.vmax - snr.vmin,
        }
    summary["lux_ratio_qct_over_csk"] = (
        summary["qct"]["mean_normalized_lux"] / summary["csk"]["mean_normalized_lux"]
    )
    summary["snr_gap_qct_minus_csk_db"] = (
        summary["qct"]["snr_db_mean"] - summary["csk"]["snr_db_mean"]
    )
    return summary


def _run_illum(cfg: ExperimentConfig, out: Path) -> dict:
    report = ex.run_illumination_report(
        cfg.room(),
        cfg.receiver(),
        qct_cfg=cfg.qct_config(),
        ofdm_cfg=cfg.ofdm_config(),
        csk_cfg=cfg.csk_config(),
        seed=cfg.seed,
    )
    ex.write_csv(
        out / f"illum_report_{cfg.hash}.csv",
        report.rows(),
        ["scheme", "cri", "cct_kelvin", "duv", "mean_normalized_lux", "clipped_fraction"],
    )
    return {"schemes": report.schemes, "notes": report.notes}


_RUNNERS = {"ber": _run_ber, "papr": _run_papr, "roommap": _run_roommap, "illum": _run_illum}


def cmd_run(
    config_path: str,
    experiment: str,
    *,
    seed: int | None = None,
    out_dir: str | None = None,
    threads: int | None = None,
) -> int:
    """Execute one named experiment from a config file; returns exit status."""
    try:
        cfg = ExperimentConfig.from_file(_resolve_config(config_path))
        if seed is not None or threads is not None:
            content = json.loads(json.dumps(cfg.content))
            if seed is not None:
                content["experiment"]["seed"] = int(seed)
            if threads is not None:
                content["experiment"]["threads"] = int(threads)
            cfg = ExperimentConfig(content=content)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    if experiment not in _RUNNERS:
        print(f"unknown experiment {experiment!r}; choose from {EXPERIMENTS}", file=sys.stderr)
        return 2
    out = Path(out_dir) if out_dir else Path("results")
    try:
        summary = _RUNNERS[experiment](cfg, out)
    except Exception as e:  # noqa: BLE001 - runtime failures exit 1 per contract
        print(f"runtime failure: {e}", file=sys.stderr)
        return 1
    payload = {
        "experiment": experiment,
        "config_hash": cfg.hash,
        "seed": cfg.seed,
        "summary": summary,
    }
    ex.write_json(out / f"{experiment}_summary_{cfg.hash}.json", payload)
    print(json.dumps(payload, indent=2, sort_keys=True))
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="vlcsim",
        description="Link-level simulator for filterless multi-color LED visible-light communication.",
        epilog=schema_help(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_val = sub.add_parser("validate", help="run the invariant suite")
    p_val.add_argument("--json", action="store_true", help="machine-readable output")

    p_run = sub.add_parser(
        "run",
        help="run an experiment from a config file",
        epilog=schema_help(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    p_run.add_argument("config", help="TOML config path (or 'paper_defaults')")
    p_run.add_argument("experiment", choices=EXPERIMENTS)
    p_run.add_argument("--seed", type=int, default=None, help="override experiment.seed")
    p_run.add_argument("--out", default=None, help="output directory (default: results)")
    p_run.add_argument("--threads", type=int, default=None, help="override experiment.threads")

    args = parser.parse_args(argv)
    if args.command == "validate":
        return cmd_validate(json_output=args.json)
    return cmd_run(
        args.config,
        args.experiment,
        seed=args.seed,
        out_dir=args.out,
        threads=args.threads,
    )


if __name__ == "__main__":
    sys.exit(main())
