"""Command-line front end: runs, sweeps, verification, and channel probes.

Subcommands:
  run            one training run -> trace.csv + summary.json
  sweep          Cartesian sweep over alpha / c / policy / UAV count / seed
  verify         the built-in oracle suite, pass/fail table, exit 3 on failure
  diagnose       diagnostics-enabled run -> bounds.csv with per-round estimates
  channel-probe  print link gains and rates at a given distance

Exit codes: 0 success, 1 validation error, 2 runtime error, 3 verify failures.
"""

from __future__ import annotations

import argparse
import itertools
import json
import math
import sys
from pathlib import Path

from . import verify as verify_mod
from .channel import d2u_gain, dbm_to_watt, link_rate, u2u_gain
from .config import (
    SCHEDULER_POLICIES,
    ScenarioConfig,
    default_config,
    load_config,
    to_dict,
    with_overrides,
)
from .errors import ValidationError
from .federation import TrainingResult, run_training

TRACE_VERSION = 1

TRACE_COLUMNS = [
    "round",
    "policy",
    "alpha",
    "c",
    "seed",
    "mean_test_accuracy",
    "t_local",
    "t_upload",
    "t_agg",
    "t_u2u",
    "t_broadcast",
    "t_hover",
    "e_hover",
    "e_agg",
    "e_u2u",
    "e_broadcast",
    "e_round",
    "cumulative_energy",
    "n_selected",
    "designated_uav",
    "beta_sel_hat",
    "v_theta_hat",
]

BOUNDS_COLUMNS = [
    "round",
    "n_selected",
    "beta_sel_hat",
    "sigma_theta_hat",
    "samp_var_hat",
    "v_theta_hat",
    "grad_norm_sq",
    "tracking_err_mean",
    "tracking_err_max",
]


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return "" if math.isnan(value) else repr(value)
    return str(value)


def trace_rows(result: TrainingResult):
    cfg = result.cfg
    for rec in result.records:
        led = rec.ledger
        est = rec.estimates
        yield [
            rec.round_index,
            rec.policy,
            cfg.alpha,
            cfg.heterogeneity_c,
            cfg.seed,
            rec.mean_accuracy,
            led.t_local,
            led.t_upload,
            led.t_agg,
            led.t_u2u,
            led.t_broadcast,
            led.t_hover,
            led.e_hover,
            float(led.e_agg.sum()),
            float(led.e_u2u.sum()),
            float(led.e_broadcast.sum()),
            led.e_round,
            led.cumulative_energy,
            len(rec.selected),
            rec.designated_uav,
            est.beta_sel_hat if est else None,
            est.v_theta_hat if est else None,
        ]


def write_trace(result: TrainingResult, path: Path) -> None:
    lines = [",".join(TRACE_COLUMNS)]
    for row in trace_rows(result):
        lines.append(",".join(_cell(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def write_bounds(result: TrainingResult, path: Path) -> None:
    lines = [",".join(BOUNDS_COLUMNS)]
    for rec in result.records:
        est = rec.estimates
        if est is None:
            continue
        row = [
            est.round_index,
            est.num_selected,
            est.beta_sel_hat,
            est.sigma_theta_hat,
            est.samp_var_hat,
            est.v_theta_hat,
            est.grad_norm_sq,
            est.tracking_err_mean,
            est.tracking_err_max,
        ]
        lines.append(",".join(_cell(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def summary_dict(result: TrainingResult) -> dict:
    accs = [a for _, a in result.accuracy_series]
    return {
        "trace_version": TRACE_VERSION,
        "rounds_executed": len(result.records),
        "stop_reason": result.stop_reason,
        "final_accuracy": accs[-1] if accs else None,
        "max_accuracy": max(accs) if accs else None,
        "total_energy_j": result.total_energy,
        "config": to_dict(result.cfg),
    }


def write_summary(result: TrainingResult, path: Path) -> None:
    path.write_text(json.dumps(summary_dict(result), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _load_base_config(args) -> ScenarioConfig:
    cfg = load_config(args.config) if args.config else default_config()
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "policy", None) is not None:
        overrides["scheduler_policy"] = args.policy
    if getattr(args, "alpha", None) is not None:
        overrides["alpha"] = args.alpha
    if getattr(args, "placement", None) is not None:
        overrides["placement_mode"] = {"grid": "grid-lines", "ppp": "ppp"}[args.placement]
    if getattr(args, "mobile", None) is not None:
        overrides["mobile_devices"] = args.mobile == "on"
    return with_overrides(cfg, **overrides) if overrides else cfg


def _run_to_dir(cfg: ScenarioConfig, out: Path, diagnostics: bool = False, tracking: bool = False) -> TrainingResult:
    result = run_training(cfg, collect_diagnostics=diagnostics, include_tracking=tracking)
    out.mkdir(parents=True, exist_ok=True)
    write_trace(result, out / "trace.csv")
    write_summary(result, out / "summary.json")
    if diagnostics:
        write_bounds(result, out / "bounds.csv")
    return result


def cmd_run(args) -> int:
    cfg = _load_base_config(args)
    out = Path(args.out)
    result = _run_to_dir(cfg, out, diagnostics=args.diagnostics)
    s = summary_dict(result)
    print(
        f"{len(result.records)} rounds ({result.stop_reason}), "
        f"final accuracy {s['final_accuracy']}, total energy {s['total_energy_j']:.1f} J -> {out}"
    )
    return 0


def _parse_axis(text: str, cast):
    return [cast(v) for v in text.split(",") if v != ""]


def cmd_sweep(args) -> int:
    base = _load_base_config(args)
    axes = {}
    if args.alphas:
        axes["alpha"] = _parse_axis(args.alphas, float)
    if args.cs:
        axes["heterogeneity_c"] = _parse_axis(args.cs, int)
    if args.policies:
        axes["scheduler_policy"] = _parse_axis(args.policies, str)
    if args.uavs:
        axes["num_uavs"] = _parse_axis(args.uavs, int)
    if args.seeds:
        axes["seed"] = _parse_axis(args.seeds, int)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    names = list(axes)
    combos = list(itertools.product(*axes.values())) if axes else [()]
    index = []
    short = {"alpha": "alpha", "heterogeneity_c": "c", "scheduler_policy": "policy", "num_uavs": "uavs", "seed": "seed"}
    for combo in combos:
        params = dict(zip(names, combo))
        cell_id = "__".join(f"{short[k]}-{params[k]}" for k in names) if params else "base"
        cfg = with_overrides(base, **params)
        result = _run_to_dir(cfg, out / cell_id)
        index.append(
            {
                "cell": cell_id,
                "params": params,
                "trace": f"{cell_id}/trace.csv",
                "summary": f"{cell_id}/summary.json",
                "rounds": len(result.records),
                "stop_reason": result.stop_reason,
            }
        )
        print(f"[{cell_id}] {len(result.records)} rounds ({result.stop_reason})")
    (out / "index.json").write_text(json.dumps({"cells": index}, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return 0


def cmd_verify(args) -> int:
    results = verify_mod.run_all_checks()
    width = max(len(r.name) for r in results)
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"{r.name:<{width}}  {status}  [{r.tolerance}]  {r.detail}")
    return 0 if all(r.passed for r in results) else 3


def cmd_diagnose(args) -> int:
    cfg = _load_base_config(args)
    out = Path(args.out)
    result = _run_to_dir(cfg, out, diagnostics=True, tracking=args.tracking)
    print(f"{len(result.records)} rounds ({result.stop_reason}), bound estimates -> {out / 'bounds.csv'}")
    return 0


def cmd_channel_probe(args) -> int:
    cfg = _load_base_config(args)
    d = args.distance
    print(f"distance: {d} m (UAV altitude {cfg.uav_altitude_m} m)")
    if d >= cfg.uav_altitude_m:
        g = d2u_gain(d, cfg)
        rate = link_rate(dbm_to_watt(cfg.device_tx_power_dbm), g, cfg.bandwidth_hz, cfg)
        print(f"device->UAV gain: {g.gain_db:.3f} dB ({g.gain_linear:.6e})")
        print(f"device->UAV rate at full bandwidth: {rate:.4e} bit/s")
    else:
        print("device->UAV gain: n/a (distance below hover altitude)")
    gu = u2u_gain(d, cfg)
    rate_u = link_rate(cfg.uav_tx_power_w, gu, cfg.bandwidth_hz, cfg)
    print(f"UAV->UAV gain: {gu.gain_db:.3f} dB ({gu.gain_linear:.6e})")
    print(f"UAV->UAV rate at full bandwidth: {rate_u:.4e} bit/s")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uavfed", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, with_out=True):
        p.add_argument("--config", help="JSON config file; omitted keys take defaults")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--policy", choices=SCHEDULER_POLICIES, help="override the scheduling policy")
        p.add_argument("--alpha", type=float, help="override the selection fraction")
        p.add_argument("--placement", choices=["grid", "ppp"], help="device placement mode")
        p.add_argument("--mobile", choices=["on", "off"], help="per-round device re-sampling")
        if with_out:
            p.add_argument("--out", default="out/run", help="output directory")

    p_run = sub.add_parser("run", help="single training run")
    add_common(p_run)
    p_run.add_argument("--diagnostics", action="store_true", help="collect per-round bound estimates")
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="Cartesian sweep; one trace per cell")
    add_common(p_sweep)
    p_sweep.add_argument("--alphas", help="comma list of selection fractions")
    p_sweep.add_argument("--cs", help="comma list of per-device class counts")
    p_sweep.add_argument("--policies", help="comma list of scheduling policies")
    p_sweep.add_argument("--uavs", help="comma list of fleet sizes")
    p_sweep.add_argument("--seeds", help="comma list of seeds")
    p_sweep.set_defaults(func=cmd_sweep)

    p_verify = sub.add_parser("verify", help="run the oracle suite")
    p_verify.set_defaults(func=cmd_verify)

    p_diag = sub.add_parser("diagnose", help="diagnostics-enabled run")
    add_common(p_diag)
    p_diag.add_argument("--tracking", action="store_true", help="also estimate head tracking error")
    p_diag.set_defaults(func=cmd_diagnose)

    p_probe = sub.add_parser("channel-probe", help="print gains/rates at a distance")
    add_common(p_probe, with_out=False)
    p_probe.add_argument("--distance", type=float, required=True, help="link distance in meters")
    p_probe.set_defaults(func=cmd_channel_probe)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
