"""Command line entry points.

Four verbs:

    run     one policy on one route under one setting
    sweep   a grid of policies x settings x routes with report files
    report  regenerate report files from stored run records
    verify  self-checks of the perturbation and latency machinery

Exit codes: 0 success, 1 internal error or failed verification, 2 usage
error. A run that merely fails to drive the route well still exits 0; the
outcome lives in the printed summary and the RunRecord.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from loopbench.agents import POLICY_NAMES
from loopbench.config import (
    ENV_VARS,
    effective_latency_ms,
    load_config_file,
    perturbations_from_config,
    resolve_config,
)
from loopbench.harness import (
    CLEAN_SETTING,
    Setting,
    SweepSpec,
    preset_settings,
    record_path,
    report_from_records,
    run_route,
    run_sweep,
    setting_by_label,
)
from loopbench.latency import load_latency_trace, ticks_from_ms
from loopbench.metrics import driving_score
from loopbench.routes import route_by_id
from loopbench.verify import CHECKS, run_checks
from loopbench.world import WorldParams


class UsageError(Exception):
    """Operator mistake: bad name, missing input, contradictory flags."""


def _env_epilog() -> str:
    lines = ["environment variables (win over flags and config file):"]
    width = max(len(name) for name, _ in ENV_VARS)
    for name, desc in ENV_VARS:
        lines.append(f"  {name.ljust(width)}  {desc}")
    return "\n".join(lines)


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", metavar="FILE",
                     help="YAML config file (lowest-priority layer)")
    sub.add_argument("--seed", type=int, default=None)
    sub.add_argument("--rate-hz", type=int, default=None, dest="rate_hz")
    sub.add_argument("--routes-dir", default=None, dest="routes_dir",
                     help="route YAML directory (bundled suite by default)")


def _add_setting_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--setting", default=None,
                     help="preset setting label (overrides the knobs below)")
    sub.add_argument("--burst-ticks", type=int, default=None,
                     dest="burst_ticks")
    sub.add_argument("--burst-probability", type=float, default=None,
                     dest="burst_probability")
    sub.add_argument("--mask-ratio", type=float, default=None,
                     dest="mask_ratio")
    sub.add_argument("--mask-fill", type=float, default=None,
                     dest="mask_fill")
    sub.add_argument("--gps-std", type=float, default=None, dest="gps_std")
    sub.add_argument("--speed-mu", type=float, default=None, dest="speed_mu")
    sub.add_argument("--speed-std", type=float, default=None,
                     dest="speed_std")
    sub.add_argument("--latency-ms", type=float, default=None,
                     dest="latency_ms")
    sub.add_argument("--latency-mode", choices=("fixed", "realtime"),
                     default=None, dest="latency_mode")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="loopbench",
        description="Closed-loop robustness harness for driving policies.",
        epilog=_env_epilog(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    subs = parser.add_subparsers(dest="verb", required=True)

    run_p = subs.add_parser(
        "run", help="run one policy on one route",
        epilog=_env_epilog(),
        formatter_class=argparse.RawDescriptionHelpFormatter)
    run_p.add_argument("--policy", default="full-pursuit",
                       help=f"one of: {', '.join(POLICY_NAMES)}")
    run_p.add_argument("--route", required=True, help="route id")
    _add_common(run_p)
    _add_setting_flags(run_p)
    run_p.add_argument("--latency-trace", default=None, dest="latency_trace",
                       help="per-tick measured latency file (realtime mode)")
    run_p.add_argument("--out", default=None, help="RunRecord output path")
    run_p.add_argument("--rasters", action="store_true",
                       help="embed perturbed camera rasters in the record")
    run_p.add_argument("--n-camera-streams", type=int, default=None,
                       dest="n_camera_streams")
    run_p.set_defaults(func=cmd_run)

    sweep_p = subs.add_parser(
        "sweep", help="run a policy x setting x route grid",
        epilog=_env_epilog(),
        formatter_class=argparse.RawDescriptionHelpFormatter)
    sweep_p.add_argument("--preset", choices=("paper",), default=None,
                         help="named severity grid")
    sweep_p.add_argument("--settings", default=None,
                         help="comma-separated setting labels; 'none' for "
                              "a baseline-only report")
    sweep_p.add_argument("--policies", default="all",
                         help="comma-separated policy names or 'all'")
    _add_common(sweep_p)
    sweep_p.add_argument("--out", default="runs", help="output root")
    sweep_p.add_argument("--sweep-id", default="sweep", dest="sweep_id")
    sweep_p.add_argument("--resume", action="store_true",
                         help="reuse run records that already have a footer")
    sweep_p.add_argument("--workers", type=int, default=None,
                         help="route-level worker processes")
    sweep_p.add_argument("--n-camera-streams", type=int, default=None,
                         dest="n_camera_streams")
    sweep_p.add_argument("--quiet", action="store_true")
    sweep_p.set_defaults(func=cmd_sweep)

    report_p = subs.add_parser(
        "report", help="rebuild report files from run records")
    report_p.add_argument("--from", dest="from_dir", required=True,
                          help="sweep directory holding the run records")
    report_p.add_argument("--out", default=None,
                          help="where to write report files (default: "
                               "the --from directory)")
    report_p.set_defaults(func=cmd_report)

    verify_p = subs.add_parser(
        "verify", help="self-check perturbation and latency machinery")
    verify_p.add_argument("--check", action="append", default=None,
                          help="run only this check (repeatable)")
    verify_p.add_argument("--inject-fault", default=None, dest="inject_fault",
                          help="test-only: force the named check to fail")
    verify_p.add_argument("--list", action="store_true", dest="list_checks",
                          help="list available checks and exit")
    verify_p.set_defaults(func=cmd_verify)
    return parser


def _flags_dict(args, keys) -> dict:
    return {k: getattr(args, k, None) for k in keys
            if getattr(args, k, None) is not None}


_SETTING_KEYS = ("seed", "rate_hz", "routes_dir", "burst_ticks",
                 "burst_probability", "mask_ratio", "mask_fill", "gps_std",
                 "speed_mu", "speed_std", "latency_ms", "latency_mode")


def _resolve(args, extra_keys=()) -> "RunConfig":
    file_cfg = load_config_file(args.config) if args.config else None
    flags = _flags_dict(args, _SETTING_KEYS + tuple(extra_keys))
    return resolve_config(file_cfg, flags)


def _gate_setting(setting: Setting, cfg) -> Setting:
    """Apply the enable switches to an explicitly named setting."""
    perturb = setting.perturb if cfg.robustness_enable else None
    latency = setting.latency_ms if cfg.latency_enable else None
    if perturb is not setting.perturb or latency != setting.latency_ms:
        print(f"note: enable switches reduced setting "
              f"{setting.label!r}", file=sys.stderr)
        return Setting(label=setting.label, perturb=perturb,
                       latency_ms=latency,
                       latency_mode=setting.latency_mode)
    return setting


def _custom_setting(cfg) -> Setting:
    perturb = perturbations_from_config(cfg)
    latency = effective_latency_ms(cfg)
    if not perturb and latency is None:
        return CLEAN_SETTING
    return Setting(
        label="custom",
        perturb=perturb if perturb else None,
        latency_ms=latency,
        latency_mode=cfg.latency_mode,
    )


def cmd_run(args) -> int:
    cfg = _resolve(args, extra_keys=("n_camera_streams",))
    try:
        route = route_by_id(args.route, cfg.routes_dir, rate_hz=cfg.rate_hz)
    except (KeyError, FileNotFoundError):
        raise UsageError(f"unknown route id: {args.route!r}")
    if args.policy not in POLICY_NAMES:
        raise UsageError(f"unknown policy: {args.policy!r}")

    if args.setting is not None:
        try:
            setting = setting_by_label(args.setting)
        except KeyError:
            raise UsageError(f"unknown setting label: {args.setting!r}")
        setting = _gate_setting(setting, cfg)
    else:
        setting = _custom_setting(cfg)

    params = WorldParams(rate_hz=cfg.rate_hz)
    trace = None
    if args.latency_trace is not None:
        trace = load_latency_trace(args.latency_trace)
    out_path = args.out
    if out_path is None and cfg.out_dir is not None:
        out_path = record_path(cfg.out_dir, "run", args.policy,
                               setting.label, route.route_id)
    overrides = dict(cfg.policy_overrides.get(args.policy, {}))
    result = run_route(
        args.policy, route, setting, cfg.seed, params=params,
        out_path=out_path, n_camera_streams=cfg.n_camera_streams,
        latency_trace=trace, log_rasters=args.rasters,
        policy_overrides=overrides)

    counts = result.infraction_counts()
    infr = ",".join(f"{k}:{v}" for k, v in sorted(counts.items())) or "none"
    delay = (ticks_from_ms(setting.latency_ms, cfg.rate_hz)
             if setting.latency_ms is not None else 0)
    print(f"{route.route_id} {args.policy} {setting.label} | "
          f"outcome={result.outcome} finish={result.finish_reason} "
          f"completion={result.completion:.3f} "
          f"ds={driving_score(result):.2f} infractions={infr} "
          f"ticks={result.ticks_used}/{result.time_budget} "
          f"delay_ticks={delay}")
    if result.diagnostic:
        print(f"diagnostic: {result.diagnostic}", file=sys.stderr)
    if out_path is not None:
        print(f"record: {out_path}")
    return 0


def _sweep_settings(args, cfg) -> list[Setting]:
    if args.preset is not None and args.settings is not None:
        raise UsageError("--preset and --settings are mutually exclusive")
    if args.settings is not None:
        labels = [s.strip() for s in args.settings.split(",") if s.strip()]
        if not labels:
            raise UsageError("--settings given but empty")
        out = []
        for label in labels:
            try:
                out.append(setting_by_label(label))
            except KeyError:
                raise UsageError(f"unknown setting label: {label!r}")
    else:
        out = preset_settings()
    if not cfg.robustness_enable:
        out = [s for s in out if s.perturb is None]
    if not cfg.latency_enable:
        out = [s for s in out if s.latency_ms is None]
    if not any(s.is_clean for s in out):
        out.insert(0, CLEAN_SETTING)
    return out


def cmd_sweep(args) -> int:
    cfg = _resolve(args, extra_keys=("workers", "n_camera_streams"))
    if args.policies.strip() == "all":
        policies = POLICY_NAMES
    else:
        policies = tuple(p.strip() for p in args.policies.split(",")
                         if p.strip())
        unknown = [p for p in policies if p not in POLICY_NAMES]
        if unknown:
            raise UsageError(f"unknown policies: {', '.join(unknown)}")
    if not policies:
        raise UsageError("no policies selected")
    settings = _sweep_settings(args, cfg)

    spec = SweepSpec(
        policies=tuple(policies),
        settings=tuple(settings),
        seed=cfg.seed,
        routes_dir=cfg.routes_dir,
        out_dir=args.out,
        sweep_id=args.sweep_id,
        params=WorldParams(rate_hz=cfg.rate_hz),
        resume=args.resume,
        workers=cfg.workers,
        n_camera_streams=cfg.n_camera_streams,
    )

    def progress(policy, label, results):
        if args.quiet:
            return
        n_ok = sum(1 for r in results if r.outcome == "success")
        mean_ds = sum(driving_score(r) for r in results) / len(results)
        print(f"[{policy}] {label}: ds={mean_ds:.2f} "
              f"success={n_ok}/{len(results)}")

    report = run_sweep(spec, progress=progress)
    out_root = Path(args.out) / args.sweep_id
    if not args.quiet:
        for pr in report.policies:
            agg = pr.aggregates.get("avg_all")
            if agg is not None:
                print(f"{pr.policy}: clean ds={pr.baseline.ds:.2f} "
                      f"avg_all rd={agg.rd:.4f} ds={agg.ds:.2f}")
    print(f"report: {out_root / 'report.csv'}")
    return 0


def cmd_report(args) -> int:
    try:
        report = report_from_records(args.from_dir)
    except FileNotFoundError as exc:
        raise UsageError(str(exc))
    from loopbench.report import write_report_files
    out_dir = Path(args.out) if args.out is not None else Path(args.from_dir)
    paths = write_report_files(report, out_dir)
    for p in paths:
        print(p)
    return 0


def cmd_verify(args) -> int:
    if args.list_checks:
        for name in CHECKS:
            print(name)
        return 0
    names = args.check
    if names is not None:
        unknown = [n for n in names if n not in CHECKS]
        if unknown:
            raise UsageError(f"unknown checks: {', '.join(unknown)}")
    if args.inject_fault is not None and args.inject_fault not in CHECKS:
        raise UsageError(f"unknown check: {args.inject_fault!r}")
    results = run_checks(names, inject_fault=args.inject_fault)
    all_ok = True
    for name, (ok, detail) in results.items():
        tag = "PASS" if ok else "FAIL"
        all_ok = all_ok and ok
        print(f"{tag} {name}: {detail}")
    return 0 if all_ok else 1


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # internal failure: report, exit 1
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
