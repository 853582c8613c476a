"""Command-line surface: window means, convergence detectors, operator checks.

Every run echoes its fully resolved configuration (including the
normalizer convention and horizon) ahead of the results, so an output
file is self-describing.  Verdicts are data and never drive a nonzero
exit status; exit 2 means the configuration was rejected, exit 1 means
a computation failed.

CSV outputs use the columns documented per subcommand in --help.  A
JSON document passed via --config supplies defaults for the same
subcommand's flags (explicit flags win); unknown keys in it are
rejected.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .config import ConfigError, parse_schedule, parse_weights
from .density import DensityConfig, trace_csv
from .detectors import DetectorConfig, st_dndc, st_dnm, st_dnp
from .korovkin import (
    KorovkinConfig,
    Perturbation,
    audit_quadratic_moment,
    function_preset,
    korovkin_check,
    lifted_operator,
    mkz_apply,
)
from .rvmodel import LIMIT, ModelError, abs_moment, cdf, exceedance_prob, model_preset, sample
from .schedules import (
    NormalizerMode,
    ScheduleError,
    WeightError,
    constant_seq,
    identity_seq,
)

__all__ = ["main"]

DEFAULT_SEED = 20260808


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", type=Path, default=None, help="JSON file with flag defaults")
    sub.add_argument(
        "--format", choices=("table", "json", "csv"), default="table", help="output format"
    )
    sub.add_argument("--seed", type=int, default=DEFAULT_SEED, help="seed for sampled checks")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dnstat",
        description="Deferred weighted-window means, convergence detectors, operator checks.",
    )
    parser.add_argument("--version", action="version", version=f"dnstat {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)

    p_mean = subs.add_parser(
        "mean",
        help="window means of a real sequence",
        epilog="CSV columns: m, R_m, t_m",
    )
    p_mean.add_argument("--seq", default=None, help="sequence: identity | const:<c>")
    p_mean.add_argument("--schedule", default="cesaro", help="preset or 'xspec,yspec'")
    p_mean.add_argument("--weights", default="ones", help="preset name")
    p_mean.add_argument("--horizon", type=int, default=10)
    p_mean.add_argument(
        "--mode", choices=("regular", "literal"), default="regular", help="normalizer convention"
    )
    _add_common(p_mean)

    p_detect = subs.add_parser(
        "detect",
        help="convergence-mode detectors for a random-variable model",
        epilog="trace CSV columns: m, R_m, count, d_m",
    )
    p_detect.add_argument("--model", default=None, help="model spec, e.g. example1")
    p_detect.add_argument(
        "--mode", choices=("dnp", "dnm", "dndc", "all"), default="all", help="detector(s) to run"
    )
    p_detect.add_argument("--eps", type=float, default=0.5)
    p_detect.add_argument("--delta", type=float, default=0.5)
    p_detect.add_argument("--r", type=float, default=1.0)
    p_detect.add_argument("--grid", default=None, help="comma-separated evaluation points")
    p_detect.add_argument("--horizon", type=int, default=10_000)
    p_detect.add_argument("--schedule", default=None, help="override the model's schedule")
    p_detect.add_argument("--weights", default=None, help="override the model's weights")
    p_detect.add_argument(
        "--normalizer", choices=("regular", "literal"), default="regular"
    )
    p_detect.add_argument("--trace-out", type=Path, default=None, help="write trace CSV here")
    _add_common(p_detect)

    p_kor = subs.add_parser(
        "korovkin",
        help="three-condition operator check",
        epilog="trace CSV columns: n, then one sup-deviation column per function",
    )
    p_kor.add_argument("--op", choices=("mkz",), default="mkz")
    p_kor.add_argument(
        "--perturb", choices=("none", "nullset", "cdffactor"), default="none"
    )
    p_kor.add_argument("--horizon", type=int, default=200)
    p_kor.add_argument("--grid-size", type=int, default=65)
    p_kor.add_argument("--tail-tol", type=float, default=1e-8)
    p_kor.add_argument("--eps", type=float, default=0.5)
    p_kor.add_argument("--tolerance", type=float, default=0.05)
    p_kor.add_argument("--schedule", default="stretch")
    p_kor.add_argument("--weights", default="ones")
    p_kor.add_argument(
        "--tag", choices=("dnp", "dnm", "dndc"), default="dndc", help="mode provenance tag"
    )
    p_kor.add_argument(
        "--f", action="append", default=None, help="conclusion function (repeatable)"
    )
    p_kor.add_argument("--trace-out", type=Path, default=None)
    _add_common(p_kor)

    p_repro = subs.add_parser(
        "repro", help="run the bundled worked-example reproduction and diff the snapshot"
    )
    p_repro.add_argument("--out", type=Path, default=None, help="also write the report here")
    p_repro.add_argument("--skip-diff", action="store_true", help="do not compare the snapshot")
    _add_common(p_repro)
    return parser


def _merge_config_file(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    """Two-phase parse so --config values act as subcommand defaults."""
    args = parser.parse_args(argv)
    if getattr(args, "config", None) is None:
        return args
    try:
        raw = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config file {args.config}: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config file must hold a JSON object")
    valid = {a for a in vars(args) if a != "config"}
    file_values = {}
    for key, value in raw.items():
        dest = key.replace("-", "_")
        if dest not in valid:
            raise ConfigError(f"unknown keys in config file: ['{key}']")
        file_values[dest] = value
    # Re-parse with the file values as defaults; explicit flags still win.
    sub_map = next(
        a for a in parser._actions if isinstance(a, argparse._SubParsersAction)
    ).choices
    sub_map[args.command].set_defaults(**file_values)
    return parser.parse_args(argv)


def _emit(lines: list[str]) -> None:
    sys.stdout.write("\n".join(lines) + "\n")


def _config_echo(pairs: dict[str, object]) -> list[str]:
    rendered = " ".join(f"{k}={v}" for k, v in pairs.items())
    return [f"# dnstat {__version__}", f"# config {rendered}"]


def _parse_seq(spec: str):
    if spec == "identity":
        return identity_seq
    if spec.startswith("const:"):
        try:
            return constant_seq(float(spec.partition(":")[2]))
        except ValueError:
            raise ConfigError(f"bad constant in sequence spec '{spec}'") from None
    raise ConfigError(f"unknown sequence spec '{spec}'")


def cmd_mean(args: argparse.Namespace) -> int:
    if args.seq is None:
        raise ConfigError("a sequence spec is required (--seq or config file)")
    seq = _parse_seq(args.seq)
    schedule = parse_schedule(args.schedule)
    weights = parse_weights(args.weights)
    if args.horizon < 1:
        raise ConfigError(f"horizon must be >= 1, got {args.horizon}")
    schedule.validate(args.horizon)
    mode = NormalizerMode(args.mode)
    echo = {
        "command": "mean",
        "seq": args.seq,
        "schedule": schedule.label,
        "weights": weights.label,
        "horizon": args.horizon,
        "normalizer_mode": mode.value,
    }

    from .schedules import convolution, dn_mean  # noqa: PLC0415

    rows = []
    for m in range(1, args.horizon + 1):
        r = convolution(schedule, weights, m, mode)
        rows.append((m, r, dn_mean(seq, schedule, weights, m, mode)))

    if args.format == "json":
        payload = {
            "version": __version__,
            "config": echo,
            "rows": [[m, r, t] for m, r, t in rows],
        }
        print(json.dumps(payload, sort_keys=True))
    elif args.format == "csv":
        lines = _config_echo(echo) + ["m,R_m,t_m"]
        lines += [f"{m},{r!r},{t!r}" for m, r, t in rows]
        _emit(lines)
    else:
        lines = _config_echo(echo) + [f"{'m':>6} {'R_m':>14} t_m"]
        lines += [f"{m:>6} {r!r:>14} {t!r}" for m, r, t in rows]
        _emit(lines)
    return 0


def _detector_runs(args: argparse.Namespace):
    if args.model is None:
        raise ConfigError("a model spec is required (--model or config file)")
    bundle = model_preset(args.model)
    model = bundle.model
    schedule = parse_schedule(args.schedule) if args.schedule else bundle.schedule
    weights = parse_weights(args.weights) if args.weights else bundle.weights
    grid = None
    if args.grid:
        try:
            grid = tuple(float(t) for t in str(args.grid).split(","))
        except ValueError:
            raise ConfigError(f"bad grid spec '{args.grid}'") from None
    density = DensityConfig(horizon=args.horizon, mode=NormalizerMode(args.normalizer))
    cfg = DetectorConfig(eps=args.eps, delta=args.delta, r=args.r, grid=grid, density=density)
    runs = {}
    wanted = ("dnp", "dnm", "dndc") if args.mode == "all" else (args.mode,)
    for kind in wanted:
        fn = {"dnp": st_dnp, "dnm": st_dnm, "dndc": st_dndc}[kind]
        runs[kind] = fn(model, schedule, weights, cfg)
    return model, schedule, weights, cfg, runs


def cmd_detect(args: argparse.Namespace) -> int:
    model, schedule, weights, cfg, runs = _detector_runs(args)
    echo = {
        "command": "detect",
        "model": model.description,
        "schedule": schedule.label,
        "weights": weights.label,
        "eps": cfg.eps,
        "delta": cfg.delta,
        "r": cfg.r,
        "horizon": cfg.density.horizon,
        "normalizer_mode": cfg.density.mode.value,
        "seed": args.seed,
    }
    if args.trace_out is not None:
        first = next(iter(runs.values()))
        Path(args.trace_out).write_text(trace_csv(first))

    if args.format == "json":
        payload = {
            "version": __version__,
            "config": echo,
            "results": {k: v.summary() for k, v in runs.items()},
        }
        print(json.dumps(payload, sort_keys=True))
    elif args.format == "csv":
        lines = _config_echo(echo) + ["detector,verdict,tail_max"]
        lines += [f"{k},{v.verdict.value},{v.tail_max!r}" for k, v in runs.items()]
        _emit(lines)
    else:
        lines = _config_echo(echo)
        for kind, verdict in runs.items():
            word = verdict.verdict.value.capitalize()
            lines.append(f"{kind}: {word} (tail_max={verdict.tail_max!r})")
        _emit(lines)
    return 0


def cmd_korovkin(args: argparse.Namespace) -> int:
    schedule = parse_schedule(args.schedule)
    weights = parse_weights(args.weights)
    f_specs = args.f if args.f else ["y^3"]
    try:
        f_list = [function_preset(s) for s in f_specs]
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if args.grid_size < 2:
        raise ConfigError("grid size must be at least 2")
    cfg = KorovkinConfig(
        horizon=args.horizon,
        eps=args.eps,
        grid_points=args.grid_size,
        tail_tol=args.tail_tol,
        tolerance=args.tolerance,
    )
    ops = lifted_operator(Perturbation(args.perturb), args.tail_tol)
    report = korovkin_check(ops, args.tag, f_list, schedule, weights, cfg)
    echo = {
        "command": "korovkin",
        "operator": report.operator,
        "schedule": schedule.label,
        "weights": weights.label,
        "horizon": cfg.horizon,
        "grid_points": cfg.grid_points,
        "tail_tol": cfg.tail_tol,
        "eps": cfg.eps,
        "tolerance": cfg.tolerance,
        "mode_tag": report.mode_tag,
        "normalizer_mode": cfg.mode.value,
    }
    if args.trace_out is not None:
        labels = list(report.conditions) + list(report.conclusions)
        traces = [report.sup_trace(label) for label in labels]
        rows = ["n," + ",".join(labels)]
        for n in range(len(traces[0])):
            rows.append(f"{n + 1}," + ",".join(repr(float(tr[n])) for tr in traces))
        Path(args.trace_out).write_text("\n".join(rows) + "\n")

    if args.format == "json":
        payload = {"version": __version__, "config": echo, "report": report.to_json_dict()}
        print(json.dumps(payload, sort_keys=True))
    else:
        lines = _config_echo(echo) + [report.table()]
        lines += [f"note: {note}" for note in report.notes]
        _emit(lines)
    return 0


# ---------------------------------------------------------------------------
# repro


def _repro_report(seed: int) -> list[str]:
    lines = [f"# dnstat {__version__}"]
    lines.append(
        f"# config command=repro seed={seed} horizon=10000 operator_horizon=200 "
        f"normalizer_mode=regular"
    )

    bundle1 = model_preset("example1")
    lines.append("== sequence model example1 (deferred window, unit weights) ==")
    lines.append(f"exceedance_prob(m=16, eps=0.5) = {exceedance_prob(bundle1.model, 16, 0.5)!r}")
    lines.append(f"abs_moment(m=100, r=1) = {abs_moment(bundle1.model, 100, 1.0)!r}")
    lines.append(f"abs_moment(m=10000, r=1) = {abs_moment(bundle1.model, 10_000, 1.0)!r}")
    cfg1 = DetectorConfig(eps=0.5, delta=0.5, r=1.0, density=DensityConfig(horizon=10_000))
    v_p = st_dnp(bundle1.model, bundle1.schedule, bundle1.weights, cfg1)
    v_m = st_dnm(bundle1.model, bundle1.schedule, bundle1.weights, cfg1)
    lines.append(f"probability detector: {v_p.verdict.value} tail_max={v_p.tail_max!r}")
    lines.append(f"mean detector (r=1): {v_m.verdict.value} tail_max={v_m.tail_max!r}")

    bundle2 = model_preset("example2")
    lines.append("== sequence model example2 (two-coordinate joint law) ==")
    lines.append(f"exceedance_prob(m=7, eps=0.5) = {exceedance_prob(bundle2.model, 7, 0.5)!r}")
    cdf_vals = [cdf(bundle2.model, LIMIT, t) for t in (-0.5, 0.5, 1.5)]
    lines.append(f"limit cdf at (-0.5, 0.5, 1.5) = {cdf_vals!r}")
    v_d = st_dndc(bundle2.model, bundle2.schedule, bundle2.weights, cfg1)
    points = v_d.extras["points"]
    per_point = [points[t].tail_max for t in sorted(points)]
    lines.append(f"distribution detector: {v_d.verdict.value} per-point tail_max={per_point!r}")
    v_p2 = st_dnp(bundle2.model, bundle2.schedule, bundle2.weights, cfg1)
    lines.append(f"probability detector: {v_p2.verdict.value} tail_max={v_p2.tail_max!r}")

    lines.append("== operator checks ==")
    from .korovkin import IDENTITY, ONE  # noqa: PLC0415
    import numpy as np  # noqa: PLC0415

    grid = np.linspace(0.0, 1.0, 257)
    for m in (10, 50, 200):
        dev_one = max(abs(mkz_apply(ONE, m, float(y), 1e-10) - 1.0) for y in grid)
        dev_id = max(abs(mkz_apply(IDENTITY, m, float(y), 1e-10) - float(y)) for y in grid)
        lines.append(f"m={m}: sup|M(1,y)-1| = {dev_one!r}  sup|M(z,y)-y| = {dev_id!r}")
    audit = audit_quadratic_moment()
    lines.append(
        f"second-moment audit (m=50, y=0.5): series={audit.series_value!r} "
        f"quoted={audit.quoted_value!r} difference={audit.difference!r}"
    )
    note = audit.note()
    if note:
        lines.append(note)

    schedule = parse_schedule("stretch")
    weights = parse_weights("ones")
    kcfg = KorovkinConfig()
    report = korovkin_check(
        lifted_operator(Perturbation.NULL_SET, kcfg.tail_tol),
        "dnp",
        [function_preset("y^3"), function_preset("e^y"), function_preset("|y-1/2|")],
        schedule,
        weights,
        kcfg,
    )
    for label, verdict in report.conditions.items():
        lines.append(
            f"nullset condition {label}: {verdict.verdict.value} tail_max={verdict.tail_max!r}"
        )
    for label, verdict in report.conclusions.items():
        lines.append(
            f"nullset conclusion {label}: {verdict.verdict.value} tail_max={verdict.tail_max!r}"
        )
    report_cdf = korovkin_check(
        lifted_operator(Perturbation.CDF_FACTOR, kcfg.tail_tol),
        "dndc",
        [function_preset("y^3")],
        schedule,
        weights,
        kcfg,
    )
    v_one = report_cdf.conditions["1"]
    lines.append(
        f"cdffactor condition 1: {v_one.verdict.value} tail_max={v_one.tail_max!r}"
    )
    for note in report_cdf.notes:
        lines.append(f"note: {note}")

    lines.append("== seeded sampling check ==")
    batch = sample(bundle1.model, 16, 1_000_000, seed)
    est = batch.exceedance_prob(0.5)
    lines.append(
        f"example1 m=16 exceedance estimate={est.estimate!r} stderr={est.stderr!r} (exact 0.25)"
    )
    return lines


def cmd_repro(args: argparse.Namespace) -> int:
    lines = _repro_report(args.seed)
    body = "\n".join(lines) + "\n"
    status = "snapshot: skipped"
    failed = False
    if not args.skip_diff:
        expected_path = Path(__file__).parent / "data" / "repro_expected.txt"
        expected = expected_path.read_text() if expected_path.exists() else None
        if expected is None:
            status = "snapshot: missing expected file"
            failed = True
        elif expected == body:
            status = "snapshot: match"
        else:
            status = "snapshot: MISMATCH against committed expected output"
            failed = True
    output = body + status + "\n"
    sys.stdout.write(output)
    if args.out is not None:
        Path(args.out).write_text(output)
    return 1 if failed else 0


_COMMANDS = {
    "mean": cmd_mean,
    "detect": cmd_detect,
    "korovkin": cmd_korovkin,
    "repro": cmd_repro,
}

# Errors that mean the request itself was malformed (exit 2), as opposed
# to a computation that failed underway (exit 1).  Schedule, weight and
# model violations trace back to the supplied specs, so they count as
# configuration problems wherever they surface.
_CONFIG_ERRORS = (ConfigError, ScheduleError, WeightError, ModelError)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    try:
        args = _merge_config_file(parser, argv)
    except _CONFIG_ERRORS as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        return _COMMANDS[args.command](args)
    except _CONFIG_ERRORS as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # computation failure
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
