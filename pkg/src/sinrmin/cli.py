"""Command line front end: config parsing, subcommands, stable files.

Subcommands: `analytic` prints closed-form averages, `simulate` runs a
seeded Monte Carlo sweep, `figure` runs one of the four pre-registered
sweep configs shipped with the package, `validate` re-checks a results
file against its analytic columns.

All tables are comma-separated with a header line and 9-significant-
digit numbers, so a rerun with the same config and seed reproduces the
files byte for byte.
"""

import argparse
import csv
import hashlib
import sys
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path

from . import __version__
from .errors import ConfigError
from .experiment import (
    LOWER_BOUND_TAG,
    ExperimentConfig,
    ResultRow,
    _analytic_value,
    run_sweep,
    validate_rows,
)

_INT_KEYS = ("M", "K", "K_s", "trials", "master_seed", "exhaustive_budget")
_FLOAT_KEYS = ("gamma_db", "sigma_sq")
_STR_KEYS = ("power_method", "sweep_axis")
_LIST_KEYS = ("algorithms", "sweep_values")
_ALL_KEYS = _INT_KEYS + _FLOAT_KEYS + _STR_KEYS + _LIST_KEYS

_RESULT_COLUMNS = (
    "sweep_axis", "sweep_value", "algorithm", "power_method", "trials",
    "seed", "mc_mean", "mc_stderr", "analytic_value", "infeasible_count",
    "note",
)
_VALIDATION_COLUMNS = (
    "sweep_axis", "sweep_value", "algorithm", "check", "mc_mean",
    "mc_stderr", "analytic_value", "status",
)

FIGURE_IDS = (1, 2, 3, 4)


# ---------------------------------------------------------------------------
# config parsing


def _convert(key: str, raw: str, where: str):
    try:
        if key in _INT_KEYS:
            return int(raw)
        if key in _FLOAT_KEYS:
            return float(raw)
        if key == "algorithms":
            return tuple(part.strip() for part in raw.split(",") if part.strip())
        if key == "sweep_values":
            return tuple(int(part) for part in raw.split(",") if part.strip())
    except ValueError:
        raise ConfigError(f"bad value {raw!r} for key {key!r} {where}") from None
    return raw.strip()


def parse_config_text(text: str, origin: str = "<config>") -> dict:
    """key=value lines into typed values; # starts a comment."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"expected key=value at {origin}:{lineno}: {line!r}")
        key, raw = (part.strip() for part in body.split("=", 1))
        if key not in _ALL_KEYS:
            raise ConfigError(f"unknown key {key!r} at {origin}:{lineno}")
        if key in values:
            raise ConfigError(f"duplicate key {key!r} at {origin}:{lineno}")
        values[key] = _convert(key, raw, f"at {origin}:{lineno}")
    return values


def build_config(values: dict, simulatable: bool = True) -> ExperimentConfig:
    """Validated ExperimentConfig from parsed key/value pairs."""
    values = dict(values)
    values.setdefault("trials", 10_000)
    values.setdefault("master_seed", 0)
    for key in ("K_s", "gamma_db", "sigma_sq", "algorithms"):
        if key not in values:
            raise ConfigError(f"missing required key {key!r}")
    cfg = ExperimentConfig(**values)
    cfg.validate(simulatable=simulatable)
    return cfg


def parse_config(path=None, overrides=None, simulatable: bool = True):
    values = {}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        values = parse_config_text(p.read_text(), origin=str(p))
    for key, val in (overrides or {}).items():
        if val is not None:
            values[key] = val
    return build_config(values, simulatable=simulatable)


def _flag_overrides(args) -> dict:
    over = {
        "M": args.M,
        "K": args.K,
        "K_s": args.Ks,
        "gamma_db": args.gamma_db,
        "sigma_sq": args.sigma_sq,
        "trials": args.trials,
        "master_seed": args.seed,
        "power_method": args.power_method,
    }
    if args.algorithms is not None:
        over["algorithms"] = _convert("algorithms", args.algorithms, "on command line")
    return over


# ---------------------------------------------------------------------------
# stable writers


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return format(value, ".9g")
    return str(value)


def _write_table(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def write_results(rows, path: Path) -> None:
    _write_table(path, _RESULT_COLUMNS, (
        (
            r.sweep_axis, _cell(r.sweep_value), r.algorithm, r.power_method,
            r.trials, r.seed, _cell(r.mc_mean), _cell(r.mc_stderr),
            _cell(r.analytic_value), r.infeasible_count, r.note,
        )
        for r in rows
    ))


def write_validation(report, path: Path) -> None:
    _write_table(path, _VALIDATION_COLUMNS, (
        (
            v.sweep_axis, _cell(v.sweep_value), v.algorithm, v.check,
            _cell(v.mc_mean), _cell(v.mc_stderr), _cell(v.analytic_value),
            "pass" if v.passed else "fail",
        )
        for v in report
    ))


def config_hash(cfg: ExperimentConfig) -> str:
    return hashlib.sha256(cfg.canonical().encode()).hexdigest()


def write_manifest(cfg: ExperimentConfig, path: Path) -> None:
    stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
    path.write_text(
        f"config_hash={config_hash(cfg)}\n"
        f"tool_version={__version__}\n"
        f"timestamp={stamp}\n"
        f"master_seed={cfg.master_seed}\n"
    )


def read_results(path: Path):
    """Rows back from a results file, for the validate subcommand."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != list(_RESULT_COLUMNS):
            raise ConfigError(f"{path} is not a results file")
        for rec in reader:
            rows.append(ResultRow(
                sweep_axis=rec["sweep_axis"],
                sweep_value=int(rec["sweep_value"]) if rec["sweep_value"] else None,
                algorithm=rec["algorithm"],
                power_method=rec["power_method"],
                trials=int(rec["trials"]),
                seed=int(rec["seed"]),
                mc_mean=float(rec["mc_mean"]) if rec["mc_mean"] else None,
                mc_stderr=float(rec["mc_stderr"]) if rec["mc_stderr"] else None,
                analytic_value=(
                    float(rec["analytic_value"]) if rec["analytic_value"] else None
                ),
                infeasible_count=int(rec["infeasible_count"]),
                note=rec["note"],
            ))
    return rows


def write_figure_table(cfg: ExperimentConfig, rows, path: Path) -> None:
    """Wide companion table: one sweep row, one column per curve."""
    series = []
    for alg in cfg.algorithms:
        for meth in cfg.methods():
            series.append((alg, meth, "mc"))
        series.append((alg, "approx", "analytic"))
    if cfg.K_s == 2:
        series.append((LOWER_BOUND_TAG, "analytic", "analytic"))
    indexed = {(r.sweep_value, r.algorithm, r.power_method): r for r in rows}
    header = [cfg.sweep_axis]
    for alg, meth, kind in series:
        suffix = f"_{meth}_mc" if kind == "mc" else "_analytic"
        header.append(f"{alg}{suffix}")
    table = []
    for sweep_value in cfg.points():
        line = [_cell(sweep_value)]
        for alg, meth, kind in series:
            row = indexed.get((sweep_value, alg, meth))
            if row is None:
                line.append("")
            elif kind == "mc":
                line.append(_cell(row.mc_mean))
            else:
                line.append(_cell(row.analytic_value))
        table.append(line)
    _write_table(path, header, table)


_PLOT_SCRIPT = """\
#!/usr/bin/env python3
\"\"\"Plot curves from results.csv (written next to this script).\"\"\"
import csv
from collections import defaultdict
from pathlib import Path

import matplotlib.pyplot as plt

here = Path(__file__).resolve().parent
curves = defaultdict(list)
with open(here / "results.csv", newline="") as fh:
    for rec in csv.DictReader(fh):
        x = rec["sweep_value"]
        if not x:
            continue
        if rec["mc_mean"]:
            curves[f'{rec["algorithm"]} ({rec["power_method"]} mc)'].append(
                (int(x), float(rec["mc_mean"]))
            )
        if rec["analytic_value"]:
            curves[f'{rec["algorithm"]} (analytic)'].append(
                (int(x), float(rec["analytic_value"]))
            )

for label, pts in sorted(curves.items()):
    pts.sort()
    plt.semilogy([p[0] for p in pts], [p[1] for p in pts], marker="o", label=label)
plt.xlabel("sweep value")
plt.ylabel("average total transmit power")
plt.grid(True, which="both", alpha=0.3)
plt.legend()
plt.tight_layout()
plt.savefig(here / "figure.png", dpi=150)
print(here / "figure.png")
"""


# ---------------------------------------------------------------------------
# subcommands


def _prepare_out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_analytic(args) -> int:
    cfg = parse_config(args.config, _flag_overrides(args), simulatable=False)
    lines = [("sweep_axis", "sweep_value", "algorithm", "analytic_value")]
    tags = list(cfg.algorithms)
    if cfg.K_s == 2 and LOWER_BOUND_TAG not in tags:
        tags.append(LOWER_BOUND_TAG)
    for sweep_value in cfg.points():
        m, k = cfg.dims_at(sweep_value)
        for alg in tags:
            value, marker = _analytic_value(
                alg, m, k, cfg.K_s, cfg.gamma_linear, cfg.sigma_sq
            )
            cell = f"{value:.6f}" if value is not None else marker
            lines.append((cfg.sweep_axis, _cell(sweep_value), alg, cell))
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerows(lines)
    if args.out is not None:
        out = _prepare_out(args)
        _write_table(out / "analytic.csv", lines[0], lines[1:])
    return 0


def _simulate_config(cfg: ExperimentConfig, args) -> int:
    out = _prepare_out(args)
    rows = run_sweep(cfg, workers=args.workers)
    report = validate_rows(rows)
    write_results(rows, out / "results.csv")
    write_validation(report, out / "validation.csv")
    write_manifest(cfg, out / "manifest.txt")
    if cfg.sweep_axis != "none":
        write_figure_table(cfg, rows, out / "figure.csv")
    if args.emit_plot_script:
        (out / "plot_results.py").write_text(_PLOT_SCRIPT)
    failures = sum(1 for v in report if not v.passed)
    print(
        f"wrote {out / 'results.csv'} ({len(rows)} rows); "
        f"validation: {len(report) - failures}/{len(report)} passed"
    )
    if failures and args.strict:
        return 4
    return 0


def cmd_simulate(args) -> int:
    cfg = parse_config(args.config, _flag_overrides(args), simulatable=True)
    return _simulate_config(cfg, args)


def cmd_figure(args) -> int:
    ref = resources.files("sinrmin").joinpath(f"configs/fig{args.figure_id}.cfg")
    values = parse_config_text(ref.read_text(), origin=f"fig{args.figure_id}.cfg")
    for key, val in _flag_overrides(args).items():
        if val is not None:
            values[key] = val
    cfg = build_config(values, simulatable=True)
    return _simulate_config(cfg, args)


def cmd_validate(args) -> int:
    rows = read_results(Path(args.results))
    report = validate_rows(rows, rel_tol=args.rel_tol, z=args.z)
    out = _prepare_out(args)
    write_validation(report, out / "validation.csv")
    failures = [v for v in report if not v.passed]
    for v in failures:
        where = f"{v.sweep_axis}={v.sweep_value}" if v.sweep_value is not None else "point"
        print(
            f"FAIL {v.algorithm} at {where}: "
            f"mc={v.mc_mean:.6g} vs analytic={v.analytic_value:.6g}",
            file=sys.stderr,
        )
    print(f"validation: {len(report) - len(failures)}/{len(report)} passed")
    if failures and args.strict:
        return 4
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def _add_common_flags(sub, with_workers: bool = True, out_default: "str | None" = ".") -> None:
    sub.add_argument("--config", help="key=value config file")
    sub.add_argument("--seed", type=int, help="master seed (64-bit)")
    sub.add_argument("--trials", type=int, help="Monte Carlo trials per point")
    sub.add_argument("--out", help="output directory", default=out_default)
    sub.add_argument("--strict", action="store_true",
                     help="exit 4 when any validation row fails")
    sub.add_argument("--M", type=int, help="transmit antennas")
    sub.add_argument("--K", type=int, help="total users")
    sub.add_argument("--Ks", type=int, help="selected users")
    sub.add_argument("--gamma-db", dest="gamma_db", type=float,
                     help="common SINR target in dB")
    sub.add_argument("--sigma-sq", dest="sigma_sq", type=float,
                     help="noise variance")
    sub.add_argument("--algorithms", help="comma list from NUS,SUS,AUS,RUS,EXHAUSTIVE")
    sub.add_argument("--power-method", dest="power_method",
                     choices=("exact", "approx", "both"))
    if with_workers:
        sub.add_argument("--workers", type=int, default=1,
                         help="parallel worker processes")
        sub.add_argument("--emit-plot-script", action="store_true",
                         help="also write plot_results.py next to results.csv")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sinrmin",
        description="Minimum-power beamforming experiments with user selection",
    )
    parser.add_argument("--version", action="version", version=__version__)
    subs = parser.add_subparsers(dest="command", required=True)

    sub = subs.add_parser("analytic", help="closed-form average powers")
    # stdout-first: analytic.csv is only written when --out is given
    _add_common_flags(sub, with_workers=False, out_default=None)
    sub.set_defaults(fn=cmd_analytic)

    sub = subs.add_parser("simulate", help="seeded Monte Carlo sweep")
    _add_common_flags(sub)
    sub.set_defaults(fn=cmd_simulate)

    sub = subs.add_parser("figure", help="run a pre-registered figure config")
    sub.add_argument("figure_id", type=int, choices=FIGURE_IDS)
    _add_common_flags(sub)
    sub.set_defaults(fn=cmd_figure)

    sub = subs.add_parser("validate", help="re-check a results file")
    sub.add_argument("results", help="path to results.csv")
    sub.add_argument("--out", default=".", help="output directory")
    sub.add_argument("--strict", action="store_true")
    sub.add_argument("--rel-tol", dest="rel_tol", type=float, default=0.02)
    sub.add_argument("--z", type=float, default=3.0)
    sub.set_defaults(fn=cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
