"""Seeded Monte Carlo over coherence blocks.

One trial = one channel realization: select users, order them, price the
selection under the configured power model(s). Trial t always draws its
channels from stream 2t and its random-selection choices from stream
2t+1 of the master seed, so results are identical no matter how trials
are scheduled across workers.

Analytic averages attach to the approx-method rows only: the closed
forms describe the residual-norm power model, not the exact recursion.
"""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, replace

import numpy as np

from .analytic import (
    avg_power_aus_two,
    avg_power_lower_bound_two,
    avg_power_nus,
    avg_power_rus,
    avg_power_sus,
)
from .channel import SeedSpec, sample_channel_set
from .errors import ConfigError, DivergenceError, InfeasibleGeometryError
from .power import SinrTargets, approx_min_power, exact_min_power
from .selection import (
    ALGORITHM_TAGS,
    select_aus,
    select_exhaustive,
    select_nus,
    select_rus,
    select_sus,
)

LOWER_BOUND_TAG = "LOWER_BOUND"

NO_CLOSED_FORM = "no_closed_form"

_SWEEP_AXES = ("none", "M", "K")
_POWER_METHODS = ("exact", "approx")


@dataclass(frozen=True)
class ExperimentConfig:
    """Full description of one simulation or sweep.

    The swept dimension's own field may stay None; every other field is
    concrete. `gamma_db` is the only dB quantity in the package and is
    converted exactly once, by `gamma_linear`.
    """

    K_s: int
    gamma_db: float
    sigma_sq: float
    algorithms: tuple[str, ...]
    trials: int
    master_seed: int
    M: int | None = None
    K: int | None = None
    power_method: str = "approx"
    sweep_axis: str = "none"
    sweep_values: tuple[int, ...] = ()
    exhaustive_budget: int = 1_000_000

    @property
    def gamma_linear(self) -> float:
        return 10.0 ** (self.gamma_db / 10.0)

    def methods(self) -> tuple[str, ...]:
        if self.power_method == "both":
            return _POWER_METHODS
        return (self.power_method,)

    def points(self) -> tuple:
        if self.sweep_axis == "none":
            return (None,)
        return tuple(self.sweep_values)

    def dims_at(self, sweep_value) -> tuple[int, int]:
        m = sweep_value if self.sweep_axis == "M" else self.M
        k = sweep_value if self.sweep_axis == "K" else self.K
        return int(m), int(k)

    def validate(self, simulatable: bool = True) -> None:
        """Raise ConfigError on anything that would fail mid-run.

        With simulatable=False only the analytic formulas must make
        sense, so K_s may exceed M (the result is then a divergence
        marker, not an error).
        """
        if self.sweep_axis not in _SWEEP_AXES:
            raise ConfigError(f"sweep_axis must be one of {_SWEEP_AXES}")
        if self.sweep_axis == "none":
            if self.sweep_values:
                raise ConfigError("sweep_values given without a sweep_axis")
        elif not self.sweep_values:
            raise ConfigError(f"sweep over {self.sweep_axis} needs sweep_values")
        for name in ("M", "K"):
            val = getattr(self, name)
            if self.sweep_axis == name:
                continue
            if val is None or int(val) < 1:
                raise ConfigError(f"{name} must be a positive integer")
        for v in self.sweep_values:
            if int(v) < 1:
                raise ConfigError(f"sweep value {v} must be a positive integer")
        if self.K_s < 1:
            raise ConfigError("K_s must be a positive integer")
        if not self.algorithms:
            raise ConfigError("no algorithms requested")
        seen = set()
        for alg in self.algorithms:
            if alg not in ALGORITHM_TAGS:
                raise ConfigError(f"unknown algorithm {alg!r}")
            if alg in seen:
                raise ConfigError(f"algorithm {alg} listed twice")
            seen.add(alg)
        if self.power_method not in _POWER_METHODS + ("both",):
            raise ConfigError(f"power_method must be exact, approx, or both")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not 0 <= self.master_seed < 2**64:
            raise ConfigError("master_seed must fit in 64 bits")
        if not self.sigma_sq > 0:
            raise ConfigError("sigma_sq must be positive")
        if not math.isfinite(self.gamma_db):
            raise ConfigError("gamma_db must be finite")
        if self.exhaustive_budget < 1:
            raise ConfigError("exhaustive_budget must be positive")
        for sweep_value in self.points():
            m, k = self.dims_at(sweep_value)
            if self.K_s > k:
                raise ConfigError(f"K_s={self.K_s} exceeds K={k}")
            if simulatable and self.K_s > min(m, k):
                raise ConfigError(
                    f"K_s={self.K_s} exceeds min(M, K)={min(m, k)} at M={m}, K={k}"
                )

    def canonical(self) -> str:
        """Stable key=value rendering used for config hashing."""
        lines = []
        for f in fields(self):
            val = getattr(self, f.name)
            if isinstance(val, tuple):
                val = ",".join(str(v) for v in val)
            lines.append(f"{f.name}={val}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class ResultRow:
    sweep_axis: str
    sweep_value: int | None
    algorithm: str
    power_method: str
    trials: int
    seed: int
    mc_mean: float | None
    mc_stderr: float | None
    analytic_value: float | None
    infeasible_count: int
    note: str


@dataclass(frozen=True)
class ValidationRow:
    sweep_axis: str
    sweep_value: int | None
    algorithm: str
    check: str
    mc_mean: float
    mc_stderr: float
    analytic_value: float
    passed: bool


def _select(alg: str, channels, k_s, targets, master_seed, trial, budget):
    if alg == "NUS":
        return select_nus(channels, k_s)
    if alg == "SUS":
        return select_sus(channels, k_s)
    if alg == "AUS":
        return select_aus(channels, k_s)
    if alg == "RUS":
        return select_rus(channels, k_s, SeedSpec(master_seed, 2 * trial + 1))
    return None  # EXHAUSTIVE picks per power method


def _run_chunk(payload):
    """Totals for a contiguous trial range; infeasible trials stay NaN."""
    (m, k, k_s, gamma, sigma_sq, algorithms, methods, master_seed, start, stop,
     budget) = payload
    targets = SinrTargets(gamma, sigma_sq)
    solvers = {"exact": exact_min_power, "approx": approx_min_power}
    totals = {
        (alg, meth): np.full(stop - start, np.nan)
        for alg in algorithms
        for meth in methods
    }
    for t in range(start, stop):
        channels = sample_channel_set(m, k, SeedSpec(master_seed, 2 * t))
        for alg in algorithms:
            if alg == "EXHAUSTIVE":
                for meth in methods:
                    try:
                        sel = select_exhaustive(
                            channels, k_s, targets, power_fn=meth, budget=budget
                        )
                        ordered = channels.users[list(sel.encoding_order)]
                        total = solvers[meth](ordered, targets).total_power
                    except InfeasibleGeometryError:
                        continue
                    totals[(alg, meth)][t - start] = total
                continue
            sel = _select(alg, channels, k_s, targets, master_seed, t, budget)
            ordered = channels.users[list(sel.encoding_order)]
            for meth in methods:
                try:
                    total = solvers[meth](ordered, targets).total_power
                except InfeasibleGeometryError:
                    continue
                totals[(alg, meth)][t - start] = total
    return start, totals


def _split_trials(trials: int, workers: int):
    base, extra = divmod(trials, workers)
    ranges = []
    lo = 0
    for w in range(workers):
        hi = lo + base + (1 if w < extra else 0)
        if hi > lo:
            ranges.append((lo, hi))
        lo = hi
    return ranges


def _point_samples(config: ExperimentConfig, sweep_value, workers: int):
    """Per-trial totals keyed by (algorithm, method), merged by trial index."""
    m, k = config.dims_at(sweep_value)
    algorithms = tuple(a for a in config.algorithms)
    methods = config.methods()
    merged = {
        (alg, meth): np.full(config.trials, np.nan)
        for alg in algorithms
        for meth in methods
    }
    args = [
        (m, k, config.K_s, config.gamma_linear, config.sigma_sq, algorithms,
         methods, config.master_seed, lo, hi, config.exhaustive_budget)
        for lo, hi in _split_trials(config.trials, max(1, workers))
    ]
    if workers <= 1 or len(args) <= 1:
        results = [_run_chunk(a) for a in args]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_chunk, args))
    for start, chunk in results:
        for key, arr in chunk.items():
            merged[key][start : start + arr.size] = arr
    return merged


def _analytic_value(alg, m, k, k_s, gamma, sigma_sq):
    """Closed-form average for one row, or (None, marker)."""
    try:
        if alg == "NUS":
            return avg_power_nus(m, k, k_s, gamma, sigma_sq), ""
        if alg == "SUS":
            return avg_power_sus(m, k, k_s, gamma, sigma_sq), ""
        if alg == "RUS":
            if k_s >= m:
                return None, f"divergent: K_s={k_s} needs K_s < M={m}"
            return avg_power_rus(m, k_s, gamma, sigma_sq), ""
        if alg == "AUS" and k_s == 2:
            return avg_power_aus_two(m, k, gamma, sigma_sq), ""
        if alg == LOWER_BOUND_TAG and k_s == 2:
            return avg_power_lower_bound_two(m, k, gamma, sigma_sq), ""
    except DivergenceError as exc:
        return None, f"divergent: {exc}"
    except ConfigError:
        return None, NO_CLOSED_FORM
    return None, NO_CLOSED_FORM


def run_point(config: ExperimentConfig, sweep_value=None, workers: int = 1):
    """All result rows for one sweep point."""
    m, k = config.dims_at(sweep_value)
    gamma = config.gamma_linear
    rows = []

    runnable = list(config.algorithms)
    skipped = []
    if "EXHAUSTIVE" in runnable:
        if math.perm(k, config.K_s) > config.exhaustive_budget:
            runnable.remove("EXHAUSTIVE")
            skipped.append("EXHAUSTIVE")

    samples = {}
    if runnable:
        trimmed = replace(config, algorithms=tuple(runnable))
        samples = _point_samples(trimmed, sweep_value, workers)

    for alg in config.algorithms:
        for meth in config.methods():
            if alg in skipped:
                rows.append(ResultRow(
                    config.sweep_axis, sweep_value, alg, meth, 0,
                    config.master_seed, None, None, None, 0, "budget_exceeded",
                ))
                continue
            arr = samples[(alg, meth)]
            ok = arr[~np.isnan(arr)]
            infeasible = int(arr.size - ok.size)
            mean = float(ok.mean()) if ok.size else None
            stderr = (
                float(ok.std(ddof=1) / math.sqrt(ok.size)) if ok.size > 1 else 0.0
            )
            notes = []
            if infeasible > 0.0001 * arr.size:
                notes.append("infeasible_rate_exceeded")
            analytic = None
            if meth == "approx":
                analytic, marker = _analytic_value(
                    alg, m, k, config.K_s, gamma, config.sigma_sq
                )
                if analytic is None:
                    notes.append(marker)
            rows.append(ResultRow(
                config.sweep_axis, sweep_value, alg, meth, int(arr.size),
                config.master_seed, mean, stderr, analytic, infeasible,
                ";".join(notes),
            ))

    if config.K_s == 2:
        analytic, marker = _analytic_value(
            LOWER_BOUND_TAG, m, k, config.K_s, gamma, config.sigma_sq
        )
        rows.append(ResultRow(
            config.sweep_axis, sweep_value, LOWER_BOUND_TAG, "analytic", 0,
            config.master_seed, None, None, analytic,
            0, "" if analytic is not None else marker,
        ))
    return rows


def run_sweep(config: ExperimentConfig, workers: int = 1):
    """Rows for every sweep point, in sweep order."""
    config.validate(simulatable=True)
    rows = []
    for sweep_value in config.points():
        rows.extend(run_point(config, sweep_value, workers))
    return rows


def validate_rows(rows, rel_tol: float = 0.02, z: float = 3.0):
    """Monte Carlo vs analytic comparison for rows that carry both.

    SUS closed forms are upper bounds, so those rows get a one-sided
    check; everything else must agree within max(rel_tol * analytic,
    z * stderr).
    """
    report = []
    for row in rows:
        if row.mc_mean is None or row.analytic_value is None:
            continue
        if row.algorithm == "SUS":
            passed = row.mc_mean <= row.analytic_value + z * row.mc_stderr
            check = "one_sided_upper"
        else:
            tol = max(rel_tol * abs(row.analytic_value), z * row.mc_stderr)
            passed = abs(row.mc_mean - row.analytic_value) <= tol
            check = "two_sided"
        report.append(ValidationRow(
            row.sweep_axis, row.sweep_value, row.algorithm, check,
            row.mc_mean, row.mc_stderr, row.analytic_value, bool(passed),
        ))
    return report
