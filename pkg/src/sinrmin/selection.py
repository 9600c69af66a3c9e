"""User selection rules and the exhaustive benchmark.

Each rule picks K_s of the K users and fixes their encoding order.
Selection and encoding are reported separately because they differ for
the norm- and angle-based rules: those encode weakest-first, while the
greedy residual rule encodes in the order it picked.

Tie-breaks are everywhere "lowest user index wins" so results are
deterministic on crafted inputs; with continuous channels ties have
probability zero.
"""

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .channel import RANK_TOL, ChannelSet, ProjectionBasis, SeedSpec
from .errors import (
    BudgetError,
    ConfigError,
    DomainError,
    InfeasibleGeometryError,
    RankDeficiencyError,
)
from .power import SinrTargets, approx_min_power, exact_min_power

ALGORITHM_TAGS = ("NUS", "SUS", "AUS", "RUS", "EXHAUSTIVE")

_CHOL_CHUNK = 65536

# ordering tables are small (a few MB at the budget cap) and reused per sweep
_ORDERING_CACHE: dict[tuple[int, int], np.ndarray] = {}


@dataclass(frozen=True)
class SelectionResult:
    """Selected users: who was picked, and who encodes first."""

    algorithm_tag: str
    selection_order: tuple[int, ...]
    encoding_order: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.algorithm_tag not in ALGORITHM_TAGS:
            raise ConfigError(f"unknown algorithm tag {self.algorithm_tag!r}")
        if len(set(self.selection_order)) != len(self.selection_order):
            raise ConfigError("selected indices must be distinct")
        if sorted(self.encoding_order) != sorted(self.selection_order):
            raise ConfigError("encoding order must permute the selection")


def _check_k_s(channels: ChannelSet, k_s: int) -> None:
    limit = min(channels.M, channels.K)
    if not 1 <= k_s <= limit:
        raise ConfigError(
            f"K_s={k_s} out of range [1, {limit}] for M={channels.M}, K={channels.K}"
        )


def _squared_norms(channels: ChannelSet) -> np.ndarray:
    h = channels.users
    return np.einsum("ij,ij->i", h.conj(), h).real


def _ascending_by_norm(indices, norms: np.ndarray) -> tuple[int, ...]:
    idx = np.asarray(indices, dtype=np.intp)
    order = np.lexsort((idx, norms[idx]))
    return tuple(int(i) for i in idx[order])


def select_nus(channels: ChannelSet, k_s: int) -> SelectionResult:
    """Pick the K_s strongest norms; encode weakest of those first."""
    _check_k_s(channels, k_s)
    norms = _squared_norms(channels)
    by_norm_desc = np.lexsort((np.arange(channels.K), -norms))
    selected = tuple(int(i) for i in by_norm_desc[:k_s])
    return SelectionResult("NUS", selected, _ascending_by_norm(selected, norms))


def select_sus(channels: ChannelSet, k_s: int) -> SelectionResult:
    """Greedy residual-norm selection; encoding order is the pick order.

    The first pick is the largest norm. Every later step projects the
    remaining channels onto the orthogonal complement of the picked span
    and takes the largest residual. No semi-orthogonality threshold is
    applied; the rule is pure greedy.
    """
    _check_k_s(channels, k_s)
    h = channels.users
    norms = _squared_norms(channels)
    remaining = list(range(channels.K))
    basis = ProjectionBasis(channels.M)
    picked: list[int] = []
    for step in range(k_s):
        if step == 0:
            scores = norms[remaining]
        else:
            scores = basis.residual_norms_sq(h[remaining])
        choice = remaining.pop(int(np.argmax(scores)))
        picked.append(choice)
        if step + 1 < k_s:
            basis.add(h[choice])
    order = tuple(picked)
    return SelectionResult("SUS", order, order)


def select_aus(channels: ChannelSet, k_s: int) -> SelectionResult:
    """Strongest user first, then most-orthogonal regardless of strength.

    Later steps score each remaining user by sin^2 of its angle against
    the picked span. A user already inside the span scores zero and can
    still be picked (lowest index wins); the downstream power call is
    what rejects such geometry.
    """
    _check_k_s(channels, k_s)
    h = channels.users
    norms = _squared_norms(channels)
    remaining = list(range(channels.K))
    first = int(np.argmax(norms))
    remaining.remove(first)
    picked = [first]
    basis = ProjectionBasis(channels.M)
    basis.add(h[first])
    for _ in range(1, k_s):
        rows = h[remaining]
        scores = basis.residual_norms_sq(rows) / norms[remaining]
        choice = remaining.pop(int(np.argmax(scores)))
        picked.append(choice)
        if len(picked) < k_s:
            try:
                basis.add(h[choice])
            except RankDeficiencyError:
                pass  # span unchanged by a dependent pick
    return SelectionResult("AUS", tuple(picked), _ascending_by_norm(picked, norms))


def select_rus(channels: ChannelSet, k_s: int, seed: SeedSpec) -> SelectionResult:
    """Uniform random subset from the seed stream, encoded in draw order.

    Nothing here looks at the channels, including the encoding order:
    each position's norm stays a plain chi-square, which is what the
    random-selection average-power formula prices. Sorting the picks by
    norm would turn the position norms into order statistics and lower
    the average.
    """
    _check_k_s(channels, k_s)
    rng = seed.generator()
    picked = tuple(int(i) for i in rng.choice(channels.K, size=k_s, replace=False))
    return SelectionResult("RUS", picked, picked)


def _ordering_table(k: int, k_s: int) -> np.ndarray:
    key = (k, k_s)
    table = _ORDERING_CACHE.get(key)
    if table is None:
        table = np.array(
            list(itertools.permutations(range(k), k_s)), dtype=np.intp
        )
        _ORDERING_CACHE[key] = table
    return table


def _approx_total_for_order(h: np.ndarray, order, targets: SinrTargets) -> float:
    try:
        return approx_min_power(h[list(order)], targets).total_power
    except (InfeasibleGeometryError, DomainError):
        return math.inf


def _exact_total_for_order(h: np.ndarray, order, targets: SinrTargets) -> float:
    try:
        return exact_min_power(h[list(order)], targets).total_power
    except DomainError:
        return math.inf


def _approx_totals_batch(
    h: np.ndarray, table: np.ndarray, targets: SinrTargets
) -> np.ndarray:
    """Totals for every ordering at once.

    The residual norms of an ordered tuple are the squared Cholesky
    diagonal of its Gram submatrix, so one batched factorization per
    chunk replaces a per-ordering projection loop.
    """
    k_s = table.shape[1]
    gam = targets.gamma_vector(k_s)
    gram = h @ h.conj().T
    totals = np.empty(table.shape[0])
    for start in range(0, table.shape[0], _CHOL_CHUNK):
        rows = table[start : start + _CHOL_CHUNK]
        sub = gram[rows[:, :, None], rows[:, None, :]]
        try:
            chol = np.linalg.cholesky(sub)
        except np.linalg.LinAlgError:
            totals[start : start + len(rows)] = [
                _approx_total_for_order(h, order, targets) for order in rows
            ]
            continue
        res2 = np.square(np.diagonal(chol, axis1=1, axis2=2).real)
        own = np.diagonal(sub, axis1=1, axis2=2).real
        chunk = targets.sigma_sq * (gam / res2).sum(axis=1)
        chunk[np.any(res2 <= (RANK_TOL**2) * own, axis=1)] = np.inf
        totals[start : start + len(rows)] = chunk
    return totals


def select_exhaustive(
    channels: ChannelSet,
    k_s: int,
    targets: SinrTargets,
    power_fn: str = "approx",
    budget: int = 1_000_000,
) -> SelectionResult:
    """True per-instance minimum over every subset and encoding order.

    Ordering is searched explicitly, not assumed: weakest-first is only
    an on-average rule. Ties resolve to the lexicographically smallest
    index sequence. The enumeration size C(K, K_s) * K_s! is checked
    against `budget` before any work happens.
    """
    _check_k_s(channels, k_s)
    if power_fn not in ("exact", "approx"):
        raise ConfigError(f"power_fn must be 'exact' or 'approx', got {power_fn!r}")
    count = math.perm(channels.K, k_s)
    if count > budget:
        raise BudgetError(
            f"{count} orderings exceed the budget of {budget}; reduce K or K_s"
        )
    table = _ordering_table(channels.K, k_s)
    h = channels.users
    if power_fn == "approx":
        totals = _approx_totals_batch(h, table, targets)
    else:
        totals = np.array(
            [_exact_total_for_order(h, order, targets) for order in table]
        )
    best = int(np.argmin(totals))
    if not np.isfinite(totals[best]):
        raise InfeasibleGeometryError("every ordering is infeasible")
    order = tuple(int(i) for i in table[best])
    return SelectionResult("EXHAUSTIVE", order, order)
