"""Budget-constrained participant selection.

Selecting participants is a 0-1 knapsack: each candidate has a value (its
expected utility, amplified to an integer) and a weight (its bid), and the
task budget is the capacity. Solvers here:

* ``select_exact_dp``: pseudo-polynomial DP over amplified utility, where
  ``A[i, k]`` is the cheapest bid total reaching utility exactly ``k``.
* ``select_fptas``: rescales the amplified utilities by
  ``Q = eps * max / n`` and runs the same DP, giving ``(1 - eps)``-optimal
  selections in ``O(n^3 / eps)``.
* ``select_greedy_baseline``: cheapest bids first.
* ``select_exhaustive``: brute-force oracle for small instances.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .model import Application, MobileUser, ReputationParams, TaskSpec, ValidationError
from .utility import expected_utility

log = logging.getLogger(__name__)

DEFAULT_AMPLIFICATION = 10_000
EXHAUSTIVE_MAX_CANDIDATES = 20


@dataclass(frozen=True)
class Candidate:
    user_id: str
    bid_price: float
    amplified_utility: int
    raw_utility: float

    def __post_init__(self) -> None:
        if self.amplified_utility < 0 or int(self.amplified_utility) != self.amplified_utility:
            raise ValidationError(
                f"candidate {self.user_id}: amplified utility must be a non-negative integer, "
                f"got {self.amplified_utility!r}"
            )
        if self.bid_price <= 0:
            raise ValidationError(f"candidate {self.user_id}: bid must be > 0, got {self.bid_price}")


@dataclass(frozen=True)
class SelectionResult:
    selected: tuple[str, ...]
    total_bid: float
    achieved_utility: float
    amplified_utility: int
    solver: str
    # DP cells evaluated (0 for solvers without a table)
    table_cells: int = 0

    @property
    def size(self) -> int:
        return len(self.selected)


def amplify(raw_utility: float, amplification: int = DEFAULT_AMPLIFICATION) -> int:
    # the epsilon keeps 0.68 * 1e4 at 6800 rather than 6799
    return math.floor(raw_utility * amplification + 1e-9)


def filter_candidates(
    applications: Iterable[tuple[MobileUser, Application]],
    task: TaskSpec,
    rep_params: ReputationParams,
    amplification: int = DEFAULT_AMPLIFICATION,
) -> list[Candidate]:
    """Drop applications that break the delay or bid limits and score the rest."""
    if amplification < 1:
        raise ValidationError(f"amplification factor must be >= 1, got {amplification}")
    out = []
    for user, app in applications:
        if user.id != app.user_id:
            raise ValidationError(f"application for {app.user_id!r} paired with user {user.id!r}")
        if app.expected_delay > task.delay_threshold or app.bid_price > task.budget:
            continue
        e = expected_utility(user, app, task, rep_params)
        out.append(Candidate(user.id, app.bid_price, amplify(e, amplification), e))
    return out


def _result(candidates: Sequence[Candidate], chosen: Sequence[int], solver: str, cells: int = 0) -> SelectionResult:
    chosen = sorted(chosen)
    picked = [candidates[i] for i in chosen]
    return SelectionResult(
        selected=tuple(c.user_id for c in picked),
        total_bid=sum(c.bid_price for c in picked),
        achieved_utility=sum(c.raw_utility for c in picked),
        amplified_utility=sum(c.amplified_utility for c in picked),
        solver=solver,
        table_cells=cells,
    )


def _knapsack_min_cost(values: Sequence[int], bids: Sequence[float], budget: float) -> tuple[list[int], int]:
    """Utility-indexed knapsack DP; returns (chosen indices, cells evaluated).

    Row ``i`` only spans utilities ``0..sum(values[:i+1])``. Choice bits are
    kept bit-packed per row for the backwards reconstruction.
    """
    total = int(sum(values))
    # unreachable utilities cost more than the budget
    cost = np.full(total + 1, budget + 1.0)
    cost[0] = 0.0
    rows: list[tuple[int, np.ndarray | None]] = []
    prefix = 0
    cells = 0
    for v, b in zip(values, bids):
        prefix += v
        width = prefix + 1
        cells += width
        if v == 0:
            rows.append((width, None))
            continue
        take_cost = cost[: width - v] + b
        keep_cost = cost[v:width]
        take = take_cost < keep_cost
        cost[v:width] = np.where(take, take_cost, keep_cost)
        rows.append((width, np.packbits(take)))

    feasible = np.flatnonzero(cost <= budget)
    k = int(feasible[-1]) if feasible.size else 0

    chosen = []
    for i in range(len(values) - 1, -1, -1):
        _, bits = rows[i]
        v = values[i]
        if bits is None or k < v:
            continue
        j = k - v
        if (bits[j >> 3] >> (7 - (j & 7))) & 1:
            chosen.append(i)
            k -= v
    assert k == 0, "DP reconstruction did not reach utility 0"
    return chosen, cells


def _check_budget(budget: float) -> None:
    if not math.isfinite(budget) or budget < 0:
        raise ValidationError(f"budget must be a finite value >= 0, got {budget}")


def select_exact_dp(candidates: Sequence[Candidate], budget: float) -> SelectionResult:
    """Subset maximizing total amplified utility with total bid <= ``budget``.

    Among equally good subsets the cheapest wins; remaining ties favour
    leaving out later candidates.
    """
    _check_budget(budget)
    if not candidates:
        return _result(candidates, [], "exact_dp")
    values = [c.amplified_utility for c in candidates]
    if not any(values):
        warnings.warn("all amplified utilities are zero; amplification factor too small", stacklevel=2)
        return _result(candidates, [], "exact_dp")
    chosen, cells = _knapsack_min_cost(values, [c.bid_price for c in candidates], budget)
    return _result(candidates, chosen, "exact_dp", cells)


def fptas_scale(candidates: Sequence[Candidate], epsilon: float) -> float:
    """Rescaling divisor ``max(eps * Ie_max / n, 1)``."""
    ie_max = max(c.amplified_utility for c in candidates)
    return max(epsilon * ie_max / len(candidates), 1.0)


def select_fptas(candidates: Sequence[Candidate], budget: float, epsilon: float) -> SelectionResult:
    """Approximate selection within a factor ``1 - epsilon`` of the DP optimum.

    The DP runs on ``floor(Ie / Q)``; the returned totals are re-scored on
    the original utilities.
    """
    if not 0 < epsilon < 1:
        raise ValidationError(f"epsilon must be in (0, 1), got {epsilon}")
    _check_budget(budget)
    solver = f"fptas({epsilon:g})"
    if not candidates:
        return _result(candidates, [], solver)
    if not any(c.amplified_utility for c in candidates):
        warnings.warn("all amplified utilities are zero; amplification factor too small", stacklevel=2)
        return _result(candidates, [], solver)
    q = fptas_scale(candidates, epsilon)
    scaled = [math.floor(c.amplified_utility / q) for c in candidates]
    log.debug("fptas: n=%d Q=%g scaled max=%d", len(candidates), q, max(scaled))
    chosen, cells = _knapsack_min_cost(scaled, [c.bid_price for c in candidates], budget)
    return _result(candidates, chosen, solver, cells)


def select_greedy_baseline(candidates: Sequence[Candidate], budget: float) -> SelectionResult:
    """Cheapest-bid-first selection (ties by user id) until the budget runs out."""
    _check_budget(budget)
    order = sorted(range(len(candidates)), key=lambda i: (candidates[i].bid_price, candidates[i].user_id))
    spent = 0.0
    chosen = []
    for i in order:
        if spent + candidates[i].bid_price > budget:
            break
        spent += candidates[i].bid_price
        chosen.append(i)
    res = _result(candidates, chosen, "greedy")
    # report the running total that was actually checked against the budget
    return SelectionResult(res.selected, spent, res.achieved_utility, res.amplified_utility, "greedy")


def select_exhaustive(candidates: Sequence[Candidate], budget: float, objective: str = "amplified") -> SelectionResult:
    """Brute-force optimum over all ``2^n`` subsets (``n <= 20``).

    ``objective`` picks what is maximized: ``"amplified"`` (the integer
    utilities the DP solves for) or ``"raw"``. Ties go to the lower total
    bid, then the lexicographically smallest sorted id tuple.
    """
    _check_budget(budget)
    n = len(candidates)
    if n > EXHAUSTIVE_MAX_CANDIDATES:
        raise ValidationError(
            f"exhaustive search refused for {n} candidates (limit {EXHAUSTIVE_MAX_CANDIDATES})"
        )
    if objective not in ("amplified", "raw"):
        raise ValidationError(f"objective must be 'amplified' or 'raw', got {objective!r}")
    if n == 0:
        return _result(candidates, [], "exhaustive")

    # subset sums indexed by bitmask, accumulated in candidate order
    bids = np.zeros(1)
    amps = np.zeros(1, dtype=np.int64)
    raws = np.zeros(1)
    for c in candidates:
        bids = np.concatenate([bids, bids + c.bid_price])
        amps = np.concatenate([amps, amps + c.amplified_utility])
        raws = np.concatenate([raws, raws + c.raw_utility])

    feasible = bids <= budget
    score = (amps if objective == "amplified" else raws).astype(float)
    score = np.where(feasible, score, -np.inf)
    best = score.max()
    tied = np.flatnonzero(score == best)
    cheapest = bids[tied].min()
    tied = tied[bids[tied] == cheapest]

    def ids(mask: int) -> tuple[str, ...]:
        return tuple(sorted(candidates[i].user_id for i in range(n) if mask >> i & 1))

    mask = min((int(m) for m in tied), key=ids)
    return _result(candidates, [i for i in range(n) if mask >> i & 1], "exhaustive")


SOLVERS = ("exact_dp", "fptas", "greedy", "exhaustive")


def select(candidates: Sequence[Candidate], budget: float, solver: str, epsilon: float = 0.1) -> SelectionResult:
    """Dispatch to a solver by name."""
    if solver == "exact_dp":
        return select_exact_dp(candidates, budget)
    if solver == "fptas":
        return select_fptas(candidates, budget, epsilon)
    if solver == "greedy":
        return select_greedy_baseline(candidates, budget)
    if solver == "exhaustive":
        return select_exhaustive(candidates, budget)
    raise ValidationError(f"unknown solver {solver!r}; expected one of {SOLVERS}")
