"""Per-factor utilities of recruiting a user, and their weighted combination.

All three factor utilities map into ``(0, 1]``, so any convex combination of
them does too.
"""
from __future__ import annotations

import math
from typing import AbstractSet

from .model import (
    Application,
    InfeasibleCandidateError,
    InvalidTaskError,
    MobileUser,
    OutOfRangeError,
    ReputationParams,
    TaskSpec,
    ValidationError,
)

_LAMBDA_SCALE = math.e - 1.0


def _check_floor(name: str, value: float) -> None:
    if not 0 < value < 1:
        raise ValidationError(f"{name} must be in (0, 1), got {value}")


def social_attribute_utility(user_attrs: AbstractSet[str], task_attrs: AbstractSet[str], alpha: float) -> float:
    """Utility linear in the fraction of the task's attributes the user shares.

    ``alpha`` is the floor awarded with no overlap at all; full coverage of
    the task's attributes gives exactly 1.
    """
    if not task_attrs:
        raise InvalidTaskError("task attribute set is empty")
    _check_floor("alpha", alpha)
    ratio = len(user_attrs & task_attrs) / len(task_attrs)
    if ratio == 1.0:
        return 1.0
    return (1.0 - alpha) * ratio + alpha


def delay_utility(expected_delay: float, delay_threshold: float, beta: float) -> float:
    """Utility of a user's expected delay, decaying to ``beta`` at the threshold."""
    _check_floor("beta", beta)
    if expected_delay > delay_threshold:
        raise InfeasibleCandidateError(
            f"expected delay {expected_delay} exceeds the delay threshold {delay_threshold}"
        )
    if expected_delay <= 0:
        raise ValidationError(f"expected delay must be > 0, got {expected_delay}")
    return (1.0 - beta) * -math.expm1(expected_delay - delay_threshold) + beta


def reputation_utility(reputation: float, params: ReputationParams, gamma: float) -> float:
    """Piecewise utility of a stored reputation value.

    Logarithmic growth from ``gamma`` at the initial reputation up to 1 at the
    maximum; exponential decay below the initial value.
    """
    _check_floor("gamma", gamma)
    if not params.r_min <= reputation <= params.r_max:
        raise OutOfRangeError(
            f"reputation {reputation} outside [{params.r_min}, {params.r_max}]"
        )
    r0 = params.r_init
    if reputation >= r0:
        if reputation == params.r_max:
            return 1.0
        lam = _LAMBDA_SCALE * (reputation - r0) / (params.r_max - r0)
        return gamma + (1.0 - gamma) * math.log1p(lam)
    return gamma * math.exp(reputation - r0)


def expected_utility(
    user: MobileUser,
    application: Application,
    task: TaskSpec,
    rep_params: ReputationParams,
) -> float:
    """Weighted utility of recruiting ``user`` for ``task``; lies in (0, 1]."""
    if application.bid_price > task.budget:
        raise InfeasibleCandidateError(
            f"user {user.id}: bid {application.bid_price} exceeds the task budget {task.budget}"
        )
    w = task.weights
    f = social_attribute_utility(user.attributes, task.interested_attributes, w.alpha)
    g = delay_utility(application.expected_delay, task.delay_threshold, w.beta)
    h = reputation_utility(user.reputation, rep_params, w.gamma)
    return min(w.w_s * f + w.w_d * g + w.w_r * h, 1.0)
