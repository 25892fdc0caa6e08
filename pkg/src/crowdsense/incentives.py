"""Reward allocation and reputation management.

Rewards pay the full bid for reports at or above the quality threshold and
decay exponentially below it. Reputation deltas are asymmetric: a flat
``-eta`` punishment below the threshold, and a bounded reward that grows with
the participant's cost-performance ratio (quality share over bid share)
above it.
"""
from __future__ import annotations

import csv
import math
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

from .assessment import ReportAssessment
from .model import Application, AssessmentParams, OutOfRangeError, ReputationParams, ValidationError

DEFAULT_REPUTATION_SCALE = 1e-3


@dataclass(frozen=True)
class RewardOutcome:
    user_id: str
    reward: float
    bid_price: float


@dataclass(frozen=True)
class ReputationDelta:
    user_id: str
    delta: float


def allocate_reward(assessment: ReportAssessment, application: Application, params: AssessmentParams) -> RewardOutcome:
    bid = application.bid_price
    if not assessment.valid:
        reward = 0.0
    elif assessment.final_score >= params.quality_threshold:
        reward = bid
    else:
        reward = bid * math.exp((assessment.final_score - params.quality_threshold) * params.phi2)
    return RewardOutcome(assessment.user_id, reward, bid)


def evaluate_reputation_delta(
    assessments: Sequence[ReportAssessment],
    applications: Sequence[Application],
    params: ReputationParams,
    include_invalid: bool = True,
) -> list[ReputationDelta]:
    """Per-participant reputation change for one task.

    Quality and bid shares are taken over the whole participant set; with
    ``include_invalid=False`` late (invalid) reports are left out of both
    totals. They are still punished.
    """
    if len(assessments) != len(applications):
        raise ValidationError(f"{len(assessments)} assessments but {len(applications)} applications")
    for a, app in zip(assessments, applications):
        if a.user_id != app.user_id:
            raise ValidationError(f"assessment of {a.user_id!r} aligned with application of {app.user_id!r}")

    pool = [(a, app) for a, app in zip(assessments, applications) if include_invalid or a.valid]
    v_sum = sum(a.final_score for a, _ in pool)
    b_sum = sum(app.bid_price for _, app in pool)

    out = []
    for a, app in zip(assessments, applications):
        if v_sum > 0 and a.final_score >= params.quality_threshold:
            ratio = (a.final_score / v_sum) / (app.bid_price / b_sum)
            delta = params.kappa * -math.expm1(-ratio)
        else:
            delta = -params.eta
        out.append(ReputationDelta(a.user_id, delta))
    return out


class ReputationStore:
    """The platform's reputation ledger, clamped to ``[r_min, r_max]``.

    Users seen for the first time start at ``r_init``.
    """

    def __init__(self, params: ReputationParams, initial: Mapping[str, float] | None = None):
        self.params = params
        self._values: dict[str, float] = {}
        for user_id, value in (initial or {}).items():
            self.set(user_id, value)

    def __contains__(self, user_id: str) -> bool:
        return user_id in self._values

    def __len__(self) -> int:
        return len(self._values)

    def __iter__(self) -> Iterator[str]:
        return iter(self._values)

    def get(self, user_id: str) -> float:
        return self._values.setdefault(user_id, self.params.r_init)

    def set(self, user_id: str, value: float) -> None:
        value = float(value)
        if not self.params.r_min <= value <= self.params.r_max:
            raise OutOfRangeError(
                f"reputation of {user_id!r} = {value} outside [{self.params.r_min}, {self.params.r_max}]"
            )
        self._values[user_id] = value

    def snapshot(self) -> dict[str, float]:
        return dict(self._values)

    def apply(self, deltas: Iterable[ReputationDelta], scale: float = DEFAULT_REPUTATION_SCALE) -> ReputationStore:
        """Add ``scale * delta`` to each user's reputation and clamp."""
        if not scale > 0:
            raise ValidationError(f"reputation scale must be > 0, got {scale}")
        for d in deltas:
            self._values[d.user_id] = self.params.clamp(self.get(d.user_id) + scale * d.delta)
        return self

    def save(self, path: str | os.PathLike) -> None:
        """Write a ``user_id,reputation`` CSV snapshot atomically."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["user_id", "reputation"])
                for user_id in sorted(self._values):
                    w.writerow([user_id, repr(self._values[user_id])])
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

    @classmethod
    def load(cls, path: str | os.PathLike, params: ReputationParams) -> ReputationStore:
        store = cls(params)
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames != ["user_id", "reputation"]:
                raise ValidationError(f"{path}: expected header user_id,reputation, got {reader.fieldnames}")
            for row in reader:
                store.set(row["user_id"], float(row["reputation"]))
        return store


def apply_reputation_update(
    store: ReputationStore,
    deltas: Iterable[ReputationDelta],
    scale: float = DEFAULT_REPUTATION_SCALE,
) -> ReputationStore:
    return store.apply(deltas, scale)
