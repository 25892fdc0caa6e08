"""Quality assessment of submitted sensing reports.

A report's final score mixes its veracity (how strongly the other reports of
the same task corroborate it) with a timeliness score that penalizes actual
delays beyond the promised one. Late reports, past the task's delay
threshold, are invalid and score 0.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Any, Callable, Sequence

from .model import (
    Application,
    AssessmentParams,
    ConfigurationError,
    SensingReport,
    TaskSpec,
    ValidationError,
)


class SingleReportWarning(UserWarning):
    """A task ended up with one report, so nothing could corroborate it."""


SimilarityFunction = Callable[[Any, Any], float]

_SIMILARITIES: dict[str, Callable[..., SimilarityFunction]] = {}


def register_similarity(name: str):
    """Register a similarity factory under a config key.

    The factory receives the keyword options from the config and returns a
    symmetric ``(payload, payload) -> [-1, 1]`` function.
    """
    def deco(factory):
        _SIMILARITIES[name] = factory
        return factory
    return deco


def make_similarity(name: str = "scalar", **options: Any) -> SimilarityFunction:
    try:
        factory = _SIMILARITIES[name]
    except KeyError:
        raise ValidationError(f"unknown similarity {name!r}; registered: {sorted(_SIMILARITIES)}") from None
    return factory(**options)


def default_scalar_similarity(a: float, b: float, range: float) -> float:
    """Linear similarity of two scalars: 1 when equal, -1 when ``range`` apart."""
    if not range > 0:
        raise ValidationError(f"similarity range must be > 0, got {range}")
    return min(max(1.0 - 2.0 * abs(float(a) - float(b)) / range, -1.0), 1.0)


@register_similarity("scalar")
def scalar_similarity(range: float = 100.0) -> SimilarityFunction:
    if not range > 0:
        raise ValidationError(f"similarity range must be > 0, got {range}")

    def sim(a: Any, b: Any) -> float:
        return default_scalar_similarity(a, b, range)
    return sim


@dataclass(frozen=True)
class ReportAssessment:
    user_id: str
    veracity: float
    delay_score: float
    final_score: float
    valid: bool


def _clamp01(x: float) -> float:
    return min(max(x, 0.0), 1.0)


def veracity_score(
    reports: Sequence[SensingReport],
    target: int,
    sim: SimilarityFunction,
    mode: str = "clamp",
) -> float:
    """Corroboration score of ``reports[target]`` against every other report.

    ``mode="clamp"`` evaluates ``(1 + sum(S) * exp(-1/n)) / (2 (n - 1))``
    and clips it to [0, 1]; ``"renormalized"`` averages the similarities
    first, ``(1 + mean(S) * exp(-1/n)) / 2``, which needs no clipping.
    A lone report is uncorroborated and scores 0.5.
    """
    n = len(reports)
    if not 0 <= target < n:
        raise IndexError(f"report index {target} out of range for {n} reports")
    if n == 1:
        warnings.warn("veracity of a single report is undefined; using 0.5", SingleReportWarning, stacklevel=2)
        return 0.5
    mine = reports[target].payload
    total = 0.0
    for j, other in enumerate(reports):
        if j != target:
            total += min(max(sim(mine, other.payload), -1.0), 1.0)
    damp = math.exp(-1.0 / n)
    if mode == "clamp":
        return _clamp01((1.0 + total * damp) / (2.0 * (n - 1)))
    if mode == "renormalized":
        return _clamp01((1.0 + total / (n - 1) * damp) / 2.0)
    raise ValidationError(f"unknown veracity mode {mode!r}")


def delay_deviation_score(
    actual_delay: float,
    expected_delay: float,
    task: TaskSpec,
    params: AssessmentParams,
    user_id: str | None = None,
) -> float:
    """Timeliness score: 1 up to ``expected_delay + sigma``, then exponential decay.

    At the task's delay threshold the score bottoms out at
    ``1 - vartheta * (1 - exp(-phi1))``.
    """
    d_t = task.delay_threshold
    who = f"participant {user_id}" if user_id is not None else "participant"
    if params.sigma > d_t - expected_delay:
        raise ConfigurationError(
            f"{who}: sigma={params.sigma} exceeds delay_threshold - expected_delay = {d_t - expected_delay}"
        )
    if actual_delay > d_t:
        raise ValidationError(f"{who}: actual delay {actual_delay} exceeds the delay threshold {d_t}")
    slack = expected_delay + params.sigma
    if actual_delay <= slack:
        return 1.0
    ratio = (slack - actual_delay) / (d_t - slack)
    return _clamp01(1.0 - params.vartheta * -math.expm1(ratio * params.phi1))


def check_sigma(applications: Sequence[Application], task: TaskSpec) -> None:
    """Validate ``0 <= sigma <= d_t - max(expected delay)`` for a selected set."""
    if not applications:
        return
    worst = max(applications, key=lambda a: a.expected_delay)
    if task.assessment.sigma > task.delay_threshold - worst.expected_delay:
        raise ConfigurationError(
            f"participant {worst.user_id}: sigma={task.assessment.sigma} exceeds "
            f"delay_threshold - expected_delay = {task.delay_threshold - worst.expected_delay}"
        )


def assess_report(
    report: SensingReport,
    all_reports: Sequence[SensingReport],
    application: Application,
    task: TaskSpec,
    sim: SimilarityFunction | None = None,
) -> ReportAssessment:
    """Final quality score of ``report`` within its task's report collection."""
    params = task.assessment
    sim = sim or scalar_similarity()
    if report.user_id != application.user_id:
        raise ValidationError(f"report from {report.user_id!r} paired with application of {application.user_id!r}")
    try:
        idx = next(i for i, r in enumerate(all_reports) if r is report or r == report)
    except StopIteration:
        raise ValidationError(f"report from {report.user_id!r} is not in the report collection") from None

    phi = veracity_score(all_reports, idx, sim, params.veracity_mode)
    if report.actual_delay > task.delay_threshold:
        return ReportAssessment(report.user_id, phi, 0.0, 0.0, False)
    zeta = delay_deviation_score(report.actual_delay, application.expected_delay, task, params, report.user_id)
    score = _clamp01(params.w_x * phi + (1.0 - params.w_x) * zeta)
    return ReportAssessment(report.user_id, phi, zeta, score, True)


def assess_reports(
    reports: Sequence[SensingReport],
    applications: Sequence[Application],
    task: TaskSpec,
    sim: SimilarityFunction | None = None,
) -> list[ReportAssessment]:
    """Assess every report of a task; ``applications`` align with ``reports``."""
    if len(reports) != len(applications):
        raise ValidationError(f"{len(reports)} reports but {len(applications)} applications")
    check_sigma(applications, task)
    sim = sim or scalar_similarity()
    return [assess_report(r, reports, a, task, sim) for r, a in zip(reports, applications)]
