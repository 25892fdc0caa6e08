"""Seeded end-to-end crowdsensing campaigns and the experiments built on them.

A campaign is a sequence of tasks published by one requester to a fixed
user population. For each task users apply (bid, expected delay), the
platform filters and selects participants, participants submit reports,
reports are assessed and rewarded, and reputations are updated before the
next task.

Every random draw comes from its own stream keyed by
``(seed, purpose, task, user)``. Two consequences the experiments rely on:
a population of size k is exactly the first k users of any larger one, and
different solvers run against identical applications and behaviour.
"""
from __future__ import annotations

import math
import statistics
from dataclasses import dataclass, field, fields
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .assessment import ReportAssessment, assess_reports, delay_deviation_score, make_similarity
from .incentives import (
    DEFAULT_REPUTATION_SCALE,
    ReputationDelta,
    ReputationStore,
    RewardOutcome,
    allocate_reward,
    evaluate_reputation_delta,
)
from .model import (
    Application,
    AssessmentParams,
    MobileUser,
    ReputationParams,
    SensingReport,
    TaskSpec,
    UtilityWeights,
    ValidationError,
    check_keys,
)
from .selection import DEFAULT_AMPLIFICATION, Candidate, SelectionResult, filter_candidates, select

# stream ids for _rng
_USERS, _TASKS, _APPLY, _BEHAVE, _BENCH = range(5)

REPUTATION_DISTRIBUTIONS = ("uniform", "normal")


def _rng(seed: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng([seed, *keys])


def _interval(name: str, value: Sequence[float], positive: bool = False) -> tuple[float, float]:
    try:
        lo, hi = (float(v) for v in value)
    except (TypeError, ValueError):
        raise ValidationError(f"population.{name} must be a [low, high] pair, got {value!r}") from None
    if not lo < hi:
        raise ValidationError(f"population.{name} must satisfy low < high, got {value!r}")
    if positive and lo <= 0:
        raise ValidationError(f"population.{name} must be positive, got {value!r}")
    return lo, hi


@dataclass(frozen=True)
class PopulationModel:
    n_users: int = 20
    attrs_per_user: int = 10
    task_attrs: int = 10
    attribute_universe: int = 30
    expected_delay_range: tuple[float, float] = (1.0, 45.0)
    bid_range: tuple[float, float] = (50.0, 150.0)
    reputation_distribution: str = "uniform"
    reputation_range: tuple[float, float] = (0.1, 1.0)
    reputation_mean: float = 0.55
    reputation_std: float = 0.2
    # users below this reputation report badly with probability 1 - rp
    dishonest_threshold: float = 0.3
    # everyone else reports badly with probability honest_bad_factor * (1 - rp)
    honest_bad_factor: float = 0.4
    # actual-delay sd as a fraction of the expected delay
    delay_noise: float = 0.1
    payload_range: tuple[float, float] = (0.0, 100.0)
    # truthful-report noise sd as a fraction of the payload range
    truthful_noise: float = 0.02

    def __post_init__(self) -> None:
        for name in ("n_users", "attrs_per_user", "task_attrs", "attribute_universe"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ValidationError(f"population.{name} must be an integer >= 1, got {v!r}")
            object.__setattr__(self, name, int(v))
        for name in ("attrs_per_user", "task_attrs"):
            if getattr(self, name) > self.attribute_universe:
                raise ValidationError(
                    f"population.{name}={getattr(self, name)} exceeds attribute_universe={self.attribute_universe}"
                )
        object.__setattr__(self, "expected_delay_range", _interval("expected_delay_range", self.expected_delay_range, True))
        object.__setattr__(self, "bid_range", _interval("bid_range", self.bid_range, True))
        object.__setattr__(self, "reputation_range", _interval("reputation_range", self.reputation_range))
        object.__setattr__(self, "payload_range", _interval("payload_range", self.payload_range))
        if self.reputation_distribution not in REPUTATION_DISTRIBUTIONS:
            raise ValidationError(
                f"population.reputation_distribution must be one of {REPUTATION_DISTRIBUTIONS}, "
                f"got {self.reputation_distribution!r}"
            )
        if not self.reputation_std > 0:
            raise ValidationError(f"population.reputation_std must be > 0, got {self.reputation_std}")
        for name in ("dishonest_threshold", "honest_bad_factor"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise ValidationError(f"population.{name} must be in [0, 1], got {v}")
        for name in ("delay_noise", "truthful_noise"):
            if getattr(self, name) < 0:
                raise ValidationError(f"population.{name} must be >= 0, got {getattr(self, name)}")

    def to_dict(self) -> dict[str, Any]:
        return {f.name: (list(v) if isinstance(v := getattr(self, f.name), tuple) else v) for f in fields(self)}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], where: str = "population") -> PopulationModel:
        check_keys(cls, data, where)
        return cls(**data)


@dataclass(frozen=True)
class BehaviorProfile:
    bad_report_probability: float
    delay_sd_fraction: float

    @classmethod
    def for_reputation(cls, rp: float, population: PopulationModel) -> BehaviorProfile:
        if rp < population.dishonest_threshold:
            p = 1.0 - rp
        else:
            p = population.honest_bad_factor * (1.0 - rp)
        return cls(min(max(p, 0.0), 1.0), population.delay_noise)

    def sample_delay(self, expected_delay: float, rng: np.random.Generator) -> float:
        return max(0.0, float(rng.normal(expected_delay, self.delay_sd_fraction * expected_delay)))


@dataclass(frozen=True)
class TaskTemplate:
    """Everything about a task except its (sampled) interested attributes."""

    budget: float = 500.0
    delay_threshold: float = 45.0
    weights: UtilityWeights = field(default_factory=UtilityWeights)
    assessment: AssessmentParams = field(default_factory=AssessmentParams)

    def __post_init__(self) -> None:
        # reuse TaskSpec validation
        self.make("template", ["_"])

    def make(self, task_id: str, attributes: Iterable[str]) -> TaskSpec:
        return TaskSpec(task_id, frozenset(attributes), self.budget, self.delay_threshold, self.weights, self.assessment)

    def to_dict(self) -> dict[str, Any]:
        return {
            "budget": self.budget,
            "delay_threshold": self.delay_threshold,
            "weights": self.weights.to_dict(),
            "assessment": self.assessment.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], where: str = "task") -> TaskTemplate:
        check_keys(cls, data, where)
        data = dict(data)
        data["weights"] = UtilityWeights.from_dict(data.get("weights", {}), f"{where}.weights")
        data["assessment"] = AssessmentParams.from_dict(data.get("assessment", {}), f"{where}.assessment")
        return cls(**data)


@dataclass(frozen=True)
class SimulatedUser:
    user: MobileUser
    behavior: BehaviorProfile


def attribute_universe(population: PopulationModel) -> list[str]:
    width = len(str(population.attribute_universe - 1))
    return [f"a{i:0{width}d}" for i in range(population.attribute_universe)]


def user_id(i: int) -> str:
    return f"u{i:04d}"


def sample_users(population: PopulationModel, seed: int) -> list[SimulatedUser]:
    universe = attribute_universe(population)
    lo, hi = population.reputation_range
    out = []
    for i in range(population.n_users):
        rng = _rng(seed, _USERS, i)
        attrs = rng.choice(len(universe), size=population.attrs_per_user, replace=False)
        if population.reputation_distribution == "uniform":
            rep = float(rng.uniform(lo, hi))
        else:
            rep = float(np.clip(rng.normal(population.reputation_mean, population.reputation_std), lo, hi))
        user = MobileUser(user_id(i), frozenset(universe[a] for a in attrs), rep)
        out.append(SimulatedUser(user, BehaviorProfile.for_reputation(rep, population)))
    return out


def sample_task_attributes(population: PopulationModel, seed: int, task_index: int) -> tuple[frozenset[str], float]:
    """Interested attributes and the ground-truth payload of one task."""
    universe = attribute_universe(population)
    rng = _rng(seed, _TASKS, task_index)
    attrs = rng.choice(len(universe), size=population.task_attrs, replace=False)
    lo, hi = population.payload_range
    truth = float(rng.uniform(lo, hi))
    return frozenset(universe[a] for a in attrs), truth


def sample_application(population: PopulationModel, seed: int, task_index: int, i: int) -> Application:
    rng = _rng(seed, _APPLY, task_index, i)
    delay = float(rng.uniform(*population.expected_delay_range))
    bid = float(rng.uniform(*population.bid_range))
    return Application(user_id(i), bid, delay)


def sample_report(
    population: PopulationModel,
    sim_user: SimulatedUser,
    application: Application,
    truth: float,
    seed: int,
    task_index: int,
    i: int,
) -> tuple[SensingReport, bool]:
    """A user's report for a task, and whether it was a bad one."""
    rng = _rng(seed, _BEHAVE, task_index, i)
    lo, hi = population.payload_range
    bad = bool(rng.random() < sim_user.behavior.bad_report_probability)
    if bad:
        payload = float(rng.uniform(lo, hi))
    else:
        payload = float(np.clip(truth + rng.normal(0.0, population.truthful_noise * (hi - lo)), lo, hi))
    delay = sim_user.behavior.sample_delay(application.expected_delay, rng)
    return SensingReport(sim_user.user.id, payload, delay), bad


@dataclass(frozen=True)
class SimulationSettings:
    """Solver and mechanism knobs shared by every campaign of an experiment."""

    amplification: int = DEFAULT_AMPLIFICATION
    epsilon: float = 0.1
    n_tasks: int = 1
    reputation_scale: float = DEFAULT_REPUTATION_SCALE
    include_invalid_in_shares: bool = True
    similarity: str = "scalar"

    def __post_init__(self) -> None:
        if int(self.amplification) != self.amplification or self.amplification < 1:
            raise ValidationError(f"simulation.amplification must be an integer >= 1, got {self.amplification!r}")
        if not 0 < self.epsilon < 1:
            raise ValidationError(f"simulation.epsilon must be in (0, 1), got {self.epsilon}")
        if int(self.n_tasks) != self.n_tasks or self.n_tasks < 1:
            raise ValidationError(f"simulation.n_tasks must be an integer >= 1, got {self.n_tasks!r}")
        if not self.reputation_scale > 0:
            raise ValidationError(f"simulation.reputation_scale must be > 0, got {self.reputation_scale}")

    def to_dict(self) -> dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], where: str = "simulation") -> SimulationSettings:
        check_keys(cls, data, where)
        return cls(**data)


@dataclass
class TaskOutcome:
    task: TaskSpec
    n_candidates: int
    selection: SelectionResult
    applications: list[Application]
    reports: list[SensingReport]
    bad_reports: list[bool]
    assessments: list[ReportAssessment]
    rewards: list[RewardOutcome]
    deltas: list[ReputationDelta]
    # participants' stored reputation once this task's update is applied
    reputation_after: dict[str, float]

    @property
    def utility(self) -> float:
        return sum(a.final_score for a in self.assessments)

    @property
    def total_actual_delay(self) -> float:
        return sum(r.actual_delay for r in self.reports)

    @property
    def spend(self) -> float:
        return sum(r.reward for r in self.rewards)


@dataclass
class CampaignResult:
    seed: int
    solver: str
    tasks: list[TaskOutcome]
    reputations: dict[str, float]

    @property
    def utility(self) -> float:
        return sum(t.utility for t in self.tasks)

    @property
    def total_actual_delay(self) -> float:
        return sum(t.total_actual_delay for t in self.tasks)

    @property
    def spend(self) -> float:
        return sum(t.spend for t in self.tasks)

    @property
    def expected_utility(self) -> float:
        return sum(t.selection.achieved_utility for t in self.tasks)

    @property
    def amplified_utility(self) -> int:
        return sum(t.selection.amplified_utility for t in self.tasks)

    @property
    def n_selected(self) -> int:
        return sum(t.selection.size for t in self.tasks)


def run_campaign(
    population: PopulationModel,
    template: TaskTemplate,
    solver: str,
    seed: int,
    rep_params: ReputationParams | None = None,
    settings: SimulationSettings | None = None,
) -> CampaignResult:
    rep_params = rep_params or ReputationParams()
    settings = settings or SimulationSettings()
    users = sample_users(population, seed)
    store = ReputationStore(rep_params, {u.user.id: rep_params.clamp(u.user.reputation) for u in users})
    sim = make_similarity(settings.similarity, range=population.payload_range[1] - population.payload_range[0])

    tasks = []
    for t in range(settings.n_tasks):
        attrs, truth = sample_task_attributes(population, seed, t)
        task = template.make(f"t{t:03d}", attrs)
        apps = [sample_application(population, seed, t, i) for i in range(len(users))]
        current = [
            MobileUser(u.user.id, u.user.attributes, store.get(u.user.id)) for u in users
        ]
        candidates = filter_candidates(zip(current, apps), task, rep_params, settings.amplification)
        selection = select(candidates, task.budget, solver, settings.epsilon)

        chosen = set(selection.selected)
        index = [i for i, u in enumerate(users) if u.user.id in chosen]
        sampled = [sample_report(population, users[i], apps[i], truth, seed, t, i) for i in index]
        reports = [r for r, _ in sampled]
        chosen_apps = [apps[i] for i in index]

        assessments = assess_reports(reports, chosen_apps, task, sim)
        rewards = [allocate_reward(a, app, task.assessment) for a, app in zip(assessments, chosen_apps)]
        deltas = evaluate_reputation_delta(assessments, chosen_apps, rep_params, settings.include_invalid_in_shares)
        store.apply(deltas, settings.reputation_scale)
        tasks.append(TaskOutcome(
            task, len(candidates), selection, chosen_apps, reports, [b for _, b in sampled],
            assessments, rewards, deltas, {r.user_id: store.get(r.user_id) for r in reports},
        ))
    return CampaignResult(seed, solver, tasks, store.snapshot())


def sample_selection_instance(
    population: PopulationModel,
    seed: int,
    weights: UtilityWeights | None = None,
    rep_params: ReputationParams | None = None,
    amplification: int = DEFAULT_AMPLIFICATION,
    delay_threshold: float | None = None,
) -> tuple[list[Candidate], float]:
    """A random selection problem drawn from the population model.

    The budget is uniform between the largest possible bid and half the
    population's total mean bid, so every applicant can afford to bid and
    the budget still binds.
    """
    rep_params = rep_params or ReputationParams()
    users = sample_users(population, seed)
    attrs, _ = sample_task_attributes(population, seed, 0)
    lo, hi = population.bid_range
    top = max(hi, population.n_users * (lo + hi) / 4)
    budget = float(_rng(seed, _BENCH).uniform(hi, top)) if top > hi else hi
    d_t = delay_threshold if delay_threshold is not None else population.expected_delay_range[1]
    task = TaskSpec("bench", attrs, budget, d_t, weights or UtilityWeights())
    apps = [sample_application(population, seed, 0, i) for i in range(len(users))]
    users_now = [MobileUser(u.user.id, u.user.attributes, rep_params.clamp(u.user.reputation)) for u in users]
    return filter_candidates(zip(users_now, apps), task, rep_params, amplification), budget


WEIGHT_PRESETS = ("social", "delay", "reputation", "balanced")


def preset_weights(preset: str, base: UtilityWeights) -> UtilityWeights:
    """Factor-highlighting weights: 0.9 on one factor, 0.05 on the others."""
    floors = {"alpha": base.alpha, "beta": base.beta, "gamma": base.gamma}
    if preset == "balanced":
        return base
    return UtilityWeights.emphasize(preset, **floors)


BUDGET_SWEEP_COLUMNS = (
    "preset", "reputation_distribution", "budget", "solver", "seed",
    "utility", "total_actual_delay", "spend", "n_selected", "expected_utility",
)


def experiment_budget_sweep(
    population: PopulationModel,
    template: TaskTemplate,
    budgets: Sequence[float],
    solvers: Sequence[str],
    seeds: Sequence[int],
    presets: Sequence[str] = ("social", "delay", "reputation"),
    rep_params: ReputationParams | None = None,
    settings: SimulationSettings | None = None,
) -> list[dict[str, Any]]:
    if any(b2 < b1 for b1, b2 in zip(budgets, budgets[1:])):
        raise ValidationError(f"budgets must be ascending, got {list(budgets)}")
    rows = []
    for preset in presets:
        weights = preset_weights(preset, template.weights)
        for budget in budgets:
            tmpl = TaskTemplate(budget, template.delay_threshold, weights, template.assessment)
            for solver in solvers:
                for seed in seeds:
                    res = run_campaign(population, tmpl, solver, seed, rep_params, settings)
                    rows.append({
                        "preset": preset,
                        "reputation_distribution": population.reputation_distribution,
                        "budget": budget,
                        "solver": solver,
                        "seed": seed,
                        "utility": res.utility,
                        "total_actual_delay": res.total_actual_delay,
                        "spend": res.spend,
                        "n_selected": res.n_selected,
                        "expected_utility": res.expected_utility,
                    })
    return rows


USER_SWEEP_COLUMNS = (
    "n_users", "solver", "seed", "utility", "expected_utility", "amplified_utility", "n_selected",
)


def experiment_user_sweep(
    population: PopulationModel,
    template: TaskTemplate,
    sizes: Sequence[int],
    solvers: Sequence[str],
    seeds: Sequence[int],
    rep_params: ReputationParams | None = None,
    settings: SimulationSettings | None = None,
) -> list[dict[str, Any]]:
    """Campaigns over nested populations of increasing size at a fixed budget."""
    if any(s2 < s1 for s1, s2 in zip(sizes, sizes[1:])):
        raise ValidationError(f"population sizes must be ascending, got {list(sizes)}")
    rows = []
    for size in sizes:
        pop = PopulationModel(**{**population.to_dict(), "n_users": size})
        for solver in solvers:
            for seed in seeds:
                res = run_campaign(pop, template, solver, seed, rep_params, settings)
                rows.append({
                    "n_users": size,
                    "solver": solver,
                    "seed": seed,
                    "utility": res.utility,
                    "expected_utility": res.expected_utility,
                    "amplified_utility": res.amplified_utility,
                    "n_selected": res.n_selected,
                })
    return rows


REWARD_SURFACE_COLUMNS = ("veracity", "actual_delay", "valid", "delay_score", "quality", "reward")
REPUTATION_SURFACE_COLUMNS = ("quality", "bid_price", "quality_share", "bid_share", "delta")


def experiment_reward_surface(
    bid: float = 1000.0,
    expected_delay: float = 20.0,
    delay_threshold: float = 40.0,
    assessment: AssessmentParams | None = None,
    veracity_grid: Sequence[float] = tuple(i / 20 for i in range(21)),
    delay_grid: Sequence[float] = tuple(float(d) for d in range(0, 46)),
) -> list[dict[str, Any]]:
    """Reward paid for every (veracity, actual delay) grid point."""
    assessment = assessment or AssessmentParams()
    task = TaskSpec("surface", frozenset({"_"}), bid, delay_threshold, UtilityWeights(), assessment)
    app = Application("k", bid, expected_delay)
    rows = []
    for ad in delay_grid:
        for phi in veracity_grid:
            if not 0 <= phi <= 1:
                raise ValidationError(f"veracity grid point {phi} outside [0, 1]")
            valid = ad <= delay_threshold
            if valid:
                zeta = delay_deviation_score(ad, expected_delay, task, assessment, "k")
                quality = assessment.w_x * phi + (1 - assessment.w_x) * zeta
            else:
                zeta = quality = 0.0
            reward = allocate_reward(ReportAssessment("k", phi, zeta, quality, valid), app, assessment).reward
            rows.append({
                "veracity": phi, "actual_delay": ad, "valid": int(valid),
                "delay_score": zeta, "quality": quality, "reward": reward,
            })
    return rows


def experiment_reputation_surface(
    rep_params: ReputationParams | None = None,
    quality_grid: Sequence[float] = tuple(i / 20 for i in range(21)),
    bid_grid: Sequence[float] = (250.0, 500.0, 1000.0, 1500.0, 2000.0),
    peers: int = 9,
    peer_quality: float = 0.6,
    peer_bid: float = 1000.0,
) -> list[dict[str, Any]]:
    """Reputation delta of one participant against a fixed pool of peers.

    Each grid point is a task with the participant plus ``peers`` identical
    peers, evaluated through the same code path as a real task.
    """
    rep_params = rep_params or ReputationParams()
    rows = []
    for bid in bid_grid:
        for q in quality_grid:
            assessments = [ReportAssessment("k", q, 1.0, q, True)]
            apps = [Application("k", bid, 1.0)]
            for p in range(peers):
                assessments.append(ReportAssessment(f"p{p}", peer_quality, 1.0, peer_quality, True))
                apps.append(Application(f"p{p}", peer_bid, 1.0))
            delta = evaluate_reputation_delta(assessments, apps, rep_params)[0].delta
            v_sum = q + peers * peer_quality
            rows.append({
                "quality": q,
                "bid_price": bid,
                "quality_share": q / v_sum if v_sum > 0 else 0.0,
                "bid_share": bid / (bid + peers * peer_bid),
                "delta": delta,
            })
    return rows


def summarize(rows: Sequence[Mapping[str, Any]], keys: Sequence[str], metrics: Sequence[str]) -> list[dict[str, Any]]:
    """Mean and sample stddev of ``metrics`` per distinct ``keys`` cell, in first-seen order."""
    cells: dict[tuple, list[Mapping[str, Any]]] = {}
    for row in rows:
        cells.setdefault(tuple(row[k] for k in keys), []).append(row)
    out = []
    for key, group in cells.items():
        entry: dict[str, Any] = dict(zip(keys, key))
        entry["runs"] = len(group)
        for m in metrics:
            vals = [float(r[m]) for r in group]
            entry[f"{m}_mean"] = statistics.fmean(vals)
            entry[f"{m}_std"] = statistics.stdev(vals) if len(vals) > 1 else 0.0
        out.append(entry)
    return out


def mean_by(rows: Sequence[Mapping[str, Any]], metric: str, **match: Any) -> float:
    vals = [float(r[metric]) for r in rows if all(r[k] == v for k, v in match.items())]
    if not vals:
        raise ValidationError(f"no rows match {match}")
    return math.fsum(vals) / len(vals)
