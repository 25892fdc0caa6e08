"""Experiment configuration: a single JSON file, fully validated, defaults filled in."""
from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Mapping

from .model import ReputationParams, ValidationError, check_keys
from .selection import EXHAUSTIVE_MAX_CANDIDATES, SOLVERS
from .simulator import (
    REPUTATION_DISTRIBUTIONS,
    WEIGHT_PRESETS,
    PopulationModel,
    SimulationSettings,
    TaskTemplate,
)


class ConfigError(ValidationError):
    pass


def _float_list(where: str, value: Any, lo: float | None = None, hi: float | None = None) -> tuple[float, ...]:
    if not isinstance(value, (list, tuple)) or not value:
        raise ConfigError(f"{where} must be a non-empty list of numbers")
    out = []
    for v in value:
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"{where} must contain numbers, got {v!r}")
        if (lo is not None and v < lo) or (hi is not None and v > hi):
            raise ConfigError(f"{where} values must lie in [{lo}, {hi}], got {v}")
        out.append(float(v))
    return tuple(out)


def _int_list(where: str, value: Any, minimum: int = 0) -> tuple[int, ...]:
    if not isinstance(value, (list, tuple)) or not value:
        raise ConfigError(f"{where} must be a non-empty list of integers")
    for v in value:
        if isinstance(v, bool) or not isinstance(v, int) or v < minimum:
            raise ConfigError(f"{where} must contain integers >= {minimum}, got {v!r}")
    return tuple(value)


def _ascending(where: str, values: tuple) -> None:
    if any(b < a for a, b in zip(values, values[1:])):
        raise ConfigError(f"{where} must be ascending, got {list(values)}")


def _choices(where: str, value: Any, allowed: tuple[str, ...]) -> tuple[str, ...]:
    if not isinstance(value, (list, tuple)) or not value:
        raise ConfigError(f"{where} must be a non-empty list")
    for v in value:
        if v not in allowed:
            raise ConfigError(f"{where}: unknown entry {v!r}; allowed: {list(allowed)}")
    return tuple(value)


@dataclass(frozen=True)
class BudgetSweep:
    budgets: tuple[float, ...] = (100.0, 200.0, 300.0, 400.0, 500.0, 600.0, 700.0, 800.0, 900.0, 1000.0)
    presets: tuple[str, ...] = ("social", "delay", "reputation")
    reputation_distributions: tuple[str, ...] = ("uniform", "normal")

    def __post_init__(self) -> None:
        object.__setattr__(self, "budgets", _float_list("budget_sweep.budgets", self.budgets, lo=0))
        _ascending("budget_sweep.budgets", self.budgets)
        object.__setattr__(self, "presets", _choices("budget_sweep.presets", self.presets, WEIGHT_PRESETS))
        object.__setattr__(
            self,
            "reputation_distributions",
            _choices("budget_sweep.reputation_distributions", self.reputation_distributions, REPUTATION_DISTRIBUTIONS),
        )


@dataclass(frozen=True)
class UserSweep:
    sizes: tuple[int, ...] = tuple(range(5, 51, 5))
    budget: float = 500.0
    preset: str = "balanced"

    def __post_init__(self) -> None:
        object.__setattr__(self, "sizes", _int_list("user_sweep.sizes", self.sizes, minimum=1))
        _ascending("user_sweep.sizes", self.sizes)
        if isinstance(self.budget, bool) or not isinstance(self.budget, (int, float)) or self.budget < 0:
            raise ConfigError(f"user_sweep.budget must be a number >= 0, got {self.budget!r}")
        if self.preset not in WEIGHT_PRESETS:
            raise ConfigError(f"user_sweep.preset must be one of {list(WEIGHT_PRESETS)}, got {self.preset!r}")


@dataclass(frozen=True)
class RewardSurface:
    bid: float = 1000.0
    expected_delay: float = 20.0
    delay_threshold: float = 40.0
    veracity_grid: tuple[float, ...] = tuple(i / 20 for i in range(21))
    delay_grid: tuple[float, ...] = tuple(float(d) for d in range(46))
    quality_grid: tuple[float, ...] = tuple(i / 20 for i in range(21))
    bid_grid: tuple[float, ...] = (250.0, 500.0, 1000.0, 1500.0, 2000.0)
    peers: int = 9
    peer_quality: float = 0.6
    peer_bid: float = 1000.0

    def __post_init__(self) -> None:
        for name in ("bid", "expected_delay", "delay_threshold", "peer_bid"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, float)) or v <= 0:
                raise ConfigError(f"reward_surface.{name} must be a number > 0, got {v!r}")
        if self.expected_delay > self.delay_threshold:
            raise ConfigError("reward_surface.expected_delay must not exceed reward_surface.delay_threshold")
        object.__setattr__(self, "veracity_grid", _float_list("reward_surface.veracity_grid", self.veracity_grid, 0, 1))
        object.__setattr__(self, "delay_grid", _float_list("reward_surface.delay_grid", self.delay_grid, lo=0))
        object.__setattr__(self, "quality_grid", _float_list("reward_surface.quality_grid", self.quality_grid, 0, 1))
        object.__setattr__(self, "bid_grid", _float_list("reward_surface.bid_grid", self.bid_grid, lo=1e-12))
        if isinstance(self.peers, bool) or not isinstance(self.peers, int) or self.peers < 0:
            raise ConfigError(f"reward_surface.peers must be an integer >= 0, got {self.peers!r}")
        if not 0 <= self.peer_quality <= 1:
            raise ConfigError(f"reward_surface.peer_quality must be in [0, 1], got {self.peer_quality}")


@dataclass(frozen=True)
class SelectionBench:
    sizes: tuple[int, ...] = (10, 11, 12)
    instances: int = 20
    epsilons: tuple[float, ...] = (0.1, 0.3, 0.5)

    def __post_init__(self) -> None:
        object.__setattr__(self, "sizes", _int_list("selection_bench.sizes", self.sizes, minimum=1))
        if isinstance(self.instances, bool) or not isinstance(self.instances, int) or self.instances < 1:
            raise ConfigError(f"selection_bench.instances must be an integer >= 1, got {self.instances!r}")
        eps = _float_list("selection_bench.epsilons", self.epsilons)
        if any(not 0 < e < 1 for e in eps):
            raise ConfigError(f"selection_bench.epsilons must lie in (0, 1), got {list(eps)}")
        object.__setattr__(self, "epsilons", eps)


_SECTIONS = {
    "budget_sweep": BudgetSweep,
    "user_sweep": UserSweep,
    "reward_surface": RewardSurface,
    "selection_bench": SelectionBench,
}


def _section(cls: type, data: Any, where: str):
    check_keys(cls, data, where)
    try:
        return cls(**data)
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from None


@dataclass(frozen=True)
class ExperimentConfig:
    population: PopulationModel = field(default_factory=PopulationModel)
    task: TaskTemplate = field(default_factory=TaskTemplate)
    reputation: ReputationParams = field(default_factory=ReputationParams)
    simulation: SimulationSettings = field(default_factory=SimulationSettings)
    solvers: tuple[str, ...] = ("exact_dp", "greedy")
    seeds: tuple[int, ...] = tuple(range(30))
    budget_sweep: BudgetSweep = field(default_factory=BudgetSweep)
    user_sweep: UserSweep = field(default_factory=UserSweep)
    reward_surface: RewardSurface = field(default_factory=RewardSurface)
    selection_bench: SelectionBench = field(default_factory=SelectionBench)
    output: str = "results"

    def __post_init__(self) -> None:
        object.__setattr__(self, "solvers", _choices("solvers", self.solvers, SOLVERS))
        object.__setattr__(self, "seeds", _int_list("seeds", self.seeds))
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError(f"seeds must be distinct, got {list(self.seeds)}")
        if "exhaustive" in self.solvers and self.population.n_users > EXHAUSTIVE_MAX_CANDIDATES:
            raise ConfigError(
                f"solver 'exhaustive' needs population.n_users <= {EXHAUSTIVE_MAX_CANDIDATES}, "
                f"got {self.population.n_users}"
            )

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if hasattr(v, "to_dict"):
                out[f.name] = v.to_dict()
            elif f.name in _SECTIONS:
                out[f.name] = {g.name: _plain(getattr(v, g.name)) for g in fields(v)}
            else:
                out[f.name] = _plain(v)
        return out

    def config_hash(self) -> str:
        """Digest of every effective parameter (the output location excluded)."""
        d = self.to_dict()
        d.pop("output")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()

    def with_overrides(self, seed_offset: int = 0, solver: str | None = None, output: str | None = None) -> ExperimentConfig:
        d = self.to_dict()
        d["seeds"] = [s + seed_offset for s in self.seeds]
        if solver is not None:
            d["solvers"] = [solver]
        if output is not None:
            d["output"] = output
        return config_from_dict(d)


def _plain(v: Any) -> Any:
    return list(v) if isinstance(v, tuple) else v


def config_from_dict(data: Mapping[str, Any]) -> ExperimentConfig:
    kw: dict[str, Any] = {}
    try:
        check_keys(ExperimentConfig, data, "config")
        if "population" in data:
            kw["population"] = PopulationModel.from_dict(data["population"])
        if "task" in data:
            kw["task"] = TaskTemplate.from_dict(data["task"])
        if "reputation" in data:
            kw["reputation"] = ReputationParams.from_dict(data["reputation"])
        if "simulation" in data:
            kw["simulation"] = SimulationSettings.from_dict(data["simulation"])
        for name, cls in _SECTIONS.items():
            if name in data:
                kw[name] = _section(cls, data[name], name)
        if "solvers" in data:
            kw["solvers"] = data["solvers"]
        if "seeds" in data:
            seeds = data["seeds"]
            # an integer n means seeds 0..n-1
            if isinstance(seeds, int) and not isinstance(seeds, bool):
                if seeds < 1:
                    raise ConfigError(f"seeds: a seed count must be >= 1, got {seeds}")
                seeds = list(range(seeds))
            kw["seeds"] = seeds
        if "output" in data:
            if not isinstance(data["output"], str) or not data["output"]:
                raise ConfigError(f"output must be a non-empty path string, got {data['output']!r}")
            kw["output"] = data["output"]
        return ExperimentConfig(**kw)
    except ConfigError:
        raise
    except (ValidationError, TypeError) as exc:
        raise ConfigError(str(exc)) from None


def load_config(path: str | os.PathLike) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return config_from_dict(data)
