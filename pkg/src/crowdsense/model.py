"""Domain types shared across the crowdsensing pipeline.

Every type is a frozen dataclass that validates its invariants on
construction, and converts to and from plain ``dict`` values (the JSON
config and result formats are built on top of these).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, fields
from typing import Any, Iterable, Mapping

WEIGHT_SUM_TOL = 1e-9

SocialAttributeSet = frozenset


class ValidationError(ValueError):
    """A value violates one of its type's invariants."""


class InvalidTaskError(ValidationError):
    pass


class InfeasibleCandidateError(ValueError):
    """An application cannot be scored because it violates the task constraints."""


class OutOfRangeError(ValueError):
    pass


class ConfigurationError(ValueError):
    """Parameters are individually valid but inconsistent with each other."""


def attribute_set(attrs: Iterable[Any]) -> frozenset[str]:
    """Normalize an iterable of attribute tokens to a frozenset of strings."""
    if isinstance(attrs, str):
        raise ValidationError("attributes must be an iterable of tokens, not a single string")
    return frozenset(str(a) for a in attrs)


def _require(cond: bool, msg: str, exc: type[Exception] = ValidationError) -> None:
    if not cond:
        raise exc(msg)


def _finite(name: str, value: float) -> float:
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise ValidationError(f"{name} must be a real number, got {value!r}") from None
    _require(math.isfinite(value), f"{name} must be finite, got {value!r}")
    return value


def check_keys(cls: type, data: Mapping[str, Any], where: str) -> None:
    """Reject keys that are not fields of the dataclass ``cls``."""
    if not isinstance(data, Mapping):
        raise ValidationError(f"{where}: expected a mapping, got {type(data).__name__}")
    allowed = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ValidationError(f"{where}: unknown key(s) {unknown}; allowed: {sorted(allowed)}")


@dataclass(frozen=True)
class ReputationParams:
    r_min: float = 0.1
    r_max: float = 1.0
    r_init: float = 0.5
    kappa: float = 20.0
    eta: float = 200.0
    quality_threshold: float = 0.35

    def __post_init__(self) -> None:
        for f in fields(self):
            object.__setattr__(self, f.name, _finite(f"reputation.{f.name}", getattr(self, f.name)))
        _require(
            self.r_min < self.r_init < self.r_max,
            f"reputation: need r_min < r_init < r_max, got {self.r_min}, {self.r_init}, {self.r_max}",
        )
        _require(self.kappa > 0, f"reputation.kappa must be > 0, got {self.kappa}")
        _require(self.eta > 0, f"reputation.eta must be > 0, got {self.eta}")
        _require(self.eta >= self.kappa, f"reputation: need eta >= kappa, got eta={self.eta}, kappa={self.kappa}")
        if self.eta < 10 * self.kappa:
            warnings.warn(
                f"reputation: eta={self.eta} is less than 10*kappa={10 * self.kappa}; "
                "the punishment should dominate the reward",
                stacklevel=3,
            )
        _require(
            0 < self.quality_threshold < 1,
            f"reputation.quality_threshold must be in (0, 1), got {self.quality_threshold}",
        )

    def clamp(self, value: float) -> float:
        return min(max(value, self.r_min), self.r_max)

    def to_dict(self) -> dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], where: str = "reputation") -> ReputationParams:
        check_keys(cls, data, where)
        return cls(**data)


@dataclass(frozen=True)
class UtilityWeights:
    w_s: float = 1 / 3
    w_d: float = 1 / 3
    w_r: float = 1 / 3
    alpha: float = 0.2
    beta: float = 0.2
    gamma: float = 0.5

    def __post_init__(self) -> None:
        for f in fields(self):
            object.__setattr__(self, f.name, _finite(f"weights.{f.name}", getattr(self, f.name)))
        for name in ("w_s", "w_d", "w_r"):
            w = getattr(self, name)
            _require(0 <= w <= 1, f"weights.{name} must be in [0, 1], got {w}")
        total = self.w_s + self.w_d + self.w_r
        _require(
            abs(total - 1) <= WEIGHT_SUM_TOL,
            f"weights: w_s + w_d + w_r must equal 1 (within {WEIGHT_SUM_TOL}), got {total!r}",
        )
        for name in ("alpha", "beta", "gamma"):
            v = getattr(self, name)
            _require(0 < v < 1, f"weights.{name} must be in (0, 1), got {v}")

    @classmethod
    def emphasize(cls, factor: str, major: float = 0.9, minor: float = 0.05, **defaults: float) -> UtilityWeights:
        """Weights with one factor dominant and the other two set to ``minor``."""
        keys = {"social": "w_s", "delay": "w_d", "reputation": "w_r"}
        if factor not in keys:
            raise ValidationError(f"unknown factor {factor!r}; expected one of {sorted(keys)}")
        w = {k: minor for k in keys.values()}
        w[keys[factor]] = major
        return cls(**w, **defaults)

    def to_dict(self) -> dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], where: str = "weights") -> UtilityWeights:
        check_keys(cls, data, where)
        return cls(**data)


VERACITY_MODES = ("clamp", "renormalized")


@dataclass(frozen=True)
class AssessmentParams:
    w_x: float = 0.6
    sigma: float = 0.0
    vartheta: float = 1.0
    phi1: float = 5.0
    phi2: float = 2.0
    quality_threshold: float = 0.35
    veracity_mode: str = "clamp"

    def __post_init__(self) -> None:
        for f in fields(self):
            if f.name != "veracity_mode":
                object.__setattr__(self, f.name, _finite(f"assessment.{f.name}", getattr(self, f.name)))
        _require(0 <= self.w_x <= 1, f"assessment.w_x must be in [0, 1], got {self.w_x}")
        _require(self.sigma >= 0, f"assessment.sigma must be >= 0, got {self.sigma}")
        _require(0 < self.vartheta <= 1, f"assessment.vartheta must be in (0, 1], got {self.vartheta}")
        _require(self.phi1 > 0, f"assessment.phi1 must be > 0, got {self.phi1}")
        _require(self.phi2 > 0, f"assessment.phi2 must be > 0, got {self.phi2}")
        _require(
            0 < self.quality_threshold < 1,
            f"assessment.quality_threshold must be in (0, 1), got {self.quality_threshold}",
        )
        _require(
            self.veracity_mode in VERACITY_MODES,
            f"assessment.veracity_mode must be one of {VERACITY_MODES}, got {self.veracity_mode!r}",
        )

    def to_dict(self) -> dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], where: str = "assessment") -> AssessmentParams:
        check_keys(cls, data, where)
        return cls(**data)


@dataclass(frozen=True)
class MobileUser:
    id: str
    attributes: frozenset[str] = frozenset()
    reputation: float = 0.5

    def __post_init__(self) -> None:
        _require(isinstance(self.id, str) and self.id != "", f"user id must be a non-empty string, got {self.id!r}")
        object.__setattr__(self, "attributes", attribute_set(self.attributes))
        object.__setattr__(self, "reputation", _finite(f"user {self.id}: reputation", self.reputation))

    def to_dict(self) -> dict[str, Any]:
        return {"id": self.id, "attributes": sorted(self.attributes), "reputation": self.reputation}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], where: str = "user") -> MobileUser:
        check_keys(cls, data, where)
        return cls(**data)


@dataclass(frozen=True)
class TaskSpec:
    id: str
    interested_attributes: frozenset[str]
    budget: float
    delay_threshold: float
    weights: UtilityWeights = field(default_factory=UtilityWeights)
    assessment: AssessmentParams = field(default_factory=AssessmentParams)

    def __post_init__(self) -> None:
        object.__setattr__(self, "interested_attributes", attribute_set(self.interested_attributes))
        if not self.interested_attributes:
            raise InvalidTaskError(f"task {self.id}: interested_attributes must be non-empty")
        object.__setattr__(self, "budget", _finite(f"task {self.id}: budget", self.budget))
        object.__setattr__(self, "delay_threshold", _finite(f"task {self.id}: delay_threshold", self.delay_threshold))
        # budget 0 is a legal degenerate task: nobody can be afforded
        _require(self.budget >= 0, f"task {self.id}: budget must be >= 0, got {self.budget}")
        _require(self.delay_threshold > 0, f"task {self.id}: delay_threshold must be > 0, got {self.delay_threshold}")
        _require(isinstance(self.weights, UtilityWeights), "task.weights must be UtilityWeights")
        _require(isinstance(self.assessment, AssessmentParams), "task.assessment must be AssessmentParams")

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "interested_attributes": sorted(self.interested_attributes),
            "budget": self.budget,
            "delay_threshold": self.delay_threshold,
            "weights": self.weights.to_dict(),
            "assessment": self.assessment.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], where: str = "task") -> TaskSpec:
        check_keys(cls, data, where)
        data = dict(data)
        data["weights"] = UtilityWeights.from_dict(data.get("weights", {}), f"{where}.weights")
        data["assessment"] = AssessmentParams.from_dict(data.get("assessment", {}), f"{where}.assessment")
        return cls(**data)


@dataclass(frozen=True)
class Application:
    user_id: str
    bid_price: float
    expected_delay: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "bid_price", _finite(f"application {self.user_id}: bid_price", self.bid_price))
        object.__setattr__(
            self, "expected_delay", _finite(f"application {self.user_id}: expected_delay", self.expected_delay)
        )
        _require(self.bid_price > 0, f"application {self.user_id}: bid_price must be > 0, got {self.bid_price}")
        _require(
            self.expected_delay > 0,
            f"application {self.user_id}: expected_delay must be > 0, got {self.expected_delay}",
        )

    def to_dict(self) -> dict[str, Any]:
        return {"user_id": self.user_id, "bid_price": self.bid_price, "expected_delay": self.expected_delay}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], where: str = "application") -> Application:
        check_keys(cls, data, where)
        return cls(**data)


@dataclass(frozen=True)
class SensingReport:
    user_id: str
    payload: Any
    actual_delay: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "actual_delay", _finite(f"report {self.user_id}: actual_delay", self.actual_delay))
        _require(self.actual_delay >= 0, f"report {self.user_id}: actual_delay must be >= 0, got {self.actual_delay}")

    def to_dict(self) -> dict[str, Any]:
        return {"user_id": self.user_id, "payload": self.payload, "actual_delay": self.actual_delay}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], where: str = "report") -> SensingReport:
        check_keys(cls, data, where)
        return cls(**data)
