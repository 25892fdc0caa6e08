import warnings

import pytest

from crowdsense.model import (
    Application,
    AssessmentParams,
    InvalidTaskError,
    MobileUser,
    ReputationParams,
    SensingReport,
    TaskSpec,
    UtilityWeights,
    ValidationError,
)


def test_default_weights_sum_to_one():
    w = UtilityWeights()
    assert abs(w.w_s + w.w_d + w.w_r - 1) < 1e-12


def test_weight_sum_rejected():
    with pytest.raises(ValidationError, match="must equal 1"):
        UtilityWeights(w_s=0.5, w_d=0.4, w_r=0.3)


def test_zero_weights_allowed():
    w = UtilityWeights(w_s=0, w_d=0, w_r=1)
    assert w.w_r == 1


@pytest.mark.parametrize("field", ["alpha", "beta", "gamma"])
@pytest.mark.parametrize("value", [0.0, 1.0, -0.1])
def test_floors_must_be_open_unit(field, value):
    with pytest.raises(ValidationError):
        UtilityWeights(**{field: value})


def test_emphasize():
    w = UtilityWeights.emphasize("delay")
    assert (w.w_s, w.w_d, w.w_r) == (0.05, 0.9, 0.05)
    with pytest.raises(ValidationError):
        UtilityWeights.emphasize("price")


def test_reputation_params_ordering():
    with pytest.raises(ValidationError):
        ReputationParams(r_min=0.5, r_init=0.5)
    with pytest.raises(ValidationError):
        ReputationParams(kappa=300)


def test_reputation_params_warns_on_weak_punishment():
    with pytest.warns(UserWarning, match="10\\*kappa"):
        ReputationParams(kappa=50, eta=200)


def test_clamp():
    p = ReputationParams()
    assert p.clamp(-3) == p.r_min
    assert p.clamp(7) == p.r_max
    assert p.clamp(0.42) == 0.42


def test_assessment_params_validation():
    with pytest.raises(ValidationError):
        AssessmentParams(sigma=-1)
    with pytest.raises(ValidationError):
        AssessmentParams(veracity_mode="median")
    with pytest.raises(ValidationError):
        AssessmentParams(vartheta=0)


def test_task_requires_attributes():
    with pytest.raises(InvalidTaskError):
        TaskSpec("t", frozenset(), 100, 40)


def test_task_budget_zero_is_legal():
    assert TaskSpec("t", {"a"}, 0, 40).budget == 0
    with pytest.raises(ValidationError):
        TaskSpec("t", {"a"}, -1, 40)


def test_application_validation():
    with pytest.raises(ValidationError):
        Application("u", 0, 5)
    with pytest.raises(ValidationError):
        Application("u", 10, 0)
    with pytest.raises(ValidationError):
        Application("u", float("nan"), 5)


def test_report_delay_nonnegative():
    with pytest.raises(ValidationError):
        SensingReport("u", 1.0, -0.1)


def test_user_id_required():
    with pytest.raises(ValidationError):
        MobileUser("")


@pytest.mark.parametrize(
    "obj",
    [
        ReputationParams(r_min=0.2, kappa=10),
        UtilityWeights(w_s=0.9, w_d=0.05, w_r=0.05, alpha=0.3),
        AssessmentParams(w_x=0.4, veracity_mode="renormalized"),
        MobileUser("u1", {"a", "b"}, 0.7),
        TaskSpec("t1", {"x", "y"}, 250.0, 30.0, UtilityWeights.emphasize("social")),
        Application("u1", 99.5, 12.0),
        SensingReport("u1", 42.0, 13.5),
    ],
)
def test_round_trip(obj):
    assert type(obj).from_dict(obj.to_dict()) == obj


def test_unknown_keys_rejected():
    with pytest.raises(ValidationError, match="unknown key"):
        UtilityWeights.from_dict({"w_s": 1, "w_d": 0, "w_r": 0, "w_x": 0})
    with pytest.raises(ValidationError, match="unknown key"):
        TaskSpec.from_dict({"id": "t", "interested_attributes": ["a"], "budget": 1, "delay_threshold": 1, "bugdet": 2})


def test_frozen():
    w = UtilityWeights()
    with pytest.raises(Exception):
        w.alpha = 0.5  # type: ignore[misc]
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        ReputationParams()
