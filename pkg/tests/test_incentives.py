import csv
import math
import os

import numpy as np
import pytest
from hypothesis import given, strategies as st

from crowdsense.assessment import ReportAssessment
from crowdsense.incentives import (
    ReputationDelta,
    ReputationStore,
    allocate_reward,
    apply_reputation_update,
    evaluate_reputation_delta,
)
from crowdsense.model import Application, AssessmentParams, OutOfRangeError, ReputationParams, ValidationError

# 40-digit mpmath evaluations
REWARD_015 = 670.320046035639300744432925147826071937
KAPPA_SYM = 12.64241117657115356808952459677078265108
CHEAP = 15.53739679703140342133439058471974957316
DEAR = 10.5526689451797058572390689811346417406

PARAMS = AssessmentParams()
REP = ReputationParams()


def assessed(uid, v, valid=True):
    return ReportAssessment(uid, v, 1.0, v if valid else 0.0, valid)


def test_reward_at_threshold_pays_bid():
    assert allocate_reward(assessed("u", 0.35), Application("u", 1000, 20), PARAMS).reward == 1000


def test_reward_below_threshold():
    r = allocate_reward(assessed("u", 0.15), Application("u", 1000, 20), PARAMS).reward
    assert r == pytest.approx(REWARD_015, abs=1e-9)


def test_reward_invalid_is_zero():
    assert allocate_reward(assessed("u", 0.9, valid=False), Application("u", 1000, 20), PARAMS).reward == 0


@given(st.floats(0, 1), st.floats(0, 1), st.floats(0.01, 1e4))
def test_reward_monotone_and_bounded(v1, v2, bid):
    lo, hi = sorted((v1, v2))
    app = Application("u", bid, 1)
    r_lo = allocate_reward(assessed("u", lo), app, PARAMS).reward
    r_hi = allocate_reward(assessed("u", hi), app, PARAMS).reward
    assert 0 <= r_lo <= r_hi <= bid
    assert (r_hi == bid) == (hi >= PARAMS.quality_threshold)


def test_delta_punishment():
    d = evaluate_reputation_delta([assessed("a", 0.2), assessed("b", 0.8)], [Application("a", 1, 1), Application("b", 1, 1)], REP)
    assert d[0].delta == -200


def test_delta_symmetric():
    n = 4
    d = evaluate_reputation_delta([assessed(f"u{i}", 0.7) for i in range(n)], [Application(f"u{i}", 50, 1) for i in range(n)], REP)
    for x in d:
        assert x.delta == pytest.approx(KAPPA_SYM, abs=1e-12)


def test_delta_cheaper_wins():
    d = evaluate_reputation_delta([assessed("a", 0.8), assessed("b", 0.8)], [Application("a", 100, 1), Application("b", 200, 1)], REP)
    assert d[0].delta == pytest.approx(CHEAP, abs=1e-12)
    assert d[1].delta == pytest.approx(DEAR, abs=1e-12)
    assert d[0].delta > d[1].delta


def test_delta_all_zero_quality():
    d = evaluate_reputation_delta([assessed("a", 0.0, False), assessed("b", 0.0, False)], [Application("a", 1, 1), Application("b", 1, 1)], REP)
    assert [x.delta for x in d] == [-200, -200]


def test_delta_exclude_invalid_from_shares():
    a = [assessed("a", 0.8), assessed("b", 0.0, False)]
    apps = [Application("a", 100, 1), Application("b", 100, 1)]
    incl = evaluate_reputation_delta(a, apps, REP)[0].delta
    excl = evaluate_reputation_delta(a, apps, REP, include_invalid=False)[0].delta
    assert excl == pytest.approx(KAPPA_SYM)
    assert incl == pytest.approx(20 * (1 - math.exp(-2)))
    assert evaluate_reputation_delta(a, apps, REP, include_invalid=False)[1].delta == -200


def test_delta_alignment_checked():
    with pytest.raises(ValidationError):
        evaluate_reputation_delta([assessed("a", 0.5)], [Application("b", 1, 1)], REP)


@given(st.lists(st.tuples(st.floats(0, 1), st.floats(1, 1000)), min_size=1, max_size=15))
def test_delta_sign_and_bound(rows):
    a = [assessed(f"u{i}", v) for i, (v, _) in enumerate(rows)]
    apps = [Application(f"u{i}", b, 1) for i, (_, b) in enumerate(rows)]
    for x, (v, _) in zip(evaluate_reputation_delta(a, apps, REP), rows):
        if v >= REP.quality_threshold:
            assert 0 < x.delta < REP.kappa or x.delta == pytest.approx(REP.kappa)
        else:
            assert x.delta == -REP.eta


@given(st.floats(0.35, 1), st.floats(1, 500), st.floats(1, 500))
def test_lower_bid_never_lowers_delta(v, b1, b2):
    lo, hi = sorted((b1, b2))
    peers = [assessed("p", 0.6)], [Application("p", 100, 1)]

    def delta(bid):
        return evaluate_reputation_delta([assessed("k", v), *peers[0]], [Application("k", bid, 1), *peers[1]], REP)[0].delta

    assert delta(lo) >= delta(hi)


def test_store_creates_unknown_at_init():
    s = ReputationStore(REP)
    assert s.get("new") == REP.r_init
    assert "new" in s and len(s) == 1


def test_store_clamps():
    s = ReputationStore(REP, {"a": 0.2, "b": 0.99, "c": 0.4})
    apply_reputation_update(s, [ReputationDelta("a", -200), ReputationDelta("b", 20), ReputationDelta("c", 0)], scale=1e-2)
    assert s.get("a") == REP.r_min
    assert s.get("b") == REP.r_max
    assert s.get("c") == 0.4


def test_store_scale_and_range_checks():
    s = ReputationStore(REP)
    with pytest.raises(ValidationError):
        s.apply([], scale=0)
    with pytest.raises(OutOfRangeError):
        s.set("x", 1.5)
    with pytest.raises(OutOfRangeError):
        ReputationStore(REP, {"y": 0.0})


def test_store_fuzz_stays_in_range():
    rng = np.random.default_rng(3)
    s = ReputationStore(REP)
    users = [f"u{i}" for i in range(25)]
    for _ in range(10_000):
        uid = users[int(rng.integers(len(users)))]
        delta = float(rng.choice([-REP.eta, rng.uniform(0, REP.kappa)]))
        s.apply([ReputationDelta(uid, delta)], scale=float(rng.choice([1e-3, 1e-2, 1.0])))
        assert REP.r_min <= s.get(uid) <= REP.r_max


def test_store_save_load_round_trip(tmp_path):
    s = ReputationStore(REP, {"b": 0.1 + 1e-15, "a": 2 / 3})
    path = tmp_path / "sub" / "rep.csv"
    s.save(path)
    assert ReputationStore.load(path, REP).snapshot() == s.snapshot()
    with open(path, newline="") as fh:
        assert [row[0] for row in csv.reader(fh)] == ["user_id", "a", "b"]
    assert [p.name for p in path.parent.iterdir()] == ["rep.csv"]


def test_store_save_failure_leaves_no_temp(tmp_path, monkeypatch):
    s = ReputationStore(REP, {"a": 0.5})
    def boom(*_):
        raise OSError("disk full")
    monkeypatch.setattr(os, "replace", boom)
    with pytest.raises(OSError):
        s.save(tmp_path / "rep.csv")
    assert list(tmp_path.iterdir()) == []


def test_store_load_rejects_bad_header(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("id,value\nu,0.5\n")
    with pytest.raises(ValidationError):
        ReputationStore.load(p, REP)
