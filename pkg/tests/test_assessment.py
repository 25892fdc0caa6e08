import math

import pytest
from hypothesis import given, settings, strategies as st

from crowdsense.assessment import (
    SingleReportWarning,
    assess_report,
    assess_reports,
    check_sigma,
    default_scalar_similarity,
    delay_deviation_score,
    make_similarity,
    register_similarity,
    veracity_score,
)
from crowdsense.model import (
    Application,
    AssessmentParams,
    ConfigurationError,
    SensingReport,
    TaskSpec,
    ValidationError,
)

# 40-digit mpmath evaluations
PHI_AGREE = 0.803265329856316711801899767495590226721
PHI_CONFLICT = 0.196734670143683288198100232504409773279
EXP_M5 = 0.00673794699908546709663604842314842424885
EXP_M25 = 0.0820849986238987951695286744671598078378
V_AGREE = 0.8819591979137900270811398604973541360326

SIM = make_similarity("scalar", range=100.0)


def task(d_t=40.0, **params):
    return TaskSpec("t", {"a"}, 1000, d_t, assessment=AssessmentParams(**params))


def reports(*payloads, delay=10.0):
    return [SensingReport(f"u{i}", p, delay) for i, p in enumerate(payloads)]


def test_similarity_examples():
    assert default_scalar_similarity(3, 3, 100) == 1.0
    assert default_scalar_similarity(0, 100, 100) == -1.0
    assert default_scalar_similarity(0, 50, 100) == 0.0
    assert default_scalar_similarity(0, 500, 100) == -1.0


def test_similarity_range_must_be_positive():
    with pytest.raises(ValidationError):
        default_scalar_similarity(1, 2, 0)
    with pytest.raises(ValidationError):
        make_similarity("scalar", range=-1)
    with pytest.raises(ValidationError):
        make_similarity("cosine")


def test_register_similarity():
    @register_similarity("exact-match")
    def exact(**_):
        return lambda a, b: 1.0 if a == b else -1.0

    sim = make_similarity("exact-match")
    assert veracity_score(reports("x", "x"), 0, sim) == pytest.approx(PHI_AGREE, abs=1e-15)


def test_veracity_two_reports():
    assert veracity_score(reports(10, 10), 0, SIM) == pytest.approx(PHI_AGREE, abs=1e-15)
    assert veracity_score(reports(0, 100), 1, SIM) == pytest.approx(PHI_CONFLICT, abs=1e-15)


def test_veracity_neutral_five():
    assert veracity_score(reports(0, 50, 50, 50, 50), 0, SIM) == pytest.approx(0.125, abs=1e-15)


def test_veracity_single_report():
    with pytest.warns(SingleReportWarning):
        assert veracity_score(reports(1), 0, SIM) == 0.5


def test_veracity_clamped_and_renormalized():
    many = reports(*[10] * 6)
    assert veracity_score(many, 0, SIM) == pytest.approx((1 + 5 * math.exp(-1 / 6)) / 10)
    assert veracity_score(many, 0, SIM, "renormalized") == pytest.approx((1 + math.exp(-1 / 6)) / 2)
    assert 0 <= veracity_score(reports(0, 100, 100, 100), 0, SIM) <= 1
    with pytest.raises(ValidationError):
        veracity_score(many, 0, SIM, "vote")


def test_veracity_index():
    with pytest.raises(IndexError):
        veracity_score(reports(1, 2), 2, SIM)


def test_delay_plateau_and_boundary():
    t = task()
    p = t.assessment
    assert delay_deviation_score(20, 20, t, p) == 1.0
    assert delay_deviation_score(0, 20, t, p) == 1.0
    assert delay_deviation_score(40, 20, t, p) == pytest.approx(EXP_M5, abs=1e-15)
    assert delay_deviation_score(30, 20, t, p) == pytest.approx(EXP_M25, abs=1e-15)


def test_delay_sigma_widens_plateau():
    t = task(sigma=5)
    assert delay_deviation_score(25, 20, t, t.assessment) == 1.0
    assert delay_deviation_score(26, 20, t, t.assessment) < 1.0


def test_delay_floor_follows_vartheta():
    t = task(vartheta=0.5, phi1=1)
    assert delay_deviation_score(40, 20, t, t.assessment) == pytest.approx(1 - 0.5 * (1 - math.exp(-1)))


def test_sigma_violations_name_participant():
    t = task(sigma=25)
    with pytest.raises(ConfigurationError, match="u7"):
        delay_deviation_score(10, 20, t, t.assessment, "u7")
    with pytest.raises(ConfigurationError, match="u1"):
        check_sigma([Application("u0", 1, 10), Application("u1", 1, 20)], t)


def test_final_score():
    t = task()
    rs = reports(10, 10, delay=20)
    a = assess_report(rs[0], rs, Application("u0", 5, 20), t, SIM)
    assert a.valid
    assert a.final_score == pytest.approx(V_AGREE, abs=1e-15)


def test_final_score_veracity_only():
    t = task(w_x=1.0)
    rs = reports(10, 60, delay=39)
    a = assess_report(rs[0], rs, Application("u0", 5, 20), t, SIM)
    assert a.final_score == a.veracity


def test_late_report_invalid():
    t = task()
    rs = [SensingReport("u0", 10, 41), SensingReport("u1", 10, 5)]
    a = assess_report(rs[0], rs, Application("u0", 5, 20), t, SIM)
    assert not a.valid and a.final_score == 0 and a.delay_score == 0


def test_assess_report_membership_and_pairing():
    t = task()
    rs = reports(1, 2)
    with pytest.raises(ValidationError):
        assess_report(SensingReport("u9", 1, 1), rs, Application("u9", 1, 1), t)
    with pytest.raises(ValidationError):
        assess_report(rs[0], rs, Application("u1", 1, 1), t)
    with pytest.raises(ValidationError):
        assess_reports(rs, [Application("u0", 1, 1)], t)


payloads = st.lists(st.floats(0, 100), min_size=2, max_size=12)


@settings(max_examples=80)
@given(payloads, st.data())
def test_scores_in_unit_interval(ps, data):
    t = task()
    delays = data.draw(st.lists(st.floats(0, 60), min_size=len(ps), max_size=len(ps)))
    rs = [SensingReport(f"u{i}", p, d) for i, (p, d) in enumerate(zip(ps, delays))]
    apps = [Application(f"u{i}", 1, 20) for i in range(len(ps))]
    for a, r in zip(assess_reports(rs, apps, t, SIM), rs):
        for s in (a.veracity, a.delay_score, a.final_score):
            assert 0 <= s <= 1
        if r.actual_delay > t.delay_threshold:
            assert a.final_score == 0 and not a.valid


@settings(max_examples=60)
@given(payloads, st.randoms(use_true_random=False))
def test_veracity_permutation_invariant(ps, rnd):
    rs = reports(*ps)
    before = {r.user_id: veracity_score(rs, i, SIM) for i, r in enumerate(rs)}
    shuffled = list(rs)
    rnd.shuffle(shuffled)
    after = {r.user_id: veracity_score(shuffled, i, SIM) for i, r in enumerate(shuffled)}
    for k in before:
        assert after[k] == pytest.approx(before[k], abs=1e-12)


@given(st.floats(0, 40), st.floats(0, 40), st.floats(1, 39))
def test_delay_score_monotone(a1, a2, expected):
    t = task()
    lo, hi = sorted((a1, a2))
    assert delay_deviation_score(lo, expected, t, t.assessment) >= delay_deviation_score(hi, expected, t, t.assessment)


@given(st.floats(1, 39), st.floats(0, 1))
def test_delay_plateau_exact(expected, frac):
    t = task()
    assert delay_deviation_score(frac * expected, expected, t, t.assessment) == 1.0
