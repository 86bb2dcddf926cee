import math

import numpy as np
import pytest

from conftest import H2
from mginf.classbounds import (
    TailEnvelope,
    dfr_envelope,
    dfr_upper,
    envelope_premise_check,
    exponential_envelope,
    imrl_envelope,
    imrl_lower,
    imrl_rate,
    nbue_upper,
    nwue_lower,
    renewal_from_envelope,
)
from mginf.dist import Deterministic, Erlang, Exponential, QueueModel
from mginf.errors import DomainError
from mginf.renewal import renewal_curve

# mpmath goldens (30 digits) of the substituted renewal formula
EXP1_R1 = 1.2352980285404766
DFR_15_T1 = 1.284105311473623
IMRL_H2_T1 = 1.275933185687673

GRID = np.linspace(0, 5, 51)


def exp_curve(lam, alpha, grid=GRID):
    return renewal_curve(QueueModel(lam, Exponential(alpha)), grid).values


# -- substitution mechanism ----------------------------------------------------------


def test_exact_exponential_tail_reproduces_exponential_curve():
    env = TailEnvelope("pointwise", lambda v: np.exp(-np.asarray(v)), "upper", "exact")
    vals, err = renewal_from_envelope(1.0, env, GRID)
    np.testing.assert_allclose(vals, exp_curve(1.0, 1.0), atol=1e-10)
    assert np.all(err < 1e-9)


def test_zero_envelope_gives_null_service_curve():
    env = TailEnvelope("pointwise", lambda v: np.zeros_like(np.asarray(v, dtype=float)), "upper", "zero")
    vals, _ = renewal_from_envelope(1.5, env, GRID)
    np.testing.assert_allclose(vals, 1 + 1.5 * GRID, atol=1e-12)


def test_unit_envelope_gives_single_renewal():
    env = TailEnvelope("pointwise", lambda v: np.ones_like(np.asarray(v, dtype=float)), "upper", "one")
    vals, _ = renewal_from_envelope(2.0, env, GRID)
    np.testing.assert_allclose(vals, 1.0, atol=1e-12)


def test_unsorted_and_scalar_times():
    env = exponential_envelope(1.0, "upper", "nbue")
    t = np.array([3.0, 0.5, 1.0, 0.0])
    vals, _ = renewal_from_envelope(1.0, env, t)
    np.testing.assert_allclose(vals, exp_curve(1.0, 1.0, np.sort(t))[[3, 1, 2, 0]], atol=1e-10)
    value, err = renewal_from_envelope(1.0, env, 1.0)
    assert isinstance(value, float) and value == pytest.approx(EXP1_R1, abs=1e-10)


def test_exact_tail_of_any_family_reproduces_its_curve(family):
    grid = np.linspace(0, 6, 25)
    m = QueueModel(family.lam if family.family == "ferreira" else 1.3, family)
    env = TailEnvelope("pointwise", family.sf, "upper", "exact", cumulative=family.integrated_tail)
    vals, _ = renewal_from_envelope(m.lam, env, grid)
    np.testing.assert_allclose(vals, renewal_curve(m, grid, method="quadrature").values, atol=1e-8)
    residual = TailEnvelope("integrated", family.residual_tail, "upper", "exact", alpha=family.mean)
    vals, _ = renewal_from_envelope(m.lam, residual, grid)
    np.testing.assert_allclose(vals, renewal_curve(m, grid, method="quadrature").values, atol=1e-8)


@pytest.mark.parametrize("k1, k2", [(2.0, 1.0), (1.0, 0.4), (5.0, 0.1)])
def test_smaller_envelope_gives_larger_curve(k1, k2):
    # exp(-k1 t) <= exp(-k2 t) pointwise
    small = TailEnvelope("pointwise", lambda v: np.exp(-k1 * np.asarray(v)), "upper", "a")
    large = TailEnvelope("pointwise", lambda v: np.exp(-k2 * np.asarray(v)), "upper", "b")
    a, _ = renewal_from_envelope(1.0, small, GRID)
    b, _ = renewal_from_envelope(1.0, large, GRID)
    assert np.all(a >= b - 1e-12)


@pytest.mark.parametrize(
    "d, env",
    [
        (Deterministic(1.0), exponential_envelope(1.0, "upper", "nbue")),
        (Erlang(2, 1.0), exponential_envelope(1.0, "upper", "nbue")),
        (Erlang(3, 0.8), dfr_envelope(0.8, 1.0 / 3)),
        (H2, exponential_envelope(1.0, "lower", "nwue")),
        (H2, imrl_envelope(1.0, 2.5, 10.5, form="shifted")),
    ],
    ids=["det-nbue", "erlang2-nbue", "erlang3-dfr", "h2-nwue", "h2-imrl-shifted"],
)
def test_verified_premise_implies_bound(d, env):
    fine = np.linspace(0, 8, 1601)
    rep = envelope_premise_check(d, env, fine)
    grid = np.linspace(0, 8, 81)
    ok = rep.certified(grid)
    vals, _ = renewal_from_envelope(1.0, env, grid)
    r = renewal_curve(QueueModel(1.0, d), grid).values
    gap = (vals - r) if env.direction == "upper" else (r - vals)
    assert np.all(gap[ok] >= -1e-9)


def test_envelope_validation():
    with pytest.raises(DomainError):
        TailEnvelope("tail", np.exp, "upper", "x")
    with pytest.raises(DomainError):
        TailEnvelope("pointwise", np.exp, "sideways", "x")
    with pytest.raises(DomainError):
        TailEnvelope("integrated", np.exp, "upper", "x")
    with pytest.raises(DomainError):
        renewal_from_envelope(0.0, exponential_envelope(1.0, "upper", "x"), 1.0)


# -- class bounds ------------------------------------------------------------------------


def test_nbue_and_nwue_equal_exponential_curve():
    up = nbue_upper(1.0, 1.0, GRID)
    lo = nwue_lower(1.0, 1.0, GRID)
    np.testing.assert_allclose(up.values, exp_curve(1.0, 1.0), atol=1e-10)
    np.testing.assert_allclose(lo.values, up.values, atol=1e-12)
    assert up.label == "upper bound" and lo.label == "lower bound"
    assert nbue_upper(1.0, 1.0, 1.0).values[0] == pytest.approx(EXP1_R1, abs=1e-10)


@pytest.mark.parametrize("lam, alpha", [(1.0, 1.0), (0.5, 2.0), (2.0, 0.3)])
def test_reductions_to_exponential(lam, alpha):
    ref = exp_curve(lam, alpha)
    np.testing.assert_allclose(dfr_upper(lam, alpha, 1.0, GRID).values, ref, atol=1e-10)
    imrl = imrl_lower(lam, alpha, 2 * alpha**2, 6 * alpha**3, GRID)
    np.testing.assert_allclose(imrl.values, ref, atol=1e-10)
    shifted = imrl_lower(lam, alpha, 2 * alpha**2, 6 * alpha**3, GRID, form="shifted")
    np.testing.assert_allclose(shifted.values, ref, atol=1e-10)


def test_dfr_golden():
    assert dfr_upper(1.0, 1.0, 1.5, 1.0).values[0] == pytest.approx(DFR_15_T1, abs=1e-10)


def test_imrl_rate_examples():
    assert imrl_rate(1.0, 2.0, 6.0) == pytest.approx(1.0)
    assert imrl_rate(1.0, 2.5, 10.5) == pytest.approx(0.896)
    assert imrl_rate(1.0, H2.moment(2), H2.moment(3)) == pytest.approx(0.896)
    with pytest.raises(DomainError):
        imrl_rate(1.0, 0.0, 6.0)


def test_imrl_golden():
    assert imrl_lower(1.0, 1.0, 2.5, 10.5, 1.0).values[0] == pytest.approx(IMRL_H2_T1, abs=1e-10)


def test_imrl_bad_form():
    with pytest.raises(DomainError):
        imrl_envelope(1.0, 2.0, 6.0, form="exact")


def test_dfr_bound_increases_with_variability():
    # a heavier envelope lowers the busy integral and raises the bound
    a = dfr_upper(1.0, 1.0, 1.5, GRID).values
    b = dfr_upper(1.0, 1.0, 3.0, GRID).values
    assert np.all(b >= a - 1e-12)


@pytest.mark.parametrize(
    "env",
    [
        exponential_envelope(1.0, "upper", "nbue"),
        dfr_envelope(1.0, 2.0),
        imrl_envelope(1.0, 2.5, 10.5),
        imrl_envelope(1.0, 2.5, 10.5, form="shifted"),
    ],
    ids=["exp", "dfr", "imrl", "imrl-shifted"],
)
def test_envelopes_are_nonincreasing_and_bounds_nondecreasing(env):
    e = env.func(GRID)
    assert np.all(np.diff(e) <= 0)
    vals, _ = renewal_from_envelope(1.0, env, GRID)
    assert np.all(np.diff(vals) >= -1e-12)


def test_erlang_and_hyperexponential_straddle_exponential():
    grid = np.linspace(0, 5, 51)
    ref = exp_curve(1.0, 1.0, grid)
    erl = renewal_curve(QueueModel(1.0, Erlang(2, 1.0)), grid).values
    h2 = renewal_curve(QueueModel(1.0, H2), grid).values
    assert np.all(erl <= ref + 1e-12)
    assert np.all(h2 >= ref - 1e-12)


# -- premise scans -------------------------------------------------------------------------


def test_exponential_against_its_own_tail():
    rep = envelope_premise_check(Exponential(1.3), exponential_envelope(1.3, "upper", "nbue"), np.linspace(0, 10, 101))
    assert rep.holds and rep.max_violation == 0.0
    assert rep.verdict() == "bound (premise verified on grid)"


def test_deterministic_is_nbue_on_grid():
    grid = np.arange(0, 501) * 0.01
    rep = envelope_premise_check(Deterministic(1.0), exponential_envelope(1.0, "upper", "nbue"), grid)
    assert rep.holds
    assert rep.grid_size == 501


def test_deterministic_is_not_nwue():
    grid = np.linspace(0, 5, 101)
    rep = envelope_premise_check(Deterministic(1.0), exponential_envelope(1.0, "lower", "nwue"), grid)
    assert not rep.holds


def test_h2_dfr_envelope_violated_near_origin():
    # recorded outcome of the scan: violated for small t only
    grid = np.linspace(0, 5, 501)
    rep = envelope_premise_check(H2, dfr_envelope(1.0, H2.cv_squared()), grid)
    assert not rep.holds
    assert rep.violations.max() < 0.5
    assert rep.max_violation == pytest.approx(0.00625, abs=5e-4)
    assert "VIOLATED" in rep.verdict()


def test_h2_imrl_rate_envelope_violated_near_origin():
    grid = np.linspace(0, 5, 501)
    rep = envelope_premise_check(H2, imrl_envelope(1.0, 2.5, 10.5), grid)
    assert not rep.holds
    assert rep.violations.max() < 1.0
    assert rep.max_violation < 0.02


def test_h2_imrl_shifted_envelope_holds_and_bounds():
    grid = np.linspace(0, 5, 501)
    rep = envelope_premise_check(H2, imrl_envelope(1.0, 2.5, 10.5, form="shifted"), grid)
    assert rep.holds
    bound = imrl_lower(1.0, 1.0, 2.5, 10.5, grid, form="shifted").values
    h2 = renewal_curve(QueueModel(1.0, H2), grid).values
    assert np.all(bound <= h2 + 1e-10)


def test_pointwise_premise_is_not_enough():
    # the scan passes at t = 0.8 and 0.9, but earlier violations still push the bound above R
    grid = np.linspace(0, 5, 51)
    rep = envelope_premise_check(H2, imrl_envelope(1.0, 2.5, 10.5), grid)
    bound = imrl_lower(1.0, 1.0, 2.5, 10.5, grid).values
    h2 = renewal_curve(QueueModel(1.0, H2), grid).values
    pointwise_ok = ~np.isin(grid, rep.violations)
    assert np.any(bound[pointwise_ok] > h2[pointwise_ok] + 1e-6)
    assert not np.any(rep.certified(grid)[1:])


def test_certified_prefix():
    grid = np.linspace(0, 5, 501)
    rep = envelope_premise_check(H2, dfr_envelope(1.0, H2.cv_squared()), grid)
    mask = rep.certified(grid)
    assert mask[0] == (0.0 not in rep.violations)
    assert not mask[-1]
    clean = envelope_premise_check(Exponential(1.0), exponential_envelope(1.0, "upper", "nbue"), grid)
    assert clean.certified(grid).all()


def test_certified_bounds_hold_for_h2():
    fine = np.linspace(0, 5, 5001)
    grid = np.linspace(0, 5, 51)
    h2 = renewal_curve(QueueModel(1.0, H2), grid).values
    for env in (imrl_envelope(1.0, 2.5, 10.5), imrl_envelope(1.0, 2.5, 10.5, form="shifted")):
        rep = envelope_premise_check(H2, env, fine)
        ok = rep.certified(grid)
        vals, _ = renewal_from_envelope(1.0, env, grid)
        assert np.all(vals[ok] <= h2[ok] + 1e-10)


def test_premise_rejects_descending_grid():
    with pytest.raises(DomainError):
        envelope_premise_check(H2, dfr_envelope(1.0, 1.5), [1.0, 0.0])


def test_verdict_truncates_long_lists():
    rep = envelope_premise_check(Deterministic(1.0), exponential_envelope(1.0, "lower", "nwue"), np.linspace(0, 5, 101))
    assert rep.verdict().count(",") >= 4 and "points" in rep.verdict()
    assert math.isfinite(rep.max_violation)
