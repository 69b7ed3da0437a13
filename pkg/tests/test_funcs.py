import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from twistlab.funcs import (
    BOUNDED,
    GROWING,
    INCONCLUSIVE,
    ComplexCombine,
    DerivativeUnavailable,
    DescriptorError,
    GrowthConfig,
    Linear,
    LogGrid,
    PowerPhase,
    Scale,
    SinLog,
    SinPlain,
    Sum,
    additivity_defect,
    bid_functional,
    bid_sweep,
    classify_growth,
    equivalence_test,
    eval_d1,
    eval_d2,
    evaluate,
    from_dict,
    from_json,
    hyers_linearize,
    in_L_bis,
    linear_part,
    lipschitz_bounds,
    projective_equivalence_test,
    to_dict,
    to_json,
    with_bounds,
)
from oracle_fixtures import BID_FLOOR, SQRT2_BETA, SQRT3_BETA

SMALL = LogGrid(2.0**-10, 2.0**30, 128)

leaves = st.one_of(
    st.builds(Linear, st.floats(-5, 5, allow_nan=False)),
    st.builds(Linear, st.complex_numbers(max_magnitude=5, allow_nan=False, allow_infinity=False)),
    st.just(SinPlain()),
    st.builds(SinLog, st.floats(0.01, 0.5), st.floats(0.1, 5)),
    st.builds(PowerPhase, st.floats(-3, 3, allow_nan=False)),
)
trees = st.recursive(
    leaves,
    lambda kids: st.one_of(
        st.builds(Scale, st.floats(-3, 3, allow_nan=False), kids),
        st.builds(lambda ts: Sum(tuple(ts)), st.lists(kids, min_size=1, max_size=3)),
        st.builds(ComplexCombine, kids, kids),
    ),
    max_leaves=6,
)


# -- descriptors -----------------------------------------------------------

def test_sinlog_at_e():
    assert evaluate(SinLog(0.1, 1.0), math.e) == pytest.approx(math.e * (1 + 0.1 * math.sin(1.0)), rel=1e-15)


def test_values_at_zero_and_scalar_type():
    for f in (Linear(2), SinPlain(), SinLog(0.1, 1), PowerPhase(1)):
        assert evaluate(f, 0.0) == 0
    assert isinstance(evaluate(Linear(1), 1.5), complex)
    assert evaluate(Linear(1), np.array([1.0, 2.0])).shape == (2,)


def test_rejects_negative_and_nan():
    with pytest.raises(ValueError):
        evaluate(Linear(1), -1.0)
    with pytest.raises(ValueError):
        evaluate(Linear(1), np.array([1.0, np.nan]))
    with pytest.raises(ValueError):
        eval_d1(SinLog(0.1, 1), 0.0)


def test_power_phase_modulus():
    t = np.geomspace(1e-3, 1e6, 50)
    np.testing.assert_allclose(np.abs(evaluate(PowerPhase(2.0), t)), t, rtol=1e-14)


@pytest.mark.parametrize("alpha,beta", [(0.1, 1.0), (0.3, 2.5), (0.05, 7.0)])
@pytest.mark.parametrize("t", [1.0, 10.0, 100.0])
def test_sinlog_derivatives_against_finite_differences(alpha, beta, t):
    f = SinLog(alpha, beta)
    h = 1e-5 * t
    fd1 = (evaluate(f, t + h) - evaluate(f, t - h)) / (2 * h)
    fd2 = (eval_d1(f, t + h) - eval_d1(f, t - h)) / (2 * h)
    assert eval_d1(f, t) == pytest.approx(fd1, rel=1e-6)
    assert eval_d2(f, t) == pytest.approx(fd2, rel=1e-6, abs=1e-12)


def test_sinlog_second_derivative_closed_form():
    # (alpha beta / t)(cos u - beta sin u), u = beta log t
    a, b, t = 0.2, 3.0, 7.5
    u = b * math.log(t)
    assert eval_d2(SinLog(a, b), t) == pytest.approx(a * b / t * (math.cos(u) - b * math.sin(u)), rel=1e-14)


def _stencil(g, t, h):
    return (g(t - 2 * h) - 8 * g(t - h) + 8 * g(t + h) - g(t + 2 * h)) / (12 * h)


@settings(max_examples=80, deadline=None)
@given(trees, st.floats(1e-3, 1e6))
def test_tree_derivatives_match_finite_differences(f, t):
    # five-point stencil; unit-scale oscillations (sin t) cap the step at 1e-3
    h = 1e-3 * min(t, 1.0)
    fd1 = _stencil(lambda s: evaluate(f, s), t, h)
    fd2 = _stencil(lambda s: eval_d1(f, s), t, h)
    eps = np.finfo(float).eps
    noise1 = 64 * eps * (abs(evaluate(f, t)) + 1.0) / h
    noise2 = 64 * eps * (abs(eval_d1(f, t)) + 1.0) / h
    assert abs(eval_d1(f, t) - fd1) <= 1e-6 * max(1.0, abs(fd1)) + noise1
    assert abs(eval_d2(f, t) - fd2) <= 1e-6 * max(1.0, abs(fd2)) + noise2


@settings(max_examples=100, deadline=None)
@given(trees)
def test_json_round_trip(f):
    g = from_json(to_json(f))
    assert to_dict(g) == to_dict(f)
    t = np.array([0.0, 0.5, 3.0, 1e4])
    np.testing.assert_array_equal(evaluate(f, t), evaluate(g, t))


@settings(max_examples=50, deadline=None)
@given(trees, st.floats(-4, 4, allow_nan=False).filter(lambda c: c != 0), st.floats(0, 1e6))
def test_scale_is_pointwise(f, c, t):
    assert evaluate(Scale(c, f), t) == pytest.approx(c * evaluate(f, t), rel=1e-13, abs=1e-300)


def test_json_errors_are_path_annotated():
    bad = {"type": "sum", "children": [{"type": "linear", "c": 1},
                                       {"type": "scale", "c": 2, "children": [{"type": "sinlog", "alpha": "x"}]}]}
    with pytest.raises(DescriptorError) as err:
        from_dict(bad)
    assert err.value.path == "$.children[1].children[0].alpha"
    with pytest.raises(DescriptorError, match=r"\$\.children\[0\]\.type"):
        from_dict({"type": "sum", "children": [{"type": "nope"}]})
    with pytest.raises(DescriptorError, match=r"^\$: invalid JSON"):
        from_json("{")
    with pytest.raises(DescriptorError, match=r"\$\.children\[1\]: sinlog needs"):
        from_dict({"type": "sum", "children": [{"type": "linear", "c": 1},
                                               {"type": "sinlog", "alpha": -1, "beta": 1}]})


def test_complex_coefficient_round_trip():
    d = to_dict(Linear(1 - 2j))
    assert d == {"type": "linear", "c": [1.0, -2.0]}
    assert json.loads(json.dumps(d)) == d


def test_derivative_flag():
    f = Sum((Linear(1), SinPlain(differentiable=False)))
    with pytest.raises(DerivativeUnavailable) as err:
        eval_d2(f, 1.0)
    assert err.value.paths == ["$.children[1]"]
    assert evaluate(f, 1.0) == pytest.approx(1 + math.sin(1))


def test_bounds_metadata():
    assert SinLog(0.1, 1).upper_bound() == pytest.approx(1.2)
    assert SinLog(0.1, 1).lower_bound() == pytest.approx(0.8)
    assert SinLog(0.1, 1).is_bilipschitz
    assert not SinLog(2, 1).is_bilipschitz
    assert PowerPhase(1).upper_bound() == pytest.approx(math.sqrt(2))
    assert not Sum((Linear(1), SinPlain())).is_bilipschitz
    f = with_bounds(Sum((Linear(1), SinPlain())), 2.0, 0.5)
    assert f.is_bilipschitz and from_dict(to_dict(f)).lower_bound() == 0.5
    assert linear_part(Sum((Scale(3, SinLog(0.1, 1)), Linear(2)))) == 5


# -- Lipschitz estimation --------------------------------------------------

def test_lipschitz_linear_exact():
    lo, hi = lipschitz_bounds(Linear(3))
    assert abs(lo - 3) <= 1e-12 and abs(hi - 3) <= 1e-12


def test_lipschitz_sinlog_inside_analytic_bounds():
    lo, hi = lipschitz_bounds(SinLog(0.1, 1))
    assert 0.8 - 1e-6 <= lo <= hi <= 1.2 + 1e-6
    assert hi - lo > 0.2  # the oscillation is visible


def test_lipschitz_sinplain_not_bounded_below():
    lo, hi = lipschitz_bounds(SinPlain())
    assert lo < 1e-3 and hi <= 1 + 1e-12


# -- growth classification -------------------------------------------------

def test_classify_growth_synthetic():
    ks = range(40)
    assert classify_growth([(k, 2.0**k) for k in ks]).verdict == GROWING
    assert classify_growth([(k, 1.0 + 0.5 * (-1) ** k) for k in ks]).verdict == BOUNDED
    assert classify_growth([(k, 0.0) for k in ks]).verdict == BOUNDED
    assert classify_growth([(k, 1.0) for k in range(5)]).verdict == INCONCLUSIVE
    # slope between tau_flat and tau_grow
    assert classify_growth([(k, math.exp(0.03 * k)) for k in ks]).verdict == INCONCLUSIVE


def test_classify_growth_noise_clamp():
    rep = classify_growth([(k, 1e-16 * 2.0**k) for k in range(40)], magnitudes=[2.0**k for k in range(40)])
    assert rep.verdict == BOUNDED and rep.max == 0


# -- equivalence -----------------------------------------------------------

def test_equivalence_verdicts():
    assert equivalence_test(Linear(1), Sum((Linear(1), SinPlain()))).verdict == BOUNDED
    rep = equivalence_test(Linear(1), Linear(2))
    assert rep.verdict == GROWING and rep.slope == pytest.approx(math.log(2), rel=1e-3)
    rep = equivalence_test(Linear(1), SinLog(0.1, 1))
    assert rep.verdict == GROWING
    assert equivalence_test(SinLog(0.1, 1), SinLog(0.1, 1)).max == 0


def test_equivalence_is_symmetric():
    f, g = Linear(1), SinLog(0.2, 2)
    a, b = equivalence_test(f, g, SMALL), equivalence_test(g, f, SMALL)
    assert a.window_maxima == b.window_maxima


def test_projective_equivalence_linear():
    a, rep = projective_equivalence_test(Linear(2), Linear(1))
    assert abs(a - 2) < 1e-4 and rep.verdict == BOUNDED
    a, rep = projective_equivalence_test(Linear(1), Linear(2))
    assert abs(a - 0.5) < 1e-4 and rep.verdict == BOUNDED


def test_projective_equivalence_complex_ratio():
    a, rep = projective_equivalence_test(Linear(1 + 1j), Linear(1))
    assert abs(a - (1 + 1j)) < 1e-8 and rep.verdict == BOUNDED


def test_projective_distinct_frequencies_growing():
    a, rep = projective_equivalence_test(SinLog(0.1, SQRT2_BETA), SinLog(0.1, SQRT3_BETA))
    assert rep.verdict == GROWING


def test_projective_degenerate_g():
    with pytest.raises(ValueError):
        projective_equivalence_test(Linear(1), Linear(0))


# -- additivity, Hyers, classes --------------------------------------------

def test_additivity_and_hyers_linear():
    assert additivity_defect(Linear(5)).max == 0
    c, rep = hyers_linearize(Linear(5))
    assert c == 5 and rep.verdict == BOUNDED


def test_additivity_bounded_perturbation():
    f = Sum((Linear(1), SinPlain()))
    rep = additivity_defect(f)
    assert rep.verdict == BOUNDED and rep.max <= 3
    c, res = hyers_linearize(f)
    assert abs(c - 1) < 1e-9 and res.verdict == BOUNDED


def test_additivity_sinlog_growing():
    assert additivity_defect(SinLog(0.1, 1)).verdict == GROWING
    c, res = hyers_linearize(SinLog(0.1, 1))
    assert res.verdict == GROWING


def test_in_L_bis():
    ev, ok = in_L_bis(SinLog(0.1, 1))
    assert ok
    maxima = [m for _, m in ev]
    assert maxima[-1] < maxima[len(maxima) // 2]
    assert not in_L_bis(Sum((Linear(1), SinPlain())))[1]


def test_bid_functional():
    assert bid_functional(Linear(3), 4, 2**30) < 1e-12
    assert bid_functional(SinLog(0.1, 1), 4, 64) == pytest.approx(bid_functional(SinLog(0.1, 1), 64, 4))
    value, (n, m) = bid_sweep(SinLog(0.1, SQRT2_BETA), range(2, 41))
    assert value > BID_FLOOR and n != m
    with pytest.raises(ValueError):
        bid_functional(Linear(1), 1, 4)
