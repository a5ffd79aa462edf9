import math

import numpy as np
import pytest

from ioncavity.atom import EmitterModel, scheme_rates
from ioncavity.bounds import p_escape
from ioncavity.cavity import CavityModel
from ioncavity.explorer import (evaluate_future, evaluate_point,
                                scheme_ladder, sweep_t2)


@pytest.fixture(scope="module")
def cavity():
    return CavityModel.from_parameters(19.906e-3, 9.984e-3, 854e-9,
                                       2.9e-6, 90e-6, 23e-6)


@pytest.fixture(scope="module")
def v_scheme():
    return scheme_rates(EmitterModel.default(), (-1.5, -2.5))


def test_sweep_paper_checkpoints(v_scheme, cavity):
    curve = sweep_t2(v_scheme, cavity, 10e-6, 1000e-6, 200)
    # operating point and optimum
    at_90 = evaluate_point(v_scheme, cavity, t2=90e-6)
    assert at_90.p_bound == pytest.approx(0.73, abs=0.005)
    at_216 = evaluate_point(v_scheme, cavity, t2=216e-6)
    assert at_216.p_bound == pytest.approx(0.78, abs=0.01)
    assert curve.annotations["t2_opt"] * 1e6 == pytest.approx(216, abs=2)
    assert curve.annotations["t2_opt_pure"] * 1e6 == pytest.approx(61, abs=1)


def test_sweep_argmax_on_fine_grid(v_scheme, cavity):
    # argmax over a 1-ppm grid lands within one step of the closed form
    curve = sweep_t2(v_scheme, cavity, 150e-6, 300e-6, 151, grid="linear")
    best = curve.x[int(np.argmax(curve.p_bound))]
    assert abs(best - curve.annotations["t2_opt"]) <= 1.0e-6 + 1e-12


def test_sweep_points_consistent(v_scheme, cavity):
    curve = sweep_t2(v_scheme, cavity, 10e-6, 1000e-6, 60)
    # P_bound = P_in * P_esc recomputed independently at every point
    for x, pb, pi, pe in zip(curve.x, curve.p_bound, curve.p_in, curve.p_esc):
        assert pb == pytest.approx(pi * pe, rel=1e-12)
        assert pe == pytest.approx(
            p_escape(x, cavity.mirrors.alpha_loss), rel=1e-12)
    assert np.all((0 <= curve.p_bound) & (curve.p_bound <= 1))
    assert np.all(np.diff(curve.x) > 0)


def test_sweep_validation(v_scheme, cavity):
    with pytest.raises(ValueError):
        sweep_t2(v_scheme, cavity, 1e-4, 1e-5, 10)
    with pytest.raises(ValueError):
        sweep_t2(v_scheme, cavity, 1e-5, 1e-4, 1)


def test_ladder_pure_fractions(v_scheme, cavity):
    pts = scheme_ladder(v_scheme, cavity)
    labels = [p.label for p in pts]
    assert labels == ["A", "B", "C", "D"]
    fracs = [p.pure_fraction for p in pts]
    assert fracs[0] == pytest.approx(0.53, abs=0.005)
    assert all(b > a for a, b in zip(fracs, fracs[1:]))
    assert fracs[-1] >= 0.85
    # scheme D evaluated independently: C -> 6 C_A
    c_a = pts[0].cooperativity
    assert pts[3].cooperativity == pytest.approx(6 * c_a, rel=1e-9)
    r_u = v_scheme.r_u
    two_c = 2 * pts[3].cooperativity
    p_in = two_c / (1 + two_c - r_u)
    assert pts[3].p_bound == pytest.approx(p_in * pts[3].p_esc, rel=1e-12)
    assert pts[3].p_bound == pytest.approx(0.77, abs=0.005)


def test_ladder_below_escape(v_scheme, cavity):
    esc = p_escape(cavity.mirrors.t2, cavity.mirrors.alpha_loss)
    assert esc == pytest.approx(0.78, abs=0.005)
    for p in scheme_ladder(v_scheme, cavity):
        assert p.p_bound < esc


def test_future_systems(v_scheme, cavity):
    for cfg in ("low-loss", "small-waist", "ten-ion"):
        pt = evaluate_future(cfg, v_scheme, cavity)
        assert 0.88 <= pt.p_bound <= 0.92, cfg
        assert 0.88 <= pt.pure_fraction <= 0.92, cfg
        # exact evaluation stays in the paper's 0.895-0.900 window
        assert 0.893 <= pt.p_bound <= 0.901, cfg


def test_future_unknown_id(v_scheme, cavity):
    with pytest.raises(ValueError):
        evaluate_future("fiber", v_scheme, cavity)


def test_waist_and_mode_area_paths_agree(v_scheme, cavity):
    from ioncavity.cavity import a_tilde_from_waist
    w0 = 3.9e-6
    via_w0 = evaluate_point(v_scheme, cavity, zeta=1.0, t2=252e-6, w0=w0)
    via_at = evaluate_point(v_scheme, cavity, zeta=1.0, t2=252e-6,
                            a_tilde=a_tilde_from_waist(w0, 854e-9))
    assert via_w0.p_bound == pytest.approx(via_at.p_bound, rel=1e-12)
    assert via_w0.pure_fraction == pytest.approx(via_at.pure_fraction,
                                                 rel=1e-12)
    with pytest.raises(ValueError):
        evaluate_point(v_scheme, cavity, w0=w0, a_tilde=30.0)


def test_ten_ion_matches_explicit_scaling(v_scheme, cavity):
    ten = evaluate_future("ten-ion", v_scheme, cavity)
    one = evaluate_point(v_scheme, cavity, zeta=1.0, t2=252e-6)
    assert ten.cooperativity == pytest.approx(10 * one.cooperativity,
                                              rel=1e-12)
