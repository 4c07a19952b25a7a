import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats as sps

from micromaser import PumpConfig
from micromaser.errors import (RoundingWarning, TruncationWarning, UndefinedStatisticError,
                               WindowError)
from micromaser.fock import make_space
from micromaser.maps import MapKind, steady_populations
from micromaser.stats import (QReport, Window, closed_form_report, count_distribution,
                              counting_process, decompose, field_q, limit_predictions, moments,
                              q_closed_form_two_level, q_direct, q_distribution, q_from_moments,
                              q_spectral, thermal_beta)
from micromaser.superop import operators

from conftest import BETA1, SOLVABLE_GT

ALPHA1 = 1 - BETA1
N_INF, T_INF = Window.fixed_n(), Window.fixed_t()


def two_level(nex, p=0.0, **kw):
    return PumpConfig(SOLVABLE_GT, nex, p=p, **kw)


# windows and processes

def test_window_validation():
    with pytest.raises(WindowError):
        Window("x", 3)
    with pytest.raises(WindowError):
        Window.fixed_n(2.5)
    with pytest.raises(WindowError):
        Window.fixed_t(0)
    assert Window.fixed_n(20).label == "N=20"
    assert T_INF.label == "t=inf"


def test_slot_rounding_warns():
    cfg = PumpConfig(1.0, 2.0, p=0.5)  # slot = 0.25
    with pytest.warns(RoundingWarning):
        proc = counting_process(cfg, Window.fixed_t(1.1))
    assert proc.steps == 4


# count distributions

def test_no_interaction_all_excited():
    cfg = PumpConfig(0.0, 1.0, p=0.5)
    dist = count_distribution(Window.fixed_n(12), cfg)
    assert dist.w_e[12] == pytest.approx(1.0, abs=1e-14)


def test_weak_pumping_binomial_counts():
    cfg = two_level(1e-4, p=0.5)
    N = 20
    w_g = count_distribution(Window.fixed_n(N), cfg).w_g
    ref = sps.binom.pmf(np.arange(N + 1), N, BETA1)
    # corrections are first order in the pump
    assert np.abs(w_g - ref).max() < 1e-3


def test_weak_poisson_pumping_poisson_counts():
    cfg = two_level(1e-4)
    t = 3.0
    dist = count_distribution(Window.fixed_t(t), cfg)
    mean = cfg.rate * t * BETA1
    w_g = dist.w_g
    assert w_g[:2] == pytest.approx(sps.poisson.pmf(np.arange(2), mean), rel=1e-3)
    # pairs are suppressed within a cavity lifetime, but they are too rare to show in Q
    assert dist.mandel_q("g") == pytest.approx(0.0, abs=1e-4)


@pytest.mark.parametrize("window,p", [(Window.fixed_n(7), 0.5), (Window.fixed_t(2.0), 0.5),
                                      (Window.fixed_t(2.0), 0.0), (Window.fixed_n(7), 0.0)])
def test_distribution_normalized_and_consistent(window, p, fig4_cfg):
    cfg = fig4_cfg.replace(p=p, eta_e=0.8, eta_g=0.6)
    dist = count_distribution(window, cfg)
    assert dist.total == pytest.approx(1.0, abs=1e-10)
    assert dist.table.min() > -1e-14
    rep_d = q_distribution(cfg, window)
    rep = q_direct(cfg, window)
    for nu in "eg":
        assert rep_d.q(nu) == pytest.approx(rep.q(nu), abs=1e-8)
        assert rep_d.mean(nu) == pytest.approx(rep.mean(nu), abs=1e-9)


def test_distribution_needs_finite_window(fig4_cfg):
    with pytest.raises(WindowError):
        count_distribution(N_INF, fig4_cfg)
    with pytest.raises(WindowError):
        count_distribution(Window.fixed_n(500), fig4_cfg, cap=200)


def test_custom_start_state(fig4_cfg):
    space = make_space(3)
    cfg = fig4_cfg.replace(p=0.5)
    pops = np.array([0.0, 1.0, 0.0, 0.0])
    with pytest.warns(TruncationWarning):
        dist = count_distribution(Window.fixed_n(3), cfg, rho_start=pops, space=space)
    assert dist.total == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        count_distribution(Window.fixed_n(3), cfg, rho_start=[0.5, 0.6, 0, 0], space=space)


# moments

def test_mean_ground_counts_weak_pumping():
    mean, _ = moments(Window.fixed_n(100), two_level(1e-4, p=0.5), "g")
    assert mean == pytest.approx(100 * BETA1, rel=1e-3)


def test_blind_detector_counts_nothing(fig4_cfg):
    cfg = fig4_cfg.replace(eta_g=0.0)
    assert moments(Window.fixed_n(10), cfg, "g") == (0.0, 0.0)
    rep = q_direct(cfg, N_INF)
    assert rep.q_g == 0.0 and rep.mean_g == 0.0


def test_fixed_time_poisson_mean(fig4_cfg):
    cfg = fig4_cfg.replace(p=0.0, eta_g=0.7)
    t = 2.5
    space = counting_process(cfg, Window.fixed_t(t)).space
    rho = steady_populations(MapKind.fixed_t(), cfg, space)
    expected = cfg.rate * t * 0.7 * operators(cfg, space).F_g.apply_populations(rho).sum()
    mean, _ = moments(Window.fixed_t(t), cfg, "g")
    assert mean == pytest.approx(expected, rel=1e-12)


# Q-parameters

@pytest.mark.parametrize("nex", [0.3, 1.0, 7.0])
def test_poisson_fixed_time_ground_q(nex):
    cfg = two_level(nex, eta_g=0.8)
    x = BETA1 * nex
    assert q_direct(cfg, T_INF).q_g == pytest.approx(-2 * 0.8 * x / (x + 1) ** 2, abs=1e-12)


def test_weak_pumping_excited_q():
    q = q_direct(two_level(1e-6, eta_e=0.9), N_INF).q_e
    assert q == pytest.approx(-0.9 * ALPHA1, abs=1e-5)


@pytest.mark.parametrize("p", [0.0, 0.3, 1.0])
def test_strong_pumping(p):
    cfg = two_level(1e4, p=p)
    rn, rt = q_direct(cfg, N_INF), q_direct(cfg, T_INF)
    assert -1.0 <= rn.q_e <= -0.99
    assert rt.q_e == pytest.approx(-p, abs=0.01)
    assert rn.q_g == pytest.approx(0, abs=0.01)
    assert rt.q_g == pytest.approx(0, abs=0.01)


def test_spectral_components(fig4_cfg):
    proc = counting_process(fig4_cfg, N_INF)
    sd = decompose(proc)
    assert sd.eigenvalues[0] == pytest.approx(1.0, abs=1e-12)
    assert np.abs(sd.right[:, 1:].sum(axis=0)).max() < 1e-10
    assert sd.biorthogonality_error() < 1e-10
    np.testing.assert_allclose(sd.right[:, 0].real, proc.rho_ss, atol=1e-12)
    ops = operators(fig4_cfg, proc.space)
    trace_fg = ops.F_g.apply_populations(proc.rho_ss).sum()
    assert sd.c_right["g"][0].real == pytest.approx(trace_fg, abs=1e-13)


def test_spectral_generator_components(fig4_cfg):
    sd = decompose(counting_process(fig4_cfg.replace(p=0.0), T_INF))
    assert abs(sd.eigenvalues[0]) < 1e-10
    assert np.all(sd.eigenvalues[1:].real < 0)


@pytest.mark.parametrize("p", [0.25, 0.5, 1.0])
@pytest.mark.parametrize("nex", [0.5, 3.0, 40.0])
def test_spectral_matches_closed_form(p, nex):
    cfg = two_level(nex, p=p)
    for window in (N_INF, T_INF):
        rep = q_spectral(cfg, window)
        for nu in "eg":
            assert rep.q(nu) == pytest.approx(q_closed_form_two_level(cfg, nu, window), abs=1e-10)


@settings(max_examples=60, deadline=None)
@given(st.floats(1e-3, 1.0), st.floats(1e-3, 1e3))
def test_binomial_fixed_time_ground_q_negative(p, nex):
    assert q_closed_form_two_level(two_level(nex, p=p), "g", T_INF) < 0


def test_poisson_closed_form_values():
    assert q_closed_form_two_level(two_level(1.0), "g", T_INF) == pytest.approx(-0.475, abs=5e-4)
    assert abs(q_closed_form_two_level(two_level(1e9), "g", T_INF)) < 1e-8
    assert q_closed_form_two_level(two_level(0.0), "g", T_INF) == 0.0


def test_closed_form_refuses_other_points():
    with pytest.raises(ValueError):
        q_closed_form_two_level(PumpConfig(1.54, 1.0), "g", T_INF)
    with pytest.raises(ValueError):
        q_closed_form_two_level(two_level(1.0, nbar=0.1), "g", T_INF)
    with pytest.raises(WindowError):
        q_closed_form_two_level(two_level(1.0), "g", Window.fixed_t(3))
    rep = closed_form_report(two_level(2.0, p=0.5), N_INF)
    assert rep.method == "closed_form" and rep.q_e < 0


def test_limit_predictions_solvable_point():
    lim = limit_predictions(two_level(1.0, eta_e=1.0, eta_g=1.0))
    assert lim["low", "N"].q_g == pytest.approx(-0.633, abs=5e-4)
    assert lim["low", "N"].q_e == pytest.approx(-0.367, abs=5e-4)
    assert lim["low", "t"].q_g == 0.0 and lim["low", "t"].q_e == 0.0
    assert lim["high", "N"].q_e == -1.0


@pytest.mark.parametrize("nbar", [0.0, 0.2])
def test_limit_predictions_weak_pumping(nbar):
    cfg = PumpConfig(1.54, 1e-6, nbar=nbar, p=0.5, eta_g=0.7)
    lim = limit_predictions(cfg)
    rep_n, rep_t = q_direct(cfg, N_INF), q_direct(cfg, T_INF)
    assert rep_n.q_g == pytest.approx(lim["low", "N"].q_g, abs=1e-4)
    assert rep_t.q_g == pytest.approx(lim["low", "t"].q_g, abs=1e-4)
    assert lim["low", "N"].extra["beta_g"] == pytest.approx(thermal_beta(cfg), abs=0)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.2, 3.0), st.floats(0.1, 20.0), st.floats(0.0, 0.3))
def test_regular_pumping_windows_coincide(gt, nex, nbar):
    cfg = PumpConfig(gt, nex, nbar=nbar, p=1.0)
    rn, rt = q_direct(cfg, N_INF), q_direct(cfg, T_INF)
    assert rn.q_e == pytest.approx(rt.q_e, abs=1e-9)
    assert rn.q_g == pytest.approx(rt.q_g, abs=1e-9)
    K = 6
    fn, ft = q_direct(cfg, Window.fixed_n(K)), q_direct(cfg, Window.fixed_t(K / cfg.rate))
    assert fn.q_g == pytest.approx(ft.q_g, abs=1e-9)


@pytest.mark.parametrize("window", [N_INF, T_INF, Window.fixed_n(9), Window.fixed_t(1.5)])
def test_efficiency_scales_q(window, fig4_cfg):
    base = q_direct(fig4_cfg, window)
    for eta in (0.25, 0.5):
        rep = q_direct(fig4_cfg.replace(eta_e=eta, eta_g=eta), window)
        assert rep.q_e == pytest.approx(eta * base.q_e, abs=1e-12)
        assert rep.q_g == pytest.approx(eta * base.q_g, abs=1e-12)


@pytest.mark.parametrize("cfg", [PumpConfig(1.54, 5.0, nbar=0.145, p=0.5),
                                 PumpConfig(0.9, 2.0, nbar=0.0, p=0.0),
                                 PumpConfig(SOLVABLE_GT, 0.4, p=0.2)])
def test_variance_nonnegative(cfg):
    for window in (Window.fixed_n(5), Window.fixed_t(1.0), N_INF, T_INF):
        rep = q_direct(cfg, window)
        for nu in "eg":
            # Var/mean = Q + 1
            assert rep.q(nu) + 1 >= -1e-10


def test_fixed_time_binomial_to_poisson(fig4_cfg):
    target = q_direct(fig4_cfg.replace(p=0.0), T_INF)
    errs = [abs(q_direct(fig4_cfg.replace(p=p), T_INF).q_g - target.q_g) for p in (0.02, 0.01, 0.005)]
    assert errs[2] < 0.02
    assert errs[0] / errs[1] == pytest.approx(2, rel=0.1)
    assert errs[1] / errs[2] == pytest.approx(2, rel=0.1)


def test_moments_route(fig4_cfg):
    w = Window.fixed_n(30)
    a, b = q_from_moments(fig4_cfg, w), q_direct(fig4_cfg, w)
    assert a.q_e == pytest.approx(b.q_e, abs=1e-10)
    assert a.mean_g == pytest.approx(b.mean_g, abs=1e-10)


def test_asymptotic_means_per_atom(fig4_cfg):
    rep = q_direct(fig4_cfg, N_INF)
    assert rep.mean_e + rep.mean_g == pytest.approx(1.0, abs=1e-12)
    rep = q_direct(fig4_cfg.replace(p=0.0), T_INF)
    assert rep.mean_e + rep.mean_g == pytest.approx(1.0, abs=1e-12)


def test_undefined_without_ground_atoms():
    with pytest.raises(UndefinedStatisticError):
        q_direct(PumpConfig(0.0, 1.0, p=0.5), N_INF)


def test_field_q(fig4_cfg):
    assert field_q(PumpConfig(1.0, 0.0)) is None
    assert field_q(PumpConfig(1.0, 1e-9, nbar=0.3)) == pytest.approx(0.3, abs=1e-6)
    assert field_q(two_level(1e4)) == pytest.approx(-1.0, abs=1e-3)
    rep = q_direct(fig4_cfg, N_INF)
    assert isinstance(rep, QReport) and rep.q_f == field_q(fig4_cfg)
