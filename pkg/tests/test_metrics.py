import math

import numpy as np
import pytest

from conftest import make_instance
from mrmc.config import reduced_config
from mrmc.linalg import crandn
from mrmc.metrics import (
    Filters,
    cwsm,
    duality_residual,
    filtered_mi,
    mi_radar,
    mi_ul,
    mmse_filters,
    mmse_matrices,
    mse_matrices,
    optimal_weights,
    rates,
    rates_from_mmse,
    refresh_filters,
    snapshot,
    weighted_sum_mse,
    weighted_sum_mse_direct,
)
from mrmc.state import zero_state


def test_mi_trivial_cases():
    assert mi_radar(np.eye(2), np.zeros((2, 2)), np.eye(2)) == 0.0
    assert mi_radar(np.eye(1), np.eye(1), np.eye(1)) == pytest.approx(1.0, abs=1e-15)
    assert mi_ul(np.eye(1), np.array([[10.0]]), np.eye(1)) == pytest.approx(math.log2(11.0), abs=1e-14)
    assert mi_ul(np.eye(2), np.zeros((2, 2)), np.eye(2)) == 0.0


def test_mi_rank_deficient_filter_uses_its_range(rng):
    R_sig = np.diag([4.0, 1.0, 0.0])
    U = np.array([[1.0, 0.0, 0.0], [2.0, 0.0, 0.0]])  # rank one
    assert filtered_mi(U, R_sig, np.eye(3)) == pytest.approx(math.log2(5.0), abs=1e-13)


def test_cwsm_arithmetic():
    cfg = reduced_config(I=2, J=2, N_u=(1, 1), D_u=(1, 1), N_d=(1, 1), D_d=(1, 1), N_r=4, K=8, M_c=2)
    I_u = np.ones((2, 8))
    I_d = np.ones((2, 8))
    ones = cfg.replace(alpha_r=(1.0,) * 4, alpha_u=(1.0,) * 2, alpha_d=(1.0,) * 2)
    assert cwsm(ones, np.ones(4), I_u, I_d) == 36.0
    assert cwsm(cfg, 8 * np.ones(4), 8 * I_u, 8 * I_d) == pytest.approx(36.0, rel=1e-15)
    zero = cfg.replace(alpha_r=(0.0,) * 4, alpha_u=(0.0,) * 2, alpha_d=(0.0,) * 2)
    assert cwsm(zero, np.ones(4), I_u, I_d) == 0.0
    single = cfg.replace(alpha_r=(1.0, 0, 0, 0), alpha_u=(0.0,) * 2, alpha_d=(0.0,) * 2)
    assert cwsm(single, [2.5, 7, 7, 7], I_u, I_d) == 2.5


def test_zero_precoder_gives_zero_filter(inst):
    s = inst.state.copy()
    s.P_u[0] = np.zeros_like(s.P_u[0])
    f = mmse_filters(inst.cfg, inst.ch, s, inst.bundle(s))
    assert not np.any(f.U_u[0])


def test_mse_with_zero_filters(inst):
    cfg = inst.cfg
    b = inst.bundle()
    zeros = Filters([np.zeros_like(U) for U in inst.state.U_r], [np.zeros_like(U) for U in inst.state.U_u],
                    [np.zeros_like(U) for U in inst.state.U_d])
    E = mse_matrices(cfg, inst.ch, inst.state, b, zeros)
    assert np.allclose(E.E_u[0], np.eye(cfg.D_u[0])[None], atol=0)
    assert np.allclose(E.E_r[0], b.Sigma_t[0], atol=0)


def test_mse_at_mmse_filters_matches_closed_form(inst):
    b = inst.bundle()
    E = mse_matrices(inst.cfg, inst.ch, inst.state, b, mmse_filters(inst.cfg, inst.ch, inst.state, b))
    Es = mmse_matrices(inst.cfg, inst.ch, inst.state, b)
    for a, c in [(E.E_r[0], Es.E_r[0]), (E.E_u[0], Es.E_u[0]), (E.E_d[0], Es.E_d[0])]:
        assert np.linalg.norm(a - c) <= 1e-10 * np.linalg.norm(c)


def _perturbed(f: Filters, rng, scale):
    def bump(U):
        d = crandn(rng, *U.shape)
        return U + scale * d / np.linalg.norm(d)
    return Filters([bump(U) for U in f.U_r], [bump(U) for U in f.U_u], [bump(U) for U in f.U_d])


def test_mmse_filter_optimality(inst, rng):
    cfg = inst.cfg
    b = inst.bundle()
    best = mmse_filters(cfg, inst.ch, inst.state, b)
    E_best = mse_matrices(cfg, inst.ch, inst.state, b, best)
    for _ in range(100):
        E = mse_matrices(cfg, inst.ch, inst.state, b, _perturbed(best, rng, rng.uniform(0, 1)))
        for a, c in [(E.E_r[0], E_best.E_r[0]), (E.E_u[0][1], E_best.E_u[0][1]), (E.E_d[0][2], E_best.E_d[0][2])]:
            assert np.linalg.eigvalsh(a - c).min() >= -1e-10
        W = inst.state
        assert np.trace(W.W_r[1] @ E.E_r[1]).real >= np.trace(W.W_r[1] @ E_best.E_r[1]).real - 1e-10


def test_optimal_weights():
    assert np.allclose(optimal_weights(np.eye(3)), np.eye(3), atol=0)
    assert np.allclose(optimal_weights(np.diag([0.5, 0.25])), np.diag([2.0, 4.0]), rtol=1e-15)
    rng = np.random.default_rng(0)
    G = crandn(rng, 4, 4)
    E = G @ G.conj().T + 0.1 * np.eye(4)
    W = optimal_weights(E)
    assert np.linalg.norm(W @ E - np.eye(4)) < 1e-10
    assert np.linalg.norm(W - W.conj().T) == 0.0


def test_zero_signal_rates_are_zero():
    cfg = reduced_config()
    inst = make_instance(2, refresh=False)
    s = zero_state(cfg)
    s.A = inst.state.A.copy()
    r = rates(cfg, inst.bundle(s))
    assert np.all(r.R_u == 0.0) and np.all(r.R_d == 0.0)


def test_woodbury_forms_agree(inst2):
    b = inst2.bundle()
    r1 = rates(inst2.cfg, b)
    r2 = rates_from_mmse(inst2.cfg, b, mmse_matrices(inst2.cfg, inst2.ch, inst2.state, b))
    for a, c in [(r1.R_r, r2.R_r), (r1.R_u, r2.R_u), (r1.R_d, r2.R_d)]:
        assert np.allclose(a, c, rtol=1e-8, atol=0)


def test_mi_at_mmse_equals_rates_and_bounds_them(inst2, rng):
    cfg = inst2.cfg
    b = inst2.bundle()
    snap = snapshot(cfg, inst2.ch, inst2.state, b)
    assert np.allclose(snap.I_r, snap.rates.R_r, rtol=1e-8)
    assert np.allclose(snap.I_u, snap.rates.R_u, rtol=1e-8)
    other = _perturbed(mmse_filters(cfg, inst2.ch, inst2.state, b), rng, 0.5)
    worse = snapshot(cfg, inst2.ch, inst2.state, b, filters=other)
    assert np.all(worse.I_u <= snap.rates.R_u + 1e-10) and np.all(worse.I_d <= snap.rates.R_d + 1e-10)
    assert np.all(worse.I_r >= 0) and np.all(worse.I_u >= 0)


def test_weighted_mse_expanded_matches_direct(inst2):
    b = inst2.bundle()
    E = mse_matrices(inst2.cfg, inst2.ch, inst2.state, b)
    direct = weighted_sum_mse_direct(inst2.cfg, E, inst2.state)
    expanded = weighted_sum_mse(inst2.cfg, inst2.ch, inst2.stats, inst2.state, inst2.symbols)
    for a, c in [(expanded.Xi_UL, direct.Xi_UL), (expanded.Xi_DL, direct.Xi_DL), (expanded.Xi_r, direct.Xi_r)]:
        assert a == pytest.approx(c, rel=1e-10)


def test_weighted_mse_trivial_weights(inst):
    cfg = inst.cfg
    s = inst.state.copy()
    s.W_r = [np.zeros_like(W) for W in s.W_r]
    s.W_u = [np.zeros_like(W) for W in s.W_u]
    s.W_d = [np.zeros_like(W) for W in s.W_d]
    assert weighted_sum_mse(cfg, inst.ch, inst.stats, s, inst.symbols).total == 0.0
    s.U_u = [np.zeros_like(U) for U in s.U_u]
    s.W_u = [np.broadcast_to(np.eye(d), (cfg.K, d, d)).copy() for d in cfg.D_u]
    xi = weighted_sum_mse(cfg, inst.ch, inst.stats, s, inst.symbols)
    assert xi.Xi_UL == pytest.approx(cfg.K * sum(a * d for a, d in zip(cfg.alpha_u, cfg.D_u)), rel=1e-14)


def test_duality_identity_random_and_degenerate(inst2):
    cfg = inst2.cfg
    b = inst2.bundle()
    res = duality_residual(cfg, inst2.ch, inst2.stats, inst2.state, inst2.symbols, b)
    assert res <= 1e-8 * (1 + abs(snapshot(cfg, inst2.ch, inst2.state, b).I_CWSM))
    s = zero_state(cfg)
    refresh_filters(cfg, inst2.ch, s, inst2.bundle(s))
    b0 = inst2.bundle(s)
    assert snapshot(cfg, inst2.ch, s, b0).I_CWSM == 0.0
    assert duality_residual(cfg, inst2.ch, inst2.stats, s, inst2.symbols, b0) < 1e-9


def test_scalar_link_oracles():
    from mrmc.oracles import scalar_link_suite

    reports = scalar_link_suite()
    assert all(r.passed for r in reports), [r.line() for r in reports]


def test_filter_refresh_never_decreases_objective(inst, rng):
    cfg = inst.cfg
    s = inst.state.copy()
    f = _perturbed(Filters(s.U_r, s.U_u, s.U_d), rng, 0.3)
    b = inst.bundle(s)
    before = snapshot(cfg, inst.ch, s, b, filters=f).I_CWSM
    refresh_filters(cfg, inst.ch, s, b)
    assert snapshot(cfg, inst.ch, s, b).I_CWSM >= before - 1e-10


def test_mi_monotone_in_power_single_user():
    cfg = reduced_config(J=1, I=1)
    inst = make_instance(6, refresh=False)
    s = zero_state(cfg)
    s.P_u = [p.copy() for p in inst.state.P_u]
    prev = -1.0
    for c in (0.5, 1.0, 2.0, 4.0):
        t = s.copy()
        t.P_u[0] = c * s.P_u[0]
        b = inst.bundle(t)
        val = snapshot(cfg, inst.ch, t, b, filters=mmse_filters(cfg, inst.ch, t, b)).I_u[0].sum()
        assert val >= prev
        prev = val
