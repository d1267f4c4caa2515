import math

import numpy as np
import pytest

from conftest import block_solution_errors, make_instance
from mrmc.gradients import (
    GradientCache,
    StaleCacheError,
    SylvesterSystem,
    build_cache,
    grad_xi_a,
    grad_xi_pd,
    grad_xi_pu,
    rate_gradients_pu,
)
from mrmc.linalg import crandn
from mrmc.metrics import rates
from mrmc.subgradient import DUAL_CAP, polyak_step, project_dual, solve_radar_code, subgradient_block
from mrmc.sylvester import ShiftedSolver, SylvesterError, solve_sylvester


def _zero_weights(state):
    s = state.copy()
    s.W_r = [np.zeros_like(W) for W in s.W_r]
    s.W_u = [np.zeros_like(W) for W in s.W_u]
    s.W_d = [np.zeros_like(W) for W in s.W_d]
    return s


# --- gradients ---------------------------------------------------------------------------------

def test_zero_weights_give_zero_gradients(inst):
    s = _zero_weights(inst.state)
    cache = build_cache(inst.cfg, inst.stats, s)
    args = (inst.cfg, inst.ch, inst.stats, s, inst.symbols, cache)
    assert not np.any(grad_xi_pu(*args, 0, 1))
    assert not np.any(grad_xi_pd(*args, 0, 1))
    assert not np.any(grad_xi_a(*args, 1))


def test_stale_cache_rejected(inst):
    cache = build_cache(inst.cfg, inst.stats, inst.state)
    other = inst.state.copy()
    other.U_u = [U.copy() for U in other.U_u]
    with pytest.raises(StaleCacheError):
        grad_xi_pu(inst.cfg, inst.ch, inst.stats, other, inst.symbols, cache, 0, 0)
    assert isinstance(cache, GradientCache)


def test_zero_cross_channel_gives_zero_cross_rate_gradient(inst):
    ch = inst.ch
    ch.H_ij[0][0] = np.zeros_like(ch.H_ij[0][0])
    rg = rate_gradients_pu(inst.cfg, ch, inst.state, 0, 2)
    assert np.linalg.norm(rg.dl[0]) < 1e-14


def test_rate_gradient_taylor_remainder(inst2, rng):
    cfg, ch, state = inst2.cfg, inst2.ch, inst2.state
    k, i = 3, 1
    g = rate_gradients_pu(cfg, ch, state, i, k).ul[i]
    delta = crandn(rng, *state.P_u[i][k].shape)
    delta *= 0.005 * np.linalg.norm(state.P_u[i][k]) / np.linalg.norm(delta)

    def remainder(d):
        s = state.copy()
        s.P_u[i][k] = state.P_u[i][k] + d
        change = rates(cfg, inst2.bundle(s)).R_u[i, k] - rates(cfg, inst2.bundle()).R_u[i, k]
        return abs(change - 2.0 * np.real(np.vdot(g, d)))

    r1, r2 = remainder(delta), remainder(delta / 2)
    assert r2 < 0.3 * r1  # second order: about a quarter


def test_gradient_families_against_finite_differences():
    from mrmc.oracles import gradient_suite

    reports = gradient_suite(seed=1)
    assert len(reports) >= 15
    assert all(r.passed for r in reports), [r.line() for r in reports if not r.passed]


# --- Sylvester ---------------------------------------------------------------------------------

def test_sylvester_without_coupling(rng):
    G = crandn(rng, 3, 3)
    A = G @ G.conj().T + np.eye(3)
    C = crandn(rng, 3, 2)
    X = solve_sylvester(A, [np.eye(3)], [np.zeros((2, 2))], C)
    assert np.allclose(X, np.linalg.solve(A, C), rtol=1e-12, atol=1e-12)


def test_sylvester_identity_coefficients(rng):
    C = crandn(rng, 2, 2)
    X = solve_sylvester(np.eye(2), [np.eye(2)], [np.eye(2)], C)
    assert np.allclose(X, C / 2, rtol=0, atol=1e-15)


def test_sylvester_three_terms_residual(rng):
    n, q = 4, 2
    def psd(m):
        G = crandn(rng, m, m)
        return G @ G.conj().T
    A, F1, F2 = psd(n) + 0.1 * np.eye(n), psd(n), psd(n)
    b1, b2 = crandn(rng, q), crandn(rng, q)
    B1, B2 = np.outer(b1, b1.conj()), np.outer(b2, b2.conj())
    C = crandn(rng, n, q)
    X = solve_sylvester(A, [F1, F2], [B1, B2], C)
    res = A @ X + F1 @ X @ B1 + F2 @ X @ B2 - C
    assert np.linalg.norm(res) < 1e-10 * np.linalg.norm(C)


def test_sylvester_singular_and_bad_shapes():
    with pytest.raises(SylvesterError):
        solve_sylvester(np.zeros((2, 2)), [np.zeros((2, 2))], [np.eye(1)], np.ones((2, 1)))
    with pytest.raises(ValueError):
        solve_sylvester(np.eye(2), [np.eye(2)], [np.eye(3)], np.ones((2, 2)))


def test_shifted_solver_matches_dense(rng):
    A0 = np.diag([1.0, 2.0, 3.0]).astype(complex)
    F = np.eye(3, dtype=complex)
    b = crandn(rng, 2)
    B = np.outer(b, b.conj())
    C0, own = crandn(rng, 3, 2), crandn(rng, 3, 2)
    system = SylvesterSystem(A0, [F], [B], C0, np.zeros((3, 2), complex), own)
    X = ShiftedSolver(system).solve(0.7, 0.3)
    ref = solve_sylvester(A0 + 0.7 * np.eye(3), [F], [B], C0 + 0.3 * own)
    assert np.allclose(X, ref, rtol=1e-12, atol=1e-12)
    assert system.residual(X, 0.7, 0.3) < 1e-12


@pytest.mark.parametrize("block,idx", [("ul", 0), ("dl", 0), ("radar", 0)])
def test_block_solutions_are_stationary(block, idx):
    inst = make_instance(11)
    res, stat = block_solution_errors(inst, block, idx, 2, lam=0.4, mu=0.6)
    assert res < 1e-10
    assert stat < 1e-8


def test_dl_kronecker_dimension_at_defaults():
    from mrmc.config import scenario_defaults

    cfg = scenario_defaults()
    assert (cfg.M_c * cfg.D_d[0]) ** 2 == 64


# --- Polyak steps and dual loop -------------------------------------------------------------------

def test_polyak_step_examples():
    assert polyak_step(1, 2.0, 1.0, 2.0) == pytest.approx(0.275, abs=1e-15)
    assert polyak_step(3, 1.0, 1.0, 0.0) == 0.0
    assert polyak_step(12, 1.0, 1.0, 1.0) == pytest.approx(1e-12, rel=1e-9)
    assert project_dual(-3.0) == 0.0 and project_dual(1e9) == DUAL_CAP


def _scalar_system(a0=1.0, c=2.0):
    return SylvesterSystem(np.array([[a0]], complex), [np.zeros((1, 1), complex)], [np.zeros((1, 1), complex)],
                           np.array([[c]], complex), np.zeros((1, 1), complex), np.zeros((1, 1), complex))


def test_subgradient_argument_check():
    with pytest.raises(ValueError):
        subgradient_block(_scalar_system(), np.zeros((1, 1), complex), np.eye(1), 0.0, 1.0, 0.0, t_max=0)


def test_subgradient_zero_duals_slack_constraints():
    # minimizer |x| = 2 lies inside the power ball, QoS threshold zero
    res = subgradient_block(_scalar_system(), np.zeros((1, 1), complex), np.eye(1), 0.0, 10.0, 0.0,
                            t_max=20, lam0=0.0, mu0=0.0)
    assert res.lam == 0.0 and res.mu == 0.0
    assert res.P[0, 0] == pytest.approx(2.0, abs=1e-14)


def test_subgradient_power_violating_start(inst):
    cfg = inst.cfg
    res = subgradient_block(_scalar_system(1e-3, 5.0), np.array([[10.0 + 0j]]), np.eye(1), 0.0, 1.0, 0.0, t_max=200)
    assert res.power_feasible
    assert abs(res.P[0, 0]) ** 2 <= 1.0 + 1e-6
    assert res.lam >= 0 and res.mu >= 0
    assert res.iterations == 200 and len(res.trace) == 200
    assert cfg.t_u_max > 0


def test_subgradient_best_not_worse_than_incoming(inst2):
    from mrmc.gradients import ul_system

    cfg = inst2.cfg
    state = inst2.state
    state.ensure_duals(cfg)
    cache = build_cache(cfg, inst2.stats, state)
    for k in range(cfg.K):
        system = ul_system(cfg, inst2.ch, inst2.stats, state, inst2.symbols, cache, 1, k,
                           state.mu_u[:, k], state.mu_d[:, k])
        res = subgradient_block(system, state.P_u[1][k], np.eye(cfg.N_u[1]), 0.0, cfg.P_U, cfg.R_UL, 30)
        assert res.xi_best <= res.xi_start + 1e-12
        assert res.lam >= 0 and res.mu >= 0
        assert res.power_feasible


def test_radar_code_identity_example():
    e1 = np.array([1.0, 0.0, 0.0], complex)
    system = SylvesterSystem(np.zeros((3, 3), complex), [np.eye(3, dtype=complex)], [np.eye(1)], e1[:, None],
                             np.zeros((3, 1), complex), np.zeros((3, 1), complex))
    res = solve_radar_code(system, np.zeros(3, complex))
    assert np.array_equal(res.a, e1) and not res.fallback


def test_radar_code_scalar_example():
    system = SylvesterSystem(np.array([[2.0 + 0j]]), [np.array([[3.0 + 0j]])], [np.eye(1)],
                             np.array([[5.0 + 1j]]), np.zeros((1, 1), complex), np.zeros((1, 1), complex))
    res = solve_radar_code(system, np.zeros(1, complex))
    assert res.a[0] == pytest.approx((5.0 + 1j) / 5.0, abs=1e-15)


def test_radar_code_falls_back_when_rate_term_hurts():
    system = SylvesterSystem(np.eye(1, dtype=complex), [np.zeros((1, 1), complex)], [np.eye(1)],
                             np.array([[1.0 + 0j]]), np.array([[-100.0 + 0j]]), np.zeros((1, 1), complex))
    res = solve_radar_code(system, np.array([1.0 + 0j]))
    assert res.fallback and res.a[0] == pytest.approx(1.0) and res.xi_new <= res.xi_old
    assert math.isfinite(res.xi_new)
