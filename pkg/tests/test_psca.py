import numpy as np
import pytest

from conftest import make_instance, solver_kw
from irs_covert import two_stage as ts
from irs_covert.covertness import CovertnessBudget, kl_radius
from irs_covert.forms import build_quadratic_forms, lift
from irs_covert.psca import (PscaConfig, extract_rank_one, initial_feasible_point,
                             penalized_objective, psca_optimize, solve_relaxed,
                             solve_relaxed_upper_bound, solve_subproblem)

pytestmark = pytest.mark.filterwarnings("ignore::UserWarning")


def _tr(M, W):
    return float(np.real(np.trace(M @ W)))


def _check_constraints(qf, W, p_a, radius, p_max, tol=1e-7):
    n = qf.n_elements
    scale = max(p_a, 1e-300)
    assert np.min(np.linalg.eigvalsh(W)) >= -tol * np.trace(W).real
    assert p_a <= p_max * (1 + tol)
    assert np.real(W[n, n]) == pytest.approx(p_a, rel=1e-6)
    assert np.all(np.real(np.diag(W))[:n] <= scale * (1 + 1e-6))
    assert _tr(qf.A, W) <= radius * (1 + 1e-6)


def test_config_validation():
    with pytest.raises(ValueError):
        PscaConfig(c=1.0)
    with pytest.raises(ValueError):
        PscaConfig(tau0=-1.0)
    with pytest.raises(ValueError):
        PscaConfig(tau0=2.0, tau_max=1.0)
    with pytest.raises(ValueError):
        PscaConfig(eta_tol=0.0)
    assert PscaConfig().schedule(2.0) == pytest.approx((2e-3, 2e3))
    assert PscaConfig(tau0=1.0, tau_max=10.0).schedule(5.0) == (1.0, 10.0)


def test_initial_point_feasible():
    for s in range(5):
        p, b, ch, qf = make_instance(2, 2, 600, s)
        W0, p0 = initial_feasible_point(qf, b, p.sigma_w2, p.p_max)
        assert p0 <= p.p_max
        assert _tr(qf.A, W0) <= p.sigma_w2 * kl_radius(b)
        lam = np.linalg.eigvalsh(W0)[-1]
        assert np.trace(W0).real - lam < 1e-12 * lam
        _check_constraints(qf, W0, p0, p.sigma_w2 * kl_radius(b), p.p_max)


def test_extract_rank_one_exact():
    rng = np.random.default_rng(8)
    v = rng.uniform(0.2, 1, 3) * np.exp(1j * rng.uniform(0, 6, 3))
    u = lift(v) * np.exp(0.4j)  # a global phase must not matter
    W = 2.5 * np.outer(u, u.conj())
    v_hat, res = extract_rank_one(W, 2.5)
    np.testing.assert_allclose(np.abs(v_hat), np.abs(v), atol=1e-10)
    np.testing.assert_allclose(v_hat, v, atol=1e-10)
    assert abs(res) < 1e-12
    v0, _ = extract_rank_one(W, 0.0)
    assert np.all(v0 == 0)


def test_extract_rank_one_residual_random_psd():
    rng = np.random.default_rng(9)
    for _ in range(10):
        G = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        W = G @ G.conj().T
        _, res = extract_rank_one(W, float(W[-1, -1].real))
        ev = np.linalg.eigvalsh(W)
        assert res == pytest.approx(np.sum(ev) - ev[-1], abs=1e-8 * ev[-1])


def test_subproblem_zero_radius_reaches_perfect_covertness():
    # N = 1, sum |a| >= |h_aw|: W = 0 is not the only Tr(AW) = 0 point
    qf = build_quadratic_forms([2.0 + 0.5j], [1.0 - 1j], 0.3j, 1.0)
    W0 = np.zeros((2, 2), complex)
    W0[1, 1] = 1e-3
    W, p_a, eta = solve_subproblem(qf, 0.0, W0, 0.0, 1.0, 1.0)
    assert _tr(qf.B, W) > 0.1
    assert _tr(qf.A, W) <= 1e-7 * np.trace(W).real


def test_relaxation_dominates_rank_one_points():
    for s in range(3):
        p, b, ch, qf = make_instance(2, 1, 601, s)
        W, p_a = solve_relaxed(qf, b, sigma_w2=p.sigma_w2, p_max=p.p_max)
        t = kl_radius(b)
        _check_constraints(qf, W, p_a, p.sigma_w2 * t, p.p_max)
        ub = _tr(qf.B, W)
        rng = np.random.default_rng(s)
        for _ in range(200):
            v = rng.uniform(0, 1, 2) * np.exp(1j * rng.uniform(0, 6.3, 2))
            u = lift(v)
            g = float(np.real(np.vdot(u, qf.A @ u)))
            pw = min(p.p_max, p.sigma_w2 * t / g)
            assert pw * float(np.real(np.vdot(u, qf.B @ u))) <= ub * (1 + 1e-6)


def test_subproblem_warm_start_monotone():
    p, b, ch, qf = make_instance(2, 2, 602, 0)
    W0, p0 = initial_feasible_point(qf, b, p.sigma_w2, p.p_max)
    _, e = np.linalg.eigh(W0)
    tau = 1e-3 * qf.lambda_max_B
    W, p_a, eta = solve_subproblem(qf, kl_radius(b), W0, tau, p.p_max, p.sigma_w2)
    new, _ = penalized_objective(qf, W, tau, e[:, -1])
    old, _ = penalized_objective(qf, W0, tau, e[:, -1])
    assert new >= old * (1 - 1e-6)


def test_psca_feasible_and_bounded():
    for s in range(6):
        p, b, ch, qf = make_instance(2, 2, 603, s)
        kw = solver_kw(p)
        r = psca_optimize(qf, b, **kw)
        assert r.status == "converged"
        assert r.eta_final >= 0 and r.rank_residual >= -1e-9
        d = r.design
        assert d.kl_value <= b.kl_cap * (1 + 1e-6)
        assert np.all(d.rho <= 1 + 1e-9) and d.p_a <= p.p_max
        ub = solve_relaxed_upper_bound(qf, b, **kw)
        two = ts.two_stage_optimize(qf, b, **kw)
        assert d.bob_snr <= ub * (1 + 1e-6)
        assert two.bob_snr <= ub * (1 + 1e-6)


def test_psca_endgame_objective_nondecreasing():
    p, b, ch, qf = make_instance(5, 1, 604, 0)
    r = psca_optimize(qf, b, PscaConfig(tau0=1e-3 * qf.lambda_max_B,
                                        tau_max=1e-3 * qf.lambda_max_B), **solver_kw(p))
    tr = r.objective_trace
    assert all(y >= x * (1 - 1e-6) for x, y in zip(tr, tr[1:]))


def test_psca_beats_two_stage_small():
    better = total = 0
    for s in range(20):
        p, b, ch, qf = make_instance(2, 1, 605, s)
        kw = solver_kw(p)
        r = psca_optimize(qf, b, **kw)
        if r.status != "converged":
            continue
        total += 1
        better += ts.two_stage_optimize(qf, b, **kw).bob_snr <= r.design.bob_snr * (1 + 1e-9) + 1e-9
    assert total >= 18 and better >= 0.9 * total


def test_psca_at_least_perfect_covertness():
    seen = 0
    for s in range(100):
        p, b, ch, qf = make_instance(5, 2, 510, s, epsilon=1e-3)
        if not ts.perfect_covertness_feasible(qf.a, ch.h_aw):
            continue
        seen += 1
        pc = ts.perfect_covertness_design(qf.a, ch.h_aw, p.p_max, b=qf.b, h_ab=ch.h_ab,
                                          sigma_b2=p.sigma_b2)
        r = psca_optimize(qf, b, **solver_kw(p))
        assert r.design.bob_snr >= 0.99 * pc.bob_snr
        if seen == 20:
            break
    assert seen == 20


def test_unit_amplitude_variant():
    p, b, ch, qf = make_instance(2, 2, 606, 1)
    r = psca_optimize(qf, b, PscaConfig(unit_amplitude=True), **solver_kw(p))
    np.testing.assert_allclose(r.design.rho, 1.0, atol=1e-9)
    assert r.design.kl_value <= b.kl_cap * (1 + 1e-6)


def test_no_path_to_bob():
    qf = build_quadratic_forms(np.array([1.0, 1j]), np.zeros(2), 0.0, 0.5)
    r = psca_optimize(qf, CovertnessBudget(0.1, 100), sigma_w2=1.0, p_max=1.0)
    assert r.status == "converged" and r.design.bob_snr == 0.0 and r.design.p_a == 0.0
