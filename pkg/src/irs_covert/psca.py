"""Penalized successive convex approximation over the lifted SDP.

The covertness constraint depends on W only through Tr(A W), and the KL
divergence is increasing in it, so the constraint is the linear bound
Tr(A W) <= sigma_w2 * t* with t* from :func:`covertness.kl_radius`. Each
subproblem is therefore a linear SDP over one Hermitian PSD variable.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import cvxpy as cp
import numpy as np

from .covertness import CovertnessBudget, kl_divergence, kl_radius
from .forms import QuadraticForms, build_quadratic_forms, lift, unlift
from .numerics import max_eigpair
from .scenario import ReflectDesign, bob_snr, willie_gain
from .two_stage import bob_aligned_u, conservative_power

__all__ = [
    "QuadraticForms", "build_quadratic_forms", "PscaConfig", "PscaResult",
    "SubproblemFailure", "solve_subproblem", "initial_feasible_point",
    "psca_optimize", "extract_rank_one", "solve_relaxed", "solve_relaxed_upper_bound",
    "penalized_objective",
]

log = logging.getLogger(__name__)

# interior-point solvers tried in order; a later one is used only when the
# earlier ones fail outright
SOLVERS = (("CLARABEL", dict(max_iter=400)),
           ("CVXOPT", dict(abstol=1e-10, reltol=1e-10, feastol=1e-10, max_iters=200)))


class SubproblemFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class PscaConfig:
    """Penalty schedule.

    ``tau0 = None`` picks 1e-3 times the largest eigenvalue of B, and
    ``tau_max = None`` picks 1e6 * tau0. ``eta_tol`` is relative to Tr(W).
    """

    tau0: float | None = None
    c: float = 5.0
    tau_max: float | None = None
    eta_tol: float = 1e-8
    obj_tol: float = 1e-6
    max_outer: int = 50
    unit_amplitude: bool = False

    def __post_init__(self):
        if not self.c > 1:
            raise ValueError("penalty growth factor must exceed 1")
        if self.tau0 is not None and not self.tau0 > 0:
            raise ValueError("tau0 must be positive")
        if self.tau_max is not None and self.tau0 is not None and self.tau_max < self.tau0:
            raise ValueError("tau_max must not be below tau0")
        if min(self.eta_tol, self.obj_tol) <= 0 or self.max_outer < 1:
            raise ValueError("tolerances and limits must be positive")

    def schedule(self, lambda_max_B: float) -> tuple[float, float]:
        """(tau0, tau_max) resolved for a given B."""
        tau0 = self.tau0 if self.tau0 is not None else 1e-3 * lambda_max_B
        tau_max = self.tau_max if self.tau_max is not None else 1e6 * tau0
        return tau0, max(tau_max, tau0)


@dataclass
class PscaResult:
    design: ReflectDesign
    W_final: np.ndarray
    eta_final: float
    rank_residual: float
    iterations: int
    objective_trace: list = field(default_factory=list)
    status: str = "converged"
    p_a_sdp: float = 0.0


class _LiftedSDP:
    """Parametrized cvxpy model of one penalized subproblem.

    Variables are normalized: W' = W / w_scale, B' = B / lambda_max(B),
    A' = A / lambda_max(A). The structure is compiled once and re-solved with
    new parameter values at every outer iteration. The Hermitian variable is
    passed to cvxpy as is; its complex-to-real reduction keeps the constraint
    set free of the redundant symmetry equalities that a hand-built real
    embedding introduces, which the interior-point solvers handle poorly.
    """

    def __init__(self, qf: QuadraticForms, radius: float, p_max: float,
                 rank_cut: bool = True, unit_amplitude: bool = False):
        n = qf.n_elements + 1
        self.n = n
        self.qf = qf
        self.radius = radius
        self.p_max = p_max
        self.b_scale = qf.lambda_max_B if qf.lambda_max_B > 0 else 1.0
        self.a_scale = qf.lambda_max_A if qf.lambda_max_A > 0 else 1.0

        W = cp.Variable((n, n), hermitian=True)
        P = cp.Variable(nonneg=True)
        eta = cp.Variable(nonneg=True)
        self.W, self.P, self.eta = W, P, eta

        self.p_cap = cp.Parameter(nonneg=True)
        self.a_cap = cp.Parameter(nonneg=True)
        self.tau = cp.Parameter(nonneg=True)
        self.cut = cp.Parameter((n, n), hermitian=True)

        tr_B = cp.real(cp.trace((qf.B / self.b_scale) @ W))
        tr_A = cp.real(cp.trace((qf.A / self.a_scale) @ W))
        diag = cp.real(cp.diag(W))
        cons = [W >> 0, P <= self.p_cap, diag[n - 1] == P]
        if unit_amplitude:
            cons.append(diag[: n - 1] == P)
        else:
            cons.append(diag[: n - 1] <= P)
        if qf.lambda_max_A > 0:
            cons.append(tr_A <= self.a_cap)
        if rank_cut:
            cons.append(cp.sum(diag) - cp.real(cp.trace(self.cut @ W)) <= eta)
            objective = tr_B - self.tau * eta
        else:
            objective = tr_B
        self.problem = cp.Problem(cp.Maximize(objective), cons)

    def solve(self, w_scale: float, tau: float = 0.0, w_dir=None):
        """Solve with W normalized by ``w_scale``; returns (W, p_a, eta) in physical units."""
        self.p_cap.value = self.p_max / w_scale
        self.a_cap.value = self.radius / (self.a_scale * w_scale)
        self.tau.value = tau / self.b_scale
        if w_dir is None:
            w_dir = np.zeros(self.n, dtype=complex)
        self.cut.value = np.outer(w_dir, np.conj(w_dir))
        self._run_solvers()
        W = _psd_part(self.W.value * w_scale)
        p_a = float(self.P.value) * w_scale
        eta = max(float(self.eta.value), 0.0) * w_scale if self.eta.value is not None else 0.0
        return W, p_a, eta

    def _run_solvers(self):
        errors = []
        for name, opts in SOLVERS:
            try:
                self.problem.solve(solver=name, **opts)
            except cp.error.SolverError as exc:
                errors.append(f"{name}: {exc}")
                continue
            if self.problem.status in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
                return
            errors.append(f"{name}: status {self.problem.status}")
        raise SubproblemFailure("; ".join(errors))


def _psd_part(W) -> np.ndarray:
    """Nearest PSD matrix; interior-point output can carry tiny negative eigenvalues."""
    W = 0.5 * (W + W.conj().T)
    lam, E = np.linalg.eigh(W)
    if lam[0] >= 0:
        return W
    return (E * np.clip(lam, 0.0, None)) @ E.conj().T


def _tr(M, W) -> float:
    return float(np.real(np.sum(M * W.T)))


def penalized_objective(qf: QuadraticForms, W, tau: float, w_dir) -> tuple[float, float]:
    """(Tr(BW) - tau * eta, eta) with eta the smallest slack admitted by the rank cut."""
    cut = float(np.trace(W).real - np.real(np.vdot(w_dir, W @ w_dir)))
    eta = max(cut, 0.0)
    return _tr(qf.B, W) - tau * eta, eta


def solve_subproblem(qf: QuadraticForms, t_star: float, W_tilde, tau: float, p_max: float,
                     sigma_w2: float, unit_amplitude: bool = False):
    """One penalized subproblem: returns (W, p_a, eta).

    The rank cut uses the dominant eigenvector of ``W_tilde``.
    """
    sdp = _LiftedSDP(qf, sigma_w2 * t_star, p_max, rank_cut=True, unit_amplitude=unit_amplitude)
    lam, e = max_eigpair(W_tilde)
    w_scale = max(float(np.real(W_tilde[-1, -1])), 1e-9 * p_max)
    return sdp.solve(w_scale, tau, e)


def initial_feasible_point(qf: QuadraticForms, budget: CovertnessBudget, sigma_w2: float,
                           p_max: float):
    """Bob-aligned unit-modulus u at the conservative covert power; W0 = p_a0 u u^H."""
    u = bob_aligned_u(qf)
    p_a0 = conservative_power(u, qf.A, budget, sigma_w2, p_max)
    return p_a0 * np.outer(u, u.conj()), p_a0


def extract_rank_one(W, p_a: float):
    """Leading-eigenvector reflect vector of W, and the rank residual Tr(W) - lambda_max."""
    W = np.asarray(W, dtype=complex)
    lam, e = max_eigpair(W)
    residual = float(np.trace(W).real) - lam
    if p_a <= 0:
        return np.zeros(W.shape[0] - 1, dtype=complex), residual
    u = math.sqrt(max(lam, 0.0)) * e / math.sqrt(p_a)
    return unlift(u), residual


def _refit_power(v, qf: QuadraticForms, t_star: float, sigma_w2: float, p_max: float) -> float:
    gain = willie_gain(v, qf.a, qf.h_aw)
    return p_max if gain == 0 else min(sigma_w2 * t_star / gain, p_max)


def psca_optimize(qf: QuadraticForms, budget: CovertnessBudget, config: PscaConfig = PscaConfig(),
                  *, sigma_w2: float, p_max: float, sigma_b2: float = 1.0) -> PscaResult:
    n = qf.n_elements
    t_star = kl_radius(budget)
    if qf.lambda_max_B == 0.0:
        zero = ReflectDesign(p_a=0.0, rho=np.zeros(n), theta=np.zeros(n))
        return PscaResult(zero, np.zeros((n + 1, n + 1), complex), 0.0, 0.0, 0, [], "converged")

    sdp = _LiftedSDP(qf, sigma_w2 * t_star, p_max, rank_cut=True,
                     unit_amplitude=config.unit_amplitude)
    W_t, p_t = initial_feasible_point(qf, budget, sigma_w2, p_max)
    tau, tau_max = config.schedule(qf.lambda_max_B)
    trace: list[float] = []
    status = "max_iter"
    W, p_a, eta = W_t, p_t, 0.0
    it = 0
    for it in range(1, config.max_outer + 1):
        _, e = max_eigpair(W_t)
        w_scale = max(p_t, 1e-9 * p_max)
        try:
            W, p_a, eta = sdp.solve(w_scale, tau, e)
        except SubproblemFailure:
            if it == 1:
                raise
            # a large penalty makes the subproblem degenerate once the iterate
            # is already rank one; that iterate is the answer
            W, p_a = W_t, p_t
            if eta <= config.eta_tol * max(float(np.trace(W).real), 1e-300):
                status = "converged"
            else:
                log.warning("PSCA subproblem failed at iteration %d; keeping last iterate", it)
                status = "subproblem_failure"
            break
        obj = _tr(qf.B, W)
        prev = trace[-1] if trace else None
        trace.append(obj)
        W_t, p_t = W, p_a
        small_eta = eta <= config.eta_tol * max(float(np.trace(W).real), 1e-300)
        if prev is not None and abs(obj - prev) <= config.obj_tol * abs(obj) and small_eta:
            status = "converged"
            break
        tau = min(config.c * tau, tau_max)

    v, residual = extract_rank_one(W, p_a)
    if config.unit_amplitude:
        mag = np.abs(v)
        v = np.where(mag > 0, v / np.where(mag > 0, mag, 1.0), 1.0)
    v = v / max(1.0, float(np.max(np.abs(v), initial=0.0)))
    p_fit = _refit_power(v, qf, t_star, sigma_w2, p_max)
    rho, theta = ReflectDesign.polar(v)
    gain = willie_gain(v, qf.a, qf.h_aw)
    design = ReflectDesign(
        p_a=p_fit, rho=rho, theta=theta,
        bob_snr=bob_snr(p_fit, v, qf.b, qf.h_ab, sigma_b2),
        willie_gain=gain,
        kl_value=kl_divergence(p_fit, gain, sigma_w2, budget.blocklength),
    )
    return PscaResult(design, W, eta, residual, it, trace, status, p_a)


def solve_relaxed(qf: QuadraticForms, budget: CovertnessBudget, *, sigma_w2: float,
                  p_max: float):
    """Maximizer (W, p_a) of the SDP with the rank-one requirement dropped."""
    n = qf.n_elements + 1
    if qf.lambda_max_B == 0.0:
        return np.zeros((n, n), dtype=complex), 0.0
    t_star = kl_radius(budget)
    sdp = _LiftedSDP(qf, sigma_w2 * t_star, p_max, rank_cut=False)
    _, p0 = initial_feasible_point(qf, budget, sigma_w2, p_max)
    W, p_a, _ = sdp.solve(max(p0, 1e-9 * p_max))
    return W, p_a


def solve_relaxed_upper_bound(qf: QuadraticForms, budget: CovertnessBudget, *, sigma_w2: float,
                              p_max: float, sigma_b2: float = 1.0) -> float:
    """Bob SNR bound from the SDP with the rank-one requirement dropped."""
    W, _ = solve_relaxed(qf, budget, sigma_w2=sigma_w2, p_max=p_max)
    return _tr(qf.B, W) / sigma_b2
