"""Low-complexity global-CSI design and the perfect-covertness construction."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .covertness import CovertnessBudget, conservative_kl_radius, kl_divergence, kl_radius
from .forms import QuadraticForms, lift, quad, unlift
from .scenario import ReflectDesign, bob_snr, willie_gain


_ROUNDOFF = 64 * np.finfo(float).eps


class InfeasibleError(ValueError):
    pass


class DegenerateDenominatorError(ZeroDivisionError):
    pass


@dataclass(frozen=True)
class TwoStageConfig:
    max_iter: int = 500
    u_tol: float = 1e-6

    def __post_init__(self):
        if self.max_iter < 1 or not self.u_tol > 0:
            raise ValueError("max_iter and u_tol must be positive")


def perfect_covertness_feasible(a, h_aw: complex) -> bool:
    """True iff the reflected path can cancel the direct path at Willie."""
    return float(np.sum(np.abs(a))) >= abs(h_aw)


def perfect_covertness_design(a, h_aw: complex, p_max: float, *, b=None, h_ab=0j,
                              sigma_b2: float = 1.0) -> ReflectDesign:
    """Full-power design whose reflected path exactly cancels the direct path at Willie.

    Every element is phased to oppose ``h_aw`` and all amplitudes are scaled by
    ``|h_aw| / sum |a_n|``. If ``b`` is given the achieved Bob SNR is filled in.
    """
    a = np.asarray(a, dtype=complex)
    if not perfect_covertness_feasible(a, h_aw):
        raise InfeasibleError("sum |a_n| < |h_aw|: perfect covertness is unreachable")
    if h_aw == 0:
        v = np.zeros_like(a)
    else:
        kappa = float(np.sum(np.abs(a))) / abs(h_aw)
        v = np.exp(1j * (np.angle(a) - np.pi - np.angle(h_aw))) / kappa
    rho, theta = ReflectDesign.polar(v)
    snr = bob_snr(p_max, v, b, h_ab, sigma_b2) if b is not None else 0.0
    return ReflectDesign(p_a=p_max, rho=rho, theta=theta, bob_snr=snr,
                         willie_gain=willie_gain(v, a, h_aw), kl_value=0.0)


def bob_aligned_u(qf: QuadraticForms) -> np.ndarray:
    """Unit-modulus u whose reflected Bob path adds coherently with h_ab."""
    v = np.exp(1j * (np.angle(qf.b) - np.angle(qf.h_ab)))
    return lift(v)


def sca_direction(u_tilde, qf: QuadraticForms) -> np.ndarray:
    """Linear-minorant direction f of the Bob/Willie energy ratio at ``u_tilde``."""
    u = np.asarray(u_tilde, dtype=complex)
    a_bar, b_bar = qf.a_bar, qf.b_bar
    ua, ub = np.vdot(a_bar, u), np.vdot(b_bar, u)
    alpha, beta = abs(ua) ** 2, abs(ub) ** 2
    # a_bar^H u is only known to about eps * sum |a_bar_n u_n|; below that it is zero
    if abs(ua) <= _ROUNDOFF * float(np.sum(np.abs(a_bar) * np.abs(u))) or alpha <= 1e-300:
        raise DegenerateDenominatorError("u^H A u vanishes at the expansion point")
    lam = qf.lambda_max_A
    # A u and B u through the rank-one factors
    return b_bar * ub / alpha - (a_bar * ua - lam * u) * beta / alpha**2


def minorant_offset(u_tilde, qf: QuadraticForms) -> float:
    """Constant of the minorant for unit-modulus u (diagnostics only)."""
    u = np.asarray(u_tilde, dtype=complex)
    alpha, beta = willie_energy(u, qf), bob_energy(u, qf)
    return beta / alpha - 2 * qf.lambda_max_A * len(u) * beta / alpha**2


def willie_energy(u, qf: QuadraticForms) -> float:
    """u^H A u evaluated as |a_bar^H u|^2, exact and non-negative."""
    return abs(np.vdot(qf.a_bar, u)) ** 2


def bob_energy(u, qf: QuadraticForms) -> float:
    return abs(np.vdot(qf.b_bar, u)) ** 2


def energy_ratio(u, qf: QuadraticForms) -> float:
    alpha = willie_energy(u, qf)
    return math.inf if alpha == 0 else bob_energy(u, qf) / alpha


def two_stage_phases(qf: QuadraticForms, config: TwoStageConfig = TwoStageConfig(),
                     clamp_energy: float = 0.0):
    """Stage 1: iterate u <- exp(j arg f) from a Bob-aligned start.

    Iteration stops on a small relative change of the true ratio, when
    u^H A u is zero to working precision, or once it falls to ``clamp_energy`` (below it the stage-2
    power is pinned at its cap, so a larger ratio no longer helps Bob).
    Returns the final unit-modulus ``u`` and the sequence of true ratios.
    """
    u = bob_aligned_u(qf)
    if qf.lambda_max_A == 0.0:
        return u, [math.inf]
    trace = [energy_ratio(u, qf)]
    for _ in range(config.max_iter):
        if willie_energy(u, qf) <= clamp_energy:
            break
        try:
            f = sca_direction(u, qf)
        except DegenerateDenominatorError:
            # Willie's energy is zero to working precision: u already attains
            # the supremum of the ratio and any perturbation can only lower it
            break
        u_new = np.exp(1j * np.angle(f))
        r_new = energy_ratio(u_new, qf)
        u = u_new
        prev = trace[-1]
        trace.append(r_new)
        if math.isinf(r_new):
            break
        if abs(r_new - prev) <= config.u_tol * abs(r_new):
            break
    return u, trace


def conservative_power(u, A, budget: CovertnessBudget, sigma_w2: float, p_max: float) -> float:
    """Power meeting the ln(1+x) <= x tightened covertness constraint with equality."""
    q = quad(u, A)
    if q < -1e-12 * float(np.trace(A).real) * np.vdot(u, u).real:
        raise ValueError("u^H A u must be non-negative")
    if q <= 0.0:
        return p_max
    return min(sigma_w2 * conservative_kl_radius(budget) / q, p_max)


def design_from_v(v, p_a: float, qf: QuadraticForms, budget: CovertnessBudget,
                  sigma_w2: float, sigma_b2: float) -> ReflectDesign:
    v = np.asarray(v, dtype=complex)
    rho, theta = ReflectDesign.polar(v)
    gain = willie_gain(v, qf.a, qf.h_aw)
    return ReflectDesign(
        p_a=p_a, rho=rho, theta=theta,
        bob_snr=bob_snr(p_a, v, qf.b, qf.h_ab, sigma_b2),
        willie_gain=gain,
        kl_value=kl_divergence(p_a, gain, sigma_w2, budget.blocklength),
    )


def two_stage_optimize(qf: QuadraticForms, budget: CovertnessBudget,
                       config: TwoStageConfig = TwoStageConfig(), *, sigma_w2: float,
                       p_max: float, sigma_b2: float = 1.0) -> ReflectDesign:
    clamp = sigma_w2 * conservative_kl_radius(budget) / p_max
    u, _ = two_stage_phases(qf, config, clamp_energy=clamp)
    p_a = conservative_power(u, qf.A, budget, sigma_w2, p_max)
    v = unlift(u)
    v = v / np.abs(v)
    return design_from_v(v, p_a, qf, budget, sigma_w2, sigma_b2)


def baseline_no_irs(h_ab: complex, h_aw: complex, budget: CovertnessBudget,
                    sigma_w2: float, sigma_b2: float, p_max: float) -> ReflectDesign:
    """Direct link only: the largest power meeting the exact covertness constraint."""
    gain = abs(h_aw) ** 2
    p_a = p_max if gain == 0 else min(sigma_w2 * kl_radius(budget) / gain, p_max)
    empty = np.zeros(0)
    return ReflectDesign(
        p_a=p_a, rho=empty, theta=empty,
        bob_snr=p_a * abs(h_ab) ** 2 / sigma_b2,
        willie_gain=gain,
        kl_value=kl_divergence(p_a, gain, sigma_w2, budget.blocklength),
    )
