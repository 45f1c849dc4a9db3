"""Brute-force grid searches used to cross-check the optimizers on tiny instances."""

from __future__ import annotations

import itertools
import math

import numpy as np

from .covertness import CovertnessBudget, kl_radius
from .forms import QuadraticForms
from .no_csi import NoCsiInstance, power_unit_amplitude


def global_power_bracket(qf: QuadraticForms, budget: CovertnessBudget, sigma_w2: float,
                         p_max: float) -> tuple[float, float]:
    """Interval holding the optimal power of the global-CSI problem.

    Willie's gain lies between (|h_aw| - sum |a_n|)^2 and (|h_aw| + sum |a_n|)^2.
    At an optimum either p_a = p_max or the constraint is tight, which confines
    p_a to the covert powers of those two gains.
    """
    s = float(np.sum(np.abs(qf.a)))
    radius = sigma_w2 * kl_radius(budget)
    cap = lambda gain: p_max if gain == 0.0 else min(p_max, radius / gain)
    return cap((abs(qf.h_aw) + s) ** 2), cap(max(0.0, abs(qf.h_aw) - s) ** 2)


def grid_search_global(qf: QuadraticForms, budget: CovertnessBudget, *, sigma_w2: float,
                       p_max: float, sigma_b2: float = 1.0, points: int = 50,
                       chunk: int = 250_000) -> tuple[float, np.ndarray, float]:
    """Exhaustive search over (rho_1..rho_N, theta_1..theta_N, p_a) on a uniform grid.

    Amplitudes run over [0, 1], phases over [0, 2 pi) and powers over
    :func:`global_power_bracket`. For each reflect vector the best grid power is the
    largest one meeting the covertness constraint, since the SNR grows with
    p_a; this equals scanning the power axis. Returns (snr, v, p_a).
    """
    n = qf.n_elements
    t_star = kl_radius(budget)
    rho_axis = np.linspace(0.0, 1.0, points)
    theta_axis = np.linspace(0.0, 2 * np.pi, points, endpoint=False)
    p_axis = np.linspace(*global_power_bracket(qf, budget, sigma_w2, p_max), points)
    v_axis = (rho_axis[:, None] * np.exp(-1j * theta_axis)[None, :]).ravel()

    best = (-1.0, None, 0.0)
    combos = itertools.product(range(len(v_axis)), repeat=n)
    total = len(v_axis) ** n
    for start in range(0, total, chunk):
        idx = np.array(list(itertools.islice(combos, chunk)))
        if idx.size == 0:
            break
        V = v_axis[idx]
        bob = np.abs(np.conj(V) @ qf.b + qf.h_ab) ** 2
        willie = np.abs(np.conj(V) @ qf.a + qf.h_aw) ** 2
        with np.errstate(divide="ignore"):
            p_cap = np.where(willie > 0, sigma_w2 * t_star / willie, np.inf)
        k = np.searchsorted(p_axis, p_cap, side="right") - 1
        p = np.where(k >= 0, p_axis[np.clip(k, 0, None)], 0.0)
        snr = p * bob / sigma_b2
        j = int(np.argmax(snr))
        if snr[j] > best[0]:
            best = (float(snr[j]), V[j].copy(), float(p[j]))
    return best


def no_csi_power_bracket(inst: NoCsiInstance) -> tuple[float, float]:
    """Interval holding the optimal power of every amplitude regime.

    At an optimum either p_a = p_max or the averaged constraint is tight, so
    p_a lies between the full-amplitude power and the IRS-off power.
    """
    return power_unit_amplitude(inst), min(inst.p_max, inst.budget / inst.chi_aw)


def grid_search_common(inst: NoCsiInstance, points: int = 100) -> float:
    """Best co-phased SNR over a points x points grid of (rho0, p_a)."""
    rho = np.linspace(0.0, 1.0, points)[:, None]
    p = np.linspace(*no_csi_power_bracket(inst), points)[None, :]
    delta = inst.chi_rw * rho**2 * float(np.sum(inst.h_ar_sq)) + inst.chi_aw
    ok = p * delta <= inst.budget
    amp = rho * float(np.sum(np.abs(inst.b))) + abs(inst.h_ab)
    snr = np.where(ok, p * amp**2 / inst.sigma_b2, -1.0)
    return float(snr.max())


def grid_search_per_element(inst: NoCsiInstance, points: int = 60) -> float:
    """Best co-phased SNR over a grid of (rho_1, rho_2, p_a); N = 2 only."""
    if len(inst.b) != 2:
        raise ValueError("per-element grid oracle supports N = 2")
    r = np.linspace(0.0, 1.0, points)
    r1, r2, p = np.meshgrid(r, r, np.linspace(*no_csi_power_bracket(inst), points),
                            indexing="ij")
    h2 = inst.h_ar_sq
    delta = inst.chi_rw * (r1**2 * h2[0] + r2**2 * h2[1]) + inst.chi_aw
    bb = np.abs(inst.b)
    amp = r1 * bb[0] + r2 * bb[1] + abs(inst.h_ab)
    snr = np.where(p * delta <= inst.budget, p * amp**2 / inst.sigma_b2, -1.0)
    return float(snr.max())


def refine_ratio(coarse: float, exact: float) -> float:
    """Relative shortfall of a grid value below an optimizer's value (negative if above)."""
    return (exact - coarse) / exact if exact > 0 else 0.0 if coarse <= 0 else -math.inf
