"""Designs for when only Willie's large-scale statistics are known.

Willie's IRS link h_rw and direct link h_aw are Rayleigh with mean gains
chi_rw and chi_aw, so the averaged-KL constraint reads

    p_a * (chi_rw * sum_n rho_n^2 |h_ar,n|^2 + chi_aw) <= eps_bar * sigma_w2

which does not involve the phases. The phases therefore only serve Bob and
the remaining problem is over p_a and the amplitudes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .covertness import CovertnessBudget, epsilon_bar, expected_kl
from .numerics import RootBracket, bisect_root
from .scenario import ChannelSet, ReflectDesign, SystemParams, cascade_vectors

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class NoCsiInstance:
    h_ar: np.ndarray
    b: np.ndarray
    h_ab: complex
    chi_rw: float
    chi_aw: float
    eps_bar: float
    sigma_w2: float
    sigma_b2: float
    p_max: float

    def __post_init__(self):
        if not self.eps_bar > 0:
            raise ValueError("eps_bar must be positive")
        if not (self.chi_rw > 0 and self.chi_aw > 0):
            raise ValueError("mean channel gains must be positive")
        if len(self.h_ar) != len(self.b):
            raise ValueError("h_ar and b must have the same length")

    @classmethod
    def from_channels(cls, ch: ChannelSet, params: SystemParams,
                      eps_bar: float | None = None) -> "NoCsiInstance":
        _, b = cascade_vectors(ch)
        if eps_bar is None:
            eps_bar = epsilon_bar(CovertnessBudget.from_params(params))
        return cls(h_ar=np.asarray(ch.h_ar), b=b, h_ab=ch.h_ab, chi_rw=ch.chi["rw"],
                   chi_aw=ch.chi["aw"], eps_bar=eps_bar, sigma_w2=params.sigma_w2,
                   sigma_b2=params.sigma_b2, p_max=params.p_max)

    @property
    def budget(self) -> float:
        """Right-hand side eps_bar * sigma_w2 of the averaged constraint."""
        return self.eps_bar * self.sigma_w2

    @property
    def h_ar_sq(self) -> np.ndarray:
        return np.abs(self.h_ar) ** 2

    def mean_willie_gain(self, rho) -> float:
        """delta = chi_rw * sum rho_n^2 |h_ar,n|^2 + chi_aw."""
        rho = np.asarray(rho, dtype=float)
        return float(self.chi_rw * np.sum(rho**2 * self.h_ar_sq) + self.chi_aw)

    def snr(self, p_a: float, rho) -> float:
        """Bob SNR under co-phased reflection."""
        amp = float(np.dot(np.asarray(rho, dtype=float), np.abs(self.b))) + abs(self.h_ab)
        return p_a * amp**2 / self.sigma_b2


def optimal_phases(b, h_ab: complex) -> np.ndarray:
    """theta_n = arg(h_ab) - arg(b_n) in [0, 2 pi): every reflected term lines up with h_ab."""
    b = np.asarray(b, dtype=complex)
    return np.mod(np.angle(h_ab) - np.angle(b), 2 * np.pi)


def power_unit_amplitude(inst: NoCsiInstance) -> float:
    """Largest power meeting the averaged constraint with all amplitudes at 1."""
    delta = inst.chi_rw * float(np.sum(inst.h_ar_sq)) + inst.chi_aw
    return min(inst.budget / delta, inst.p_max)


def _common_objective(inst: NoCsiInstance, rho0: float, p_a: float) -> float:
    return math.sqrt(p_a) * (rho0 * float(np.sum(np.abs(inst.b))) + abs(inst.h_ab))


def common_amplitude_design(inst: NoCsiInstance) -> tuple[float, float, float]:
    """Best (rho0, p_a, snr) with one amplitude shared by all elements.

    Two regimes: full power with rho0 pushed to the constraint boundary, or
    the constraint tight with p_a a function of rho0. In the second regime the
    one-dimensional objective is checked at its stationary point and at the
    ends of the admissible rho0 interval.
    """
    b1 = float(np.sum(np.abs(inst.b)))
    g_ar = float(np.sum(inst.h_ar_sq))
    hab = abs(inst.h_ab)
    kr = inst.chi_rw * g_ar
    # rho0^2 threshold above which the constraint, not p_max, limits p_a
    r = (inst.budget / inst.p_max - inst.chi_aw) / kr if kr > 0 else math.inf

    candidates = []  # (objective, case, rho0, p_a); case 1 is the tight-constraint one
    if r >= 0:
        rho0 = min(1.0, math.sqrt(r))
        candidates.append((_common_objective(inst, rho0, inst.p_max), 0, rho0, inst.p_max))
    if r <= 1:
        lo = math.sqrt(max(r, 0.0))
        points = [lo, 1.0]
        if hab > 0 and kr > 0:
            rho_s = inst.chi_aw * b1 / (kr * hab)
            if lo <= rho_s <= 1.0:
                points.append(rho_s)
        for rho0 in points:
            p_a = min(inst.budget / (kr * rho0**2 + inst.chi_aw), inst.p_max)
            candidates.append((_common_objective(inst, rho0, p_a), 1, rho0, p_a))
    # larger objective wins; ties go to the tight-constraint case
    _, _, rho0, p_a = max(candidates, key=lambda c: (c[0], c[1]))
    return rho0, p_a, inst.snr(p_a, np.full(len(inst.b), rho0))


def inner_amplitudes(inst: NoCsiInstance, p_a: float) -> tuple[np.ndarray, float]:
    """Optimal scaled amplitudes rho_bar at fixed p_a, and the constraint multiplier mu.

    rho_bar_n = clamp(|b_n| / (2 mu chi_rw |h_ar,n|^2), 0, sqrt(p_a)); mu = 0 when
    full amplitudes already satisfy the constraint.
    """
    bbar = np.abs(inst.b)
    h2 = inst.h_ar_sq
    cap = math.sqrt(p_a)
    room = inst.budget - p_a * inst.chi_aw
    if room < 0:
        raise ValueError("p_a exceeds the power allowed by the direct link alone")

    def amplitudes(mu: float) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            raw = np.where(h2 > 0, bbar / (2.0 * mu * inst.chi_rw * h2), np.inf)
        return np.clip(np.where(bbar > 0, raw, 0.0), 0.0, cap)

    def used(rho_bar) -> float:
        return inst.chi_rw * float(np.sum(h2 * rho_bar**2))

    full = np.where(bbar > 0, cap, 0.0)
    if used(full) <= room:
        return full, 0.0
    if room == 0:
        return np.where(h2 > 0, 0.0, full), math.inf
    f = lambda log_mu: used(amplitudes(math.exp(log_mu))) - room
    hi = 0.0
    while f(hi) > 0:
        hi += 10.0
    lo = -10.0
    while f(lo) < 0:
        lo -= 10.0
    log_mu = bisect_root(f, RootBracket(lo, hi, tol=1e-300, max_iter=5000))
    mu = math.exp(log_mu)
    rho_bar = amplitudes(mu)
    # bisection lands just on either side of the boundary; scale the free
    # entries so the constraint is never exceeded
    excess = used(rho_bar) - room
    if excess > 0:
        rho_bar = rho_bar * math.sqrt(room / used(rho_bar))
    return rho_bar, mu


def _per_element_value(inst: NoCsiInstance, p_a: float) -> float:
    rho_bar, _ = inner_amplitudes(inst, p_a)
    return float(np.dot(rho_bar, np.abs(inst.b))) + math.sqrt(p_a) * abs(inst.h_ab)


def _golden_max(f, lo: float, hi: float, iters: int = 200) -> float:
    x1 = hi - _GOLDEN * (hi - lo)
    x2 = lo + _GOLDEN * (hi - lo)
    f1, f2 = f(x1), f(x2)
    for _ in range(iters):
        if hi - lo <= 1e-15 * max(hi, 1e-300):
            break
        if f1 < f2:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _GOLDEN * (hi - lo)
            f2 = f(x2)
        else:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _GOLDEN * (hi - lo)
            f1 = f(x1)
    return 0.5 * (lo + hi)


def per_element_design(inst: NoCsiInstance) -> tuple[np.ndarray, float, float]:
    """Best (rho, p_a, snr) with independent amplitudes.

    In scaled amplitudes rho_bar = sqrt(p_a) rho the problem is convex. The
    inner problem at fixed p_a has the clamp solution of
    :func:`inner_amplitudes`; the concave value function in p_a is maximized
    by a 64-point scan followed by golden-section refinement around the best
    scan point.
    """
    p_hi = min(inst.p_max, inst.budget / inst.chi_aw)
    value = lambda p: _per_element_value(inst, p)
    grid = np.linspace(0.0, p_hi, 64)
    vals = [value(p) for p in grid]
    k = int(np.argmax(vals))
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]
    p_best = _golden_max(value, lo, hi)
    for p in (lo, hi, grid[k]):
        if value(p) > value(p_best):
            p_best = p
    p_a = float(p_best)
    rho_bar, _ = inner_amplitudes(inst, p_a)
    rho = np.clip(rho_bar / math.sqrt(p_a), 0.0, 1.0) if p_a > 0 else np.zeros(len(inst.b))
    return rho, p_a, inst.snr(p_a, rho)


def no_irs_no_csi(inst: NoCsiInstance) -> ReflectDesign:
    """Direct link only under the averaged constraint."""
    p_a = min(inst.budget / inst.chi_aw, inst.p_max)
    empty = np.zeros(0)
    return ReflectDesign(p_a=p_a, rho=empty, theta=empty,
                         bob_snr=p_a * abs(inst.h_ab) ** 2 / inst.sigma_b2,
                         willie_gain=inst.chi_aw)


def _design(inst: NoCsiInstance, rho, p_a: float, theta, blocklength: int) -> ReflectDesign:
    """Attach metrics; willie_gain is Willie's mean gain delta, kl_value the averaged KL."""
    rho = np.asarray(rho, dtype=float)
    delta = inst.mean_willie_gain(rho)
    kl = expected_kl(p_a, delta, inst.sigma_w2, blocklength) if p_a > 0 else 0.0
    return ReflectDesign(p_a=p_a, rho=rho, theta=theta.copy(), bob_snr=inst.snr(p_a, rho),
                         willie_gain=delta, kl_value=kl)


def no_csi_suite(inst: NoCsiInstance, blocklength: int) -> dict[str, ReflectDesign]:
    """Unit, common and per-element amplitude designs with co-phased reflection."""
    theta = optimal_phases(inst.b, inst.h_ab)
    n = len(inst.b)
    p_unit = power_unit_amplitude(inst)
    rho0, p_common, _ = common_amplitude_design(inst)
    rho_pe, p_pe, _ = per_element_design(inst)
    return {
        "unit": _design(inst, np.ones(n), p_unit, theta, blocklength),
        "common": _design(inst, np.full(n, rho0), p_common, theta, blocklength),
        "per_element": _design(inst, rho_pe, p_pe, theta, blocklength),
    }
