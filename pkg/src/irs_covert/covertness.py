"""Detection-theoretic quantities: KL divergence, error bounds and covertness radii.

KL values are in nats throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .numerics import BracketError, RootBracket, bisect_root, scaled_e1

# beyond this argument g(u) - 1 is summed from its asymptotic series,
# avoiding the cancellation in (1 + u) e^u E1(u) - 1
_ASYMPTOTIC_U = 200.0


@dataclass(frozen=True)
class CovertnessBudget:
    epsilon: float
    blocklength: int

    def __post_init__(self):
        if not 0 <= self.epsilon <= 1:
            raise ValueError("epsilon must lie in [0, 1]")
        if self.blocklength < 1:
            raise ValueError("blocklength must be >= 1")

    @property
    def kl_cap(self) -> float:
        return 2.0 * self.epsilon**2

    @property
    def per_use_cap(self) -> float:
        return self.kl_cap / self.blocklength

    @classmethod
    def from_params(cls, params) -> "CovertnessBudget":
        return cls(params.epsilon, params.blocklength)


def kl_per_use(x: float) -> float:
    """ln(1 + x) - x / (1 + x), accurate down to tiny received SNR x."""
    if x < 0:
        raise ValueError(f"received SNR must be non-negative, got {x}")
    if x < 1e-3:
        # sum_{k>=2} (-1)^k (k-1)/k x^k
        total, xk = 0.0, x
        for k in range(2, 10):
            xk *= x
            total += (-1) ** k * (k - 1) / k * xk
        return total
    return math.log1p(x) - x / (1.0 + x)


def kl_divergence(p_a: float, gain: float, sigma_w2: float, blocklength: int) -> float:
    """L-use KL divergence between Willie's no-transmission and transmission hypotheses."""
    if p_a < 0 or gain < 0:
        raise ValueError("transmit power and channel gain must be non-negative")
    return blocklength * kl_per_use(p_a * gain / sigma_w2)


def detection_error_lower_bound(kl: float) -> float:
    if kl < 0:
        raise ValueError("KL divergence must be non-negative")
    return max(0.0, 1.0 - math.sqrt(kl / 2.0))


def lemma_residual(t: float, per_use_cap: float) -> float:
    """(1+t) ln(1+t) - (1+c) t - c, the rearranged convex form of the constraint."""
    return (1.0 + t) * math.log1p(t) - (1.0 + per_use_cap) * t - per_use_cap


def kl_radius(budget: CovertnessBudget) -> float:
    """Largest received SNR at Willie that keeps the KL divergence within 2 eps^2.

    The KL divergence is increasing in the received SNR, so the covertness
    constraint is exactly ``p_a * gain / sigma_w2 <= t*``.
    """
    c = budget.per_use_cap
    if c == 0.0:
        return 0.0
    f = lambda t: kl_per_use(t) - c
    hi = 1.0
    while f(hi) < 0:
        hi *= 2.0
        if hi > 1e300:
            raise BracketError("could not bracket the covertness radius")
    return bisect_root(f, RootBracket(0.0, hi, tol=1e-300, max_iter=5000))


def conservative_kl_radius(budget: CovertnessBudget) -> float:
    """Root of x - x/(1+x) = 2 eps^2 / L, obtained by bounding ln(1+x) by x."""
    e2 = budget.epsilon**2
    L = budget.blocklength
    return (e2 + math.sqrt(e2 * e2 + 2.0 * e2 * L)) / L


def g_minus_one(u: float) -> float:
    """(1 + u) e^u E1(u) - 1 for u > 0; decreasing from +inf to 0."""
    if not u > 0:
        raise ValueError("argument must be positive")
    if u < _ASYMPTOTIC_U:
        return (1.0 + u) * scaled_e1(u) - 1.0
    # sum_{k>=2} (-1)^k (k-1)! (k-1) / u^k, truncated well before divergence
    total = 0.0
    fact = 1.0  # (k-1)!
    for k in range(2, 60):
        fact *= k - 1
        term = (-1) ** k * fact * (k - 1) / u**k
        total += term
        if abs(term) < 1e-17 * abs(total):
            break
    return total


def expected_kl(p_a: float, delta: float, sigma_w2: float, blocklength: int) -> float:
    """KL divergence averaged over a Rayleigh-distributed Willie channel.

    ``delta`` is the mean received channel power gain at Willie, so the
    received power X is exponential with mean ``delta * p_a``.
    """
    x_hat = delta * p_a / sigma_w2
    if not x_hat > 0:
        raise ValueError("mean received SNR must be positive")
    return blocklength * g_minus_one(1.0 / x_hat)


def epsilon_bar(budget: CovertnessBudget) -> float:
    """Mean-SNR threshold turning the expected-KL constraint into delta p_a / sigma_w2 <= eps_bar."""
    c = budget.per_use_cap
    if c <= 0:
        raise ValueError("epsilon must be positive for a non-trivial threshold")
    f = lambda log_u: g_minus_one(math.exp(log_u)) - c
    lo, hi = math.log(1e-6), math.log(1e6)
    while f(lo) < 0:
        lo -= 5.0
    while f(hi) > 0:
        hi += 5.0
        if hi > 700:
            raise BracketError("could not bracket eps_bar")
    log_u = bisect_root(f, RootBracket(lo, hi, tol=1e-300, max_iter=5000))
    return math.exp(-log_u)


def epsilon_bar_residual(eps_bar: float, budget: CovertnessBudget) -> float:
    return g_minus_one(1.0 / eps_bar) - budget.per_use_cap
