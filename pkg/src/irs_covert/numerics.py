"""Scalar special functions, bracketing root finder and Hermitian eigen-utilities."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

EULER_GAMMA = 0.57721566490153286061
_TERM_CUTOFF = 1e-14
_FPMIN = 1e-300


class BracketError(ValueError):
    """Raised when a root bracket shows no sign change."""


class ConvergenceError(RuntimeError):
    """Raised when an iterative method exhausts its iteration budget."""


class NotHermitianError(ValueError):
    pass


@dataclass(frozen=True)
class RootBracket:
    lo: float
    hi: float
    tol: float = 1e-12
    max_iter: int = 200

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"bracket needs lo < hi, got [{self.lo}, {self.hi}]")
        if not self.tol > 0:
            raise ValueError("bracket tolerance must be positive")


def _e1_series(x: float) -> float:
    # E1(x) = -gamma - ln x - sum_{k>=1} (-x)^k / (k k!)
    total = 0.0
    term = 1.0
    k = 0
    while True:
        k += 1
        term *= -x / k
        contrib = term / k
        total += contrib
        if abs(contrib) < _TERM_CUTOFF * max(abs(total), 1e-300):
            break
        if k > 500:
            break
    return -EULER_GAMMA - math.log(x) - total


def _e1_scaled_contfrac(x: float) -> float:
    """Modified Lentz evaluation of exp(x) * E1(x); intended for x > 1."""
    b = x + 1.0
    c = 1.0 / _FPMIN
    d = 1.0 / b
    h = d
    for i in range(1, 10_000):
        an = -float(i * i)
        b += 2.0
        d = an * d + b
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = b + an / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = c * d
        h *= delta
        if abs(delta - 1.0) < _TERM_CUTOFF:
            return h
    raise ConvergenceError(f"E1 continued fraction did not converge at x={x}")


def exp_integral_e1(x: float) -> float:
    """Exponential integral E1(x) = int_x^inf exp(-t)/t dt for x > 0."""
    x = float(x)
    if not x > 0:
        raise ValueError(f"E1 is defined for x > 0, got {x}")
    if x <= 1.0:
        return _e1_series(x)
    return _e1_scaled_contfrac(x) * math.exp(-x)


def scaled_e1(x: float) -> float:
    """Return exp(x) * E1(x) without forming exp(x) for large arguments."""
    x = float(x)
    if not x > 0:
        raise ValueError(f"scaled E1 is defined for x > 0, got {x}")
    if x <= 1.0:
        return math.exp(x) * _e1_series(x)
    return _e1_scaled_contfrac(x)


def bisect_root(f: Callable[[float], float], bracket: RootBracket) -> float:
    """Bisection on a sign-changing bracket.

    Stops when the residual magnitude or the bracket width drops below
    ``bracket.tol``, or when the midpoint can no longer be split in floating
    point. An endpoint that is itself an exact root is returned directly.
    """
    lo, hi = bracket.lo, bracket.hi
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if math.isnan(flo) or math.isnan(fhi) or (flo > 0) == (fhi > 0):
        raise BracketError(f"no sign change on [{lo}, {hi}]: f(lo)={flo}, f(hi)={fhi}")
    for _ in range(bracket.max_iter):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            return mid
        fmid = f(mid)
        if fmid == 0.0 or abs(fmid) < bracket.tol or (hi - lo) < bracket.tol:
            return mid
        if (fmid > 0) == (flo > 0):
            lo, flo = mid, fmid
        else:
            hi, fhi = mid, fmid
    raise ConvergenceError(f"bisection did not converge in {bracket.max_iter} iterations")


def check_hermitian(H, rtol: float = 1e-10) -> np.ndarray:
    """Return ``H`` as a complex array after checking conjugate symmetry.

    The symmetry tolerance is relative to the largest entry magnitude, since
    channel-derived matrices in this package routinely carry entries near 1e-15.
    """
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise NotHermitianError(f"expected a square matrix, got shape {H.shape}")
    scale = max(float(np.max(np.abs(H), initial=0.0)), np.finfo(float).tiny)
    if np.max(np.abs(H - H.conj().T), initial=0.0) > rtol * scale:
        raise NotHermitianError("matrix is not Hermitian")
    return H


def _start_vector(n: int) -> np.ndarray:
    # all-ones with a fixed small quasi-random twist so that the start is never
    # exactly orthogonal to the dominant eigenvector in structured cases
    k = np.arange(n)
    golden = 0.6180339887498949
    x = np.ones(n, dtype=complex) + 1e-3 * np.exp(2j * np.pi * ((k * golden) % 1.0)) * (1 + k % 3)
    return x / np.linalg.norm(x)


def max_eigpair(H, max_iter: int = 10_000, rtol: float = 1e-12) -> tuple[float, np.ndarray]:
    """Largest (algebraic) eigenvalue and a unit eigenvector of a Hermitian matrix.

    Shifted power iteration: a Gershgorin lower bound turns ``H`` positive
    semidefinite so the dominant eigenvalue is the algebraically largest one.
    Iteration stops once the eigen-residual is below ``1e-10 * (1 + |lambda|)``.
    If the cap is hit first (tiny spectral gap), a few Rayleigh-quotient
    iterations finish the job from the power-iteration estimate.
    """
    H = check_hermitian(H)
    n = H.shape[0]
    if n == 1:
        return float(H[0, 0].real), np.ones(1, dtype=complex)
    scale = float(np.max(np.abs(H)))
    if scale == 0.0:
        return 0.0, _start_vector(n)

    Hn = H / scale
    radii = np.sum(np.abs(Hn), axis=1) - np.abs(np.diag(Hn))
    shift = min(0.0, float(np.min(np.diag(Hn).real - radii)))
    Hs = Hn - shift * np.eye(n)

    x = _start_vector(n)
    lam = float(np.real(np.vdot(x, Hn @ x)))
    resid_tol = 1e-10 * (1.0 + abs(lam))
    for _ in range(max_iter):
        y = Hs @ x
        ny = np.linalg.norm(y)
        if ny == 0.0:
            break
        x = y / ny
        hx = Hn @ x
        lam_new = float(np.real(np.vdot(x, hx)))
        resid = np.linalg.norm(hx - lam_new * x)
        resid_tol = 1e-10 * (1.0 + abs(lam_new))
        change = abs(lam_new - lam) / max(abs(lam_new), 1e-300)
        lam = lam_new
        if resid <= resid_tol or (change < rtol and resid <= 10 * resid_tol):
            return lam * scale, x
    # Rayleigh-quotient polish
    for _ in range(20):
        try:
            y = np.linalg.solve(Hn - lam * np.eye(n), x)
        except np.linalg.LinAlgError:
            break
        ny = np.linalg.norm(y)
        if not np.isfinite(ny) or ny == 0.0:
            break
        x = y / ny
        hx = Hn @ x
        lam = float(np.real(np.vdot(x, hx)))
        if np.linalg.norm(hx - lam * x) <= 1e-12 * (1.0 + abs(lam)):
            break
    if np.linalg.norm(Hn @ x - lam * x) > 1e-9 * (1.0 + abs(lam)):
        raise ConvergenceError("max_eigpair failed to reach the eigen-residual tolerance")
    return lam * scale, x


def hermitian_real_embedding(H) -> np.ndarray:
    """Real symmetric embedding [[Re H, -Im H], [Im H, Re H]] of a Hermitian matrix."""
    H = check_hermitian(H)
    re, im = H.real, H.imag
    return np.block([[re, -im], [im, re]])
