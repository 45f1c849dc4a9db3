"""Lifted quadratic forms for the Bob and Willie received powers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class QuadraticForms:
    """Rank-one Hermitian forms with u = [v; t] so that u^H B u = |v^H b + h_ab t*|^2."""

    A: np.ndarray
    B: np.ndarray
    a: np.ndarray
    b: np.ndarray
    h_ab: complex
    h_aw: complex

    @property
    def n_elements(self) -> int:
        return len(self.a)

    @property
    def a_bar(self) -> np.ndarray:
        return np.append(self.a, self.h_aw)

    @property
    def b_bar(self) -> np.ndarray:
        return np.append(self.b, self.h_ab)

    @property
    def lambda_max_A(self) -> float:
        return float(np.vdot(self.a_bar, self.a_bar).real)

    @property
    def lambda_max_B(self) -> float:
        return float(np.vdot(self.b_bar, self.b_bar).real)


def build_quadratic_forms(a, b, h_ab: complex, h_aw: complex) -> QuadraticForms:
    a = np.asarray(a, dtype=complex).ravel()
    b = np.asarray(b, dtype=complex).ravel()
    if a.shape != b.shape:
        raise ValueError(f"cascade vectors differ in length: {a.size} vs {b.size}")
    a_bar = np.append(a, h_aw)
    b_bar = np.append(b, h_ab)
    A = np.outer(a_bar, a_bar.conj())
    B = np.outer(b_bar, b_bar.conj())
    return QuadraticForms(A=A, B=B, a=a, b=b, h_ab=complex(h_ab), h_aw=complex(h_aw))


def quad(u, M) -> float:
    u = np.asarray(u, dtype=complex)
    return float(np.vdot(u, M @ u).real)


def lift(v) -> np.ndarray:
    return np.append(np.asarray(v, dtype=complex), 1.0 + 0j)


def unlift(u) -> np.ndarray:
    """Recover v from u = [v; t], dividing by the phase of t only."""
    u = np.asarray(u, dtype=complex)
    t = u[-1]
    phase = t / abs(t) if abs(t) > 0 else 1.0
    return u[:-1] / phase
