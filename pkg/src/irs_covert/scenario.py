"""Node geometry, path loss, random channel draws and received-signal functionals."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence, Union

import numpy as np

SeedLike = Union[int, Sequence[int]]

LINKS = ("ar", "ab", "aw", "rb", "rw")


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def linear_to_db(x):
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(np.asarray(x, dtype=float))


def dbm_to_watts(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


def watts_to_dbm(w):
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(np.asarray(w, dtype=float)) + 30.0


@dataclass(frozen=True)
class SystemParams:
    """System constants, all in linear units (watts, linear gains)."""

    p_max: float
    blocklength: int
    sigma_b2: float
    sigma_w2: float
    epsilon: float
    n_x: int = 5
    n_z: int = 5
    rician_k: float = float(db_to_linear(5.0))
    beta0: float = 1e-3

    def __post_init__(self):
        if min(self.p_max, self.sigma_b2, self.sigma_w2) <= 0:
            raise ValueError("powers must be positive")
        if self.blocklength < 1:
            raise ValueError("blocklength must be >= 1")
        if not 0 < self.epsilon <= 1:
            raise ValueError("epsilon must lie in (0, 1]")
        if self.n_x < 1 or self.n_z < 1:
            raise ValueError("IRS grid dimensions must be positive")
        if self.rician_k < 0 or self.beta0 <= 0:
            raise ValueError("invalid Rician factor or reference gain")

    @property
    def n_elements(self) -> int:
        return self.n_x * self.n_z

    def with_(self, **kw) -> "SystemParams":
        return replace(self, **kw)


@dataclass(frozen=True)
class Geometry:
    alice: tuple = (0.0, 5.0, 5.0)
    irs: tuple = (100.0, 0.0, 5.0)
    bob: tuple = (70.0, 10.0, 0.0)
    willie: tuple = (100.0, 10.0, 0.0)
    alpha_ar: float = 2.4
    alpha_ab: float = 4.2
    alpha_aw: float = 4.2
    alpha_rb: float = 3.0
    alpha_rw: float = 3.0

    def distance(self, link: str) -> float:
        ends = {
            "ar": (self.alice, self.irs),
            "ab": (self.alice, self.bob),
            "aw": (self.alice, self.willie),
            "rb": (self.irs, self.bob),
            "rw": (self.irs, self.willie),
        }[link]
        return float(np.linalg.norm(np.subtract(ends[1], ends[0], dtype=float)))

    def exponent(self, link: str) -> float:
        return getattr(self, f"alpha_{link}")

    def path_gains(self, beta0: float) -> dict:
        return {k: path_loss(self.distance(k), self.exponent(k), beta0) for k in LINKS}

    def with_irs_x(self, x: float) -> "Geometry":
        return replace(self, irs=(float(x), self.irs[1], self.irs[2]))


def default_params(**overrides) -> SystemParams:
    """Simulation defaults: 36 dBm budget, L = 100, -80 dBm noise, eps = 0.1, 5x5 IRS."""
    base = dict(
        p_max=float(dbm_to_watts(36.0)),
        blocklength=100,
        sigma_b2=float(dbm_to_watts(-80.0)),
        sigma_w2=float(dbm_to_watts(-80.0)),
        epsilon=0.1,
        n_x=5,
        n_z=5,
        rician_k=float(db_to_linear(5.0)),
        beta0=float(db_to_linear(-30.0)),
    )
    base.update(overrides)
    return SystemParams(**base)


@dataclass(frozen=True)
class ChannelSet:
    h_ar: np.ndarray
    h_rb: np.ndarray
    h_rw: np.ndarray
    h_ab: complex
    h_aw: complex
    chi: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.h_ar)
        if len(self.h_rb) != n or len(self.h_rw) != n:
            raise ValueError("IRS channel vectors must share length N")

    @property
    def n_elements(self) -> int:
        return len(self.h_ar)


@dataclass
class ReflectDesign:
    """Transmit power plus IRS reflection pattern, with its achieved metrics.

    The reflect vector is ``v_n = rho_n * exp(-1j * theta_n)``.
    """

    p_a: float
    rho: np.ndarray
    theta: np.ndarray
    bob_snr: float = 0.0
    willie_gain: float = 0.0
    kl_value: float = 0.0

    @property
    def v(self) -> np.ndarray:
        return np.asarray(self.rho) * np.exp(-1j * np.asarray(self.theta))

    @staticmethod
    def polar(v) -> tuple[np.ndarray, np.ndarray]:
        v = np.asarray(v, dtype=complex)
        return np.abs(v), np.mod(-np.angle(v), 2 * np.pi)


def path_loss(d: float, alpha: float, beta0: float) -> float:
    """Large-scale gain beta0 * (d / 1 m) ** -alpha."""
    if not d > 0:
        raise ValueError(f"distance must be positive, got {d}")
    return beta0 * d ** (-alpha)


def make_rng(seed: SeedLike) -> np.random.Generator:
    """Counter-based Philox stream; tuples such as (seed, sweep_idx, trial_idx) split streams."""
    entropy = [int(s) & 0xFFFFFFFFFFFFFFFF for s in np.atleast_1d(seed)]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def complex_gaussian(rng: np.random.Generator, variance: float, size=None):
    scale = np.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(size) + 1j * rng.standard_normal(size))


def ura_steering(geometry: Geometry, n_x: int, n_z: int) -> np.ndarray:
    """Half-wavelength URA response toward Alice, the IRS lying in the x-z plane.

    Element index runs with z fastest: n = ix * n_z + iz.
    """
    d = np.subtract(geometry.alice, geometry.irs, dtype=float)
    d /= np.linalg.norm(d)
    ix, iz = np.meshgrid(np.arange(n_x), np.arange(n_z), indexing="ij")
    phase = np.pi * (ix * d[0] + iz * d[2])
    return np.exp(1j * phase).ravel()


def sample_channels(geometry: Geometry, params: SystemParams, seed: SeedLike) -> ChannelSet:
    rng = make_rng(seed)
    n = params.n_elements
    chi = geometry.path_gains(params.beta0)
    k = params.rician_k
    los = ura_steering(geometry, params.n_x, params.n_z)
    nlos = complex_gaussian(rng, 1.0, n)
    h_ar = np.sqrt(chi["ar"]) * (np.sqrt(k / (k + 1.0)) * los + np.sqrt(1.0 / (k + 1.0)) * nlos)
    h_rb = complex_gaussian(rng, chi["rb"], n)
    h_rw = complex_gaussian(rng, chi["rw"], n)
    h_ab = complex(complex_gaussian(rng, chi["ab"]))
    h_aw = complex(complex_gaussian(rng, chi["aw"]))
    return ChannelSet(h_ar=h_ar, h_rb=h_rb, h_rw=h_rw, h_ab=h_ab, h_aw=h_aw, chi=chi)


def cascade_vectors(ch: ChannelSet) -> tuple[np.ndarray, np.ndarray]:
    """Return (a, b) with a_n = conj(h_rw,n) h_ar,n and b_n = conj(h_rb,n) h_ar,n."""
    return np.conj(ch.h_rw) * ch.h_ar, np.conj(ch.h_rb) * ch.h_ar


def _check_reflect(v):
    v = np.asarray(v, dtype=complex)
    if v.size and np.max(np.abs(v)) > 1 + 1e-9:
        raise ValueError("reflection coefficients must satisfy |v_n| <= 1")
    return v


def bob_snr(p_a: float, v, b, h_ab: complex, sigma_b2: float) -> float:
    v = _check_reflect(v)
    return p_a / sigma_b2 * abs(np.vdot(v, b) + h_ab) ** 2


def willie_gain(v, a, h_aw: complex) -> float:
    v = _check_reflect(v)
    return abs(np.vdot(v, a) + h_aw) ** 2
