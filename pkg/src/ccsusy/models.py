"""Closed-form two- and three-channel models, written out explicitly.

These deliberately do not call into :mod:`ccsusy.susy`; they serve as an
independent algebraic check of the general machinery and as named presets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import bisect, minimize_scalar

from .errors import RankDrop, SingularSigma
from .scattering import ChannelSet, channel_wavenumbers
from .susy import CanonicalParametrization, FactorizationSpec, U0Parametrization


def _radii(r):
    arr = np.asarray(r, dtype=float)
    return np.atleast_1d(arr), arr.ndim == 0


@dataclass(frozen=True)
class CoxModel2x2:
    """Rank-2 two-channel model fixed by ``U(0) = [[alpha1, beta], [beta, alpha2]]``."""

    spec: FactorizationSpec
    alpha1: float
    alpha2: float
    beta: float

    def __post_init__(self):
        if self.spec.n != 2:
            raise ValueError("CoxModel2x2 needs two channels")
        k1, k2 = self.spec.kappa
        cond = (k1 + self.alpha1) * (k2 + self.alpha2) - self.beta**2
        scale = max(1.0, (k1 + abs(self.alpha1)) * (k2 + abs(self.alpha2)))
        if abs(cond) < 1e-10 * scale:
            raise RankDrop(f"(k1 + a1)(k2 + a2) - b^2 = {cond:.3e}: rank C < 2")

    @property
    def u0(self) -> np.ndarray:
        return np.array([[self.alpha1, self.beta], [self.beta, self.alpha2]])

    def parametrization(self) -> U0Parametrization:
        return U0Parametrization(self.u0)


def _cox_det_scaled(k1, k2, a1, a2, b, r):
    # det sigma * exp(-(k1 + k2) r)
    e1, e2 = np.exp(-2 * k1 * r), np.exp(-2 * k2 * r)
    c1, s1 = 0.5 * (1 + e1), 0.5 * (1 - e1)
    c2, s2 = 0.5 * (1 + e2), 0.5 * (1 - e2)
    det = a2 / k2 * c1 * s2 + a1 / k1 * c2 * s1 + c1 * c2 + (a1 * a2 - b * b) / (k1 * k2) * s1 * s2
    return det, (c1, s1, c2, s2)


def _cox_u11_scaled(k1, k2, a1, a2, b, hyper):
    c1, s1, c2, s2 = hyper
    return c2 * (a1 * c1 + k1 * s1) + s2 / k2 * ((a1 * a2 - b * b) * c1 + k1 * a2 * s1)


def cox_superpotential(m: CoxModel2x2, r):
    rr, scalar = _radii(r)
    k1, k2 = m.spec.kappa
    a1, a2, b = m.alpha1, m.alpha2, m.beta
    det, hyper = _cox_det_scaled(k1, k2, a1, a2, b, rr)
    if np.any(det == 0) or np.any(np.sign(det) != np.sign(det[0])):
        raise SingularSigma("det sigma vanishes on the requested radii")
    c1, s1, c2, s2 = hyper
    u11 = _cox_u11_scaled(k1, k2, a1, a2, b, hyper) / det
    u22 = _cox_u11_scaled(k2, k1, a2, a1, b, (c2, s2, c1, s1)) / det
    u12 = b * np.exp(-(k1 + k2) * rr) / det
    u = np.stack([np.stack([u11, u12], -1), np.stack([u12, u22], -1)], -2)
    return u[0] if scalar else u


def cox_jost(m: CoxModel2x2, energy: float) -> np.ndarray:
    k1, k2 = channel_wavenumbers(energy, m.spec.channels).values
    return cox_jost_k(m, np.array([k1, k2]))


def cox_jost_k(m: CoxModel2x2, k) -> np.ndarray:
    k1, k2 = k
    kap1, kap2 = m.spec.kappa
    return np.array(
        [
            [(m.alpha1 - 1j * k1) / (kap1 - 1j * k1), m.beta / (kap1 - 1j * k1)],
            [m.beta / (kap2 - 1j * k2), (m.alpha2 - 1j * k2) / (kap2 - 1j * k2)],
        ]
    )


@dataclass(frozen=True)
class RankOneModel2x2:
    """Rank-1 two-channel model with ``q(r) = q0 e^{(k2 - k1) r}``, ``x(r) = x0 e^{-2 k1 r}``."""

    spec: FactorizationSpec
    q0: float
    x0: float

    def __post_init__(self):
        if self.spec.n != 2:
            raise ValueError("RankOneModel2x2 needs two channels")
        k1, k2 = self.spec.kappa
        if not k1 > k2:
            raise ValueError("rank-1 model requires kappa1 > kappa2")
        if not self.x0 > -1 - self.q0**2:
            raise ValueError(f"x0 = {self.x0} must exceed -1 - q0^2 = {-1 - self.q0**2}")

    @classmethod
    def from_u0(cls, spec: FactorizationSpec, u0, tol: float = 1e-10):
        """Invert the r = 0 closed form; ``U(0)`` must satisfy the rank-1 condition."""
        u0 = np.asarray(u0, dtype=float)
        a1, a2, b = u0[0, 0], u0[1, 1], u0[0, 1]
        k1, k2 = spec.kappa
        cond = (k1 + a1) * (k2 + a2) - b * b
        if abs(cond) > tol:
            raise ValueError(f"U(0) violates the rank-1 condition by {cond:.3e}")
        s = 2 * k1 / (k1 + a1)
        q0 = b * s / (2 * math.sqrt(k1 * k2))
        x0 = s - 1 - q0 * q0
        return cls(spec, q0, x0)

    def canonical(self) -> CanonicalParametrization:
        return CanonicalParametrization(1, (0, 1), [[self.q0]], [[self.x0]])


def rank1_superpotential(m: RankOneModel2x2, r):
    rr, scalar = _radii(r)
    k1, k2 = m.spec.kappa
    q = m.q0 * np.exp((k2 - k1) * rr)
    x = m.x0 * np.exp(-2 * k1 * rr)
    den = 1 + x + q * q
    a1 = (1 - x - q * q) / den * k1
    a2 = -(1 + x - q * q) / den * k2
    b = 2 * q * math.sqrt(k1 * k2) / den
    u = np.stack([np.stack([a1, b], -1), np.stack([b, a2], -1)], -2)
    return u[0] if scalar else u


def rank1_u0(m: RankOneModel2x2) -> np.ndarray:
    return rank1_superpotential(m, 0.0)


def rank1_jost(m: RankOneModel2x2, energy: float) -> np.ndarray:
    k = channel_wavenumbers(energy, m.spec.channels).values
    return rank1_jost_k(m, k)


def rank1_jost_k(m: RankOneModel2x2, k) -> np.ndarray:
    k1, k2 = k
    kap1, kap2 = m.spec.kappa
    u0 = rank1_u0(m)
    a1, a2, b = u0[0, 0], u0[1, 1], u0[0, 1]
    return np.array(
        [
            [(a1 - 1j * k1) / (kap1 - 1j * k1), b / (kap1 - 1j * k1)],
            [-b / (kap2 + 1j * k2), -(a2 - 1j * k2) / (kap2 + 1j * k2)],
        ]
    )


@dataclass(frozen=True)
class ThreeChannelRank2Model:
    """Three channels with ``kappa1 > kappa3 > kappa2``, ``Q0 = (q0, 0)`` and off-diagonal ``X0 = x0``."""

    spec: FactorizationSpec
    q0: float
    x0: float

    def __post_init__(self):
        if self.spec.n != 3:
            raise ValueError("ThreeChannelRank2Model needs three channels")
        k1, k2, k3 = self.spec.kappa
        if not k1 > k3 > k2:
            raise ValueError("model requires kappa1 > kappa3 > kappa2")
        if not self.q0**2 > self.x0**2 - 1:
            raise ValueError("regularity requires q0^2 > x0^2 - 1")

    def canonical(self) -> CanonicalParametrization:
        return CanonicalParametrization(
            2, (0, 1, 2), [[self.q0, 0.0]], [[0.0, self.x0], [self.x0, 0.0]]
        )


def three_channel_superpotential(m: ThreeChannelRank2Model, r):
    rr, scalar = _radii(r)
    kap = m.spec.kappa
    k1, k2, k3 = kap
    x = m.x0 * np.exp(-(k1 + k2) * rr)
    q = m.q0 * np.exp((k3 - k1) * rr)
    det = 1 + q * q - x * x
    one = np.ones_like(rr)
    inner = np.stack(
        [
            np.stack([one, -x, q], -1),
            np.stack([-x, 1 + q * q, -x * q], -1),
            np.stack([q, -x * q, q * q], -1),
        ],
        -2,
    )
    sq = np.sqrt(kap)
    u = -np.diag(kap) + 2.0 / det[:, None, None] * sq[:, None] * inner * sq[None, :]
    return u[0] if scalar else u


def three_channel_u_infinity(m: ThreeChannelRank2Model) -> np.ndarray:
    k1, k2, k3 = m.spec.kappa
    return np.diag([k1, k2, -k3])


def three_channel_jost(m: ThreeChannelRank2Model, energy: float) -> np.ndarray:
    k = channel_wavenumbers(energy, m.spec.channels).values
    ik = np.diag(1j * k)
    u0 = three_channel_superpotential(m, 0.0)
    return np.linalg.solve(three_channel_u_infinity(m) - ik, u0 - ik)


# -- figure presets ---------------------------------------------------------------

FIG_THRESHOLDS = (10.0, 0.0)
FIG_U0 = ((-2.0, 0.6), (0.6, -2.0))


def rank_one_kappa(gap: float = 10.0, alpha1: float = -2.0, alpha2: float = -2.0, beta: float = 0.6) -> float:
    """Lower-channel kappa at which ``(sqrt(gap + k^2) + a1)(k + a2) = b^2``, by bisection.

    With the figure parameters this is ``(sqrt(10 + k^2) - 2)(k - 2) = 0.36``.
    """
    g = lambda k: (math.sqrt(gap + k * k) + alpha1) * (k + alpha2) - beta * beta
    lo = max(-alpha2, 1e-12)
    hi = lo + 1.0
    while g(hi) <= 0:
        hi *= 2.0
    return bisect(g, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)


@dataclass(frozen=True)
class FigurePreset:
    name: str
    kappa2: float
    channels: ChannelSet
    u0: np.ndarray
    r_range: tuple[float, float] = (0.0, 8.0)
    e_range: tuple[float, float] = (0.0, 20.0)

    @property
    def spec(self) -> FactorizationSpec:
        return FactorizationSpec.from_kappa(self.channels, self.kappa2, channel=1)


PRESET_NAMES = ("fig1", "fig2", "fig3")


def figure_preset(name: str) -> FigurePreset:
    """Two-channel figure setups: thresholds (10, 0), the same U(0), three values of kappa2."""
    kappas = {"fig1": 3.0, "fig2": 2.2}
    if name == "fig3":
        kappa2 = rank_one_kappa()
    elif name in kappas:
        kappa2 = kappas[name]
    else:
        raise KeyError(f"unknown preset {name!r}; choose from {', '.join(PRESET_NAMES)}")
    return FigurePreset(name, kappa2, ChannelSet(FIG_THRESHOLDS), np.array(FIG_U0))


def resonance_energy(jost, e_lo: float, e_hi: float) -> float:
    """Local minimum of ``|det F(E)|`` on the real axis within ``(e_lo, e_hi)``."""
    res = minimize_scalar(
        lambda e: abs(np.linalg.det(jost(e))), bounds=(e_lo, e_hi), method="bounded",
        options={"xatol": 1e-10},
    )
    return float(res.x)
