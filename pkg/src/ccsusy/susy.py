"""Coupled-channel SUSY transformations of the zero potential.

A transformation is fixed by the factorization energy (below all thresholds)
and either the symmetric value ``U(0)`` of the superpotential or the canonical
triple ``(R, Q0, X0)``. Every evaluator accepts a scalar radius (returning an
``N x N`` matrix) or a 1-D array of radii (returning a stack ``(M, N, N)``).

Internally the superpotential is always evaluated from the canonical form,

    U = -kappa + 2 kappa^{1/2} [[Y^-1, Y^-1 Q^T], [Q Y^-1, Q Y^-1 Q^T]] kappa^{1/2},
    Y = I + X(r) + Q(r)^T Q(r),

whose entries stay bounded for all ``r``. The ``U(0)`` route through
``sigma' sigma^-1`` is kept as an independent evaluator; it becomes
ill-conditioned at large radii when ``rank C < N``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg
from scipy.integrate import quad_vec
from scipy.optimize import bisect

from .errors import (
    PreconditionViolated,
    RankDrop,
    SingularD22,
    SingularSigma,
    SingularY,
    SymmetryViolated,
)
from .scattering import (
    ChannelSet,
    SMatrixPoint,
    SolutionSample,
    WaveNumbers,
    channel_wavenumbers,
    s_matrix_from_jost,
)

RANK_TOL = 1e-10
PRESCAN_POINTS = 512
TAIL_EPS = 1e-14


@dataclass(frozen=True)
class FactorizationSpec:
    channels: ChannelSet
    energy: float

    def __post_init__(self):
        lowest = self.channels.delta.min()
        if not self.energy < lowest:
            raise ValueError(
                f"factorization energy {self.energy} must lie below all thresholds (min {lowest})"
            )

    @classmethod
    def from_kappa(cls, channels: ChannelSet, kappa, channel: int | None = None):
        """Build from one factorization constant (``channel`` given) or the full list."""
        if channel is not None:
            return cls(channels, channels.thresholds[channel] - float(kappa) ** 2)
        kappa = np.asarray(kappa, dtype=float)
        if kappa.shape != (channels.n_channels,) or np.any(kappa <= 0):
            raise ValueError(f"expected {channels.n_channels} positive kappa values")
        energies = channels.delta - kappa**2
        if np.ptp(energies) > 1e-10 * max(1.0, np.abs(energies).max()):
            raise ValueError(f"kappa values {kappa.tolist()} are inconsistent with the thresholds")
        return cls(channels, float(energies[0]))

    @property
    def kappa(self) -> np.ndarray:
        return np.sqrt(self.channels.delta - self.energy)

    @property
    def n(self) -> int:
        return self.channels.n_channels


@dataclass(frozen=True)
class U0Parametrization:
    u0: np.ndarray

    def __post_init__(self):
        u0 = np.array(self.u0, dtype=float)
        if u0.ndim != 2 or u0.shape[0] != u0.shape[1]:
            raise ValueError(f"U(0) must be square, got shape {u0.shape}")
        if not np.array_equal(u0, u0.T):
            raise ValueError("U(0) must be exactly symmetric")
        object.__setattr__(self, "u0", u0)


@dataclass(frozen=True)
class CanonicalParametrization:
    """Canonical ``(R, Q0, X0)`` in the reordered channel basis.

    ``order[i]`` is the user channel placed at reordered position ``i``; the
    first ``rank`` entries carry the growing components (kappa').
    """

    rank: int
    order: tuple[int, ...]
    q0: np.ndarray
    x0: np.ndarray

    def __post_init__(self):
        n = len(self.order)
        r = int(self.rank)
        if not 0 <= r <= n:
            raise ValueError(f"rank {r} outside [0, {n}]")
        if sorted(self.order) != list(range(n)):
            raise ValueError(f"order {self.order} is not a permutation")
        q0 = np.array(self.q0, dtype=float).reshape(n - r, r)
        x0 = np.array(self.x0, dtype=float).reshape(r, r)
        if np.any(np.abs(x0 - x0.T) > 1e-12 * max(1.0, np.abs(x0).max(initial=0.0))):
            raise ValueError("X0 must be symmetric")
        object.__setattr__(self, "rank", r)
        object.__setattr__(self, "order", tuple(int(o) for o in self.order))
        object.__setattr__(self, "q0", q0)
        object.__setattr__(self, "x0", 0.5 * (x0 + x0.T))

    @property
    def n(self) -> int:
        return len(self.order)


@dataclass(frozen=True)
class CanonicalForm:
    """Result of :func:`canonicalize`.

    ``c`` and ``d`` are the row/column-permuted coefficient matrices and ``t``
    the right multiplier with ``c @ t = [[I, 0], [Q0, 0]]`` and
    ``d @ t = [[X0, -Q0^T], [0, I]]``.
    """

    param: CanonicalParametrization
    c: np.ndarray
    d: np.ndarray
    t: np.ndarray
    column_order: tuple[int, ...]


def _radii(r):
    arr = np.asarray(r, dtype=float)
    return np.atleast_1d(arr), arr.ndim == 0


def _out(stack, scalar):
    return stack[0] if scalar else stack


def _permutation_matrix(order: Sequence[int]) -> np.ndarray:
    """``P`` with ``P[order[i], i] = 1`` so that ``A_user = P A_re P^T``."""
    n = len(order)
    p = np.zeros((n, n))
    p[list(order), list(range(n))] = 1.0
    return p


# -- U(0) parametrization ----------------------------------------------------


def sigma_from_u0(param: U0Parametrization, spec: FactorizationSpec, r):
    """``sigma = cosh(kappa r) + sinh(kappa r) kappa^-1 U(0)`` and its derivative."""
    rr, scalar = _radii(r)
    kap = spec.kappa
    kr = rr[:, None] * kap[None, :]
    ch, sh = np.cosh(kr), np.sinh(kr)
    u0 = param.u0
    sigma = ch[:, :, None] * np.eye(spec.n) + (sh / kap)[:, :, None] * u0[None]
    dsigma = (kap * sh)[:, :, None] * np.eye(spec.n) + ch[:, :, None] * u0[None]
    return _out(sigma, scalar), _out(dsigma, scalar)


def _cancellation_ratio(first: np.ndarray, second: np.ndarray) -> np.ndarray:
    """``|det(first + second)|`` relative to the column sizes of the two terms.

    Small values mean the terms cancel, i.e. the sum is numerically singular.
    """
    norms = np.linalg.norm(first, axis=-2) + np.linalg.norm(second, axis=-2)
    scale = np.prod(norms, axis=-1)
    return np.abs(np.linalg.det(first + second)) / np.where(scale > 0, scale, 1.0)


def superpotential_from_u0(param: U0Parametrization, spec: FactorizationSpec, r):
    """``U = sigma' sigma^-1`` for the U(0) factorization solution.

    With ``sigma = e^{kappa r}(A + e^{-2 kappa r} B)``, ``A, B = (I +- kappa^-1 U(0))/2``,
    this is evaluated as ``kappa - 2 kappa e^{-kappa r} B (A + e^{-2 kappa r} B)^-1 e^{-kappa r}``
    so that no factor grows with r.
    """
    rr, scalar = _radii(r)
    kap = spec.kappa
    a = 0.5 * (np.eye(spec.n) + param.u0 / kap[:, None])
    b = 0.5 * (np.eye(spec.n) - param.u0 / kap[:, None])
    em = np.exp(-kap[None, :] * rr[:, None])
    decay = (em**2)[:, :, None] * b[None]
    core = a[None] + decay
    bad = _cancellation_ratio(np.broadcast_to(a, core.shape), decay) < 1e-15
    if np.any(bad):
        r_bad = float(rr[np.argmax(bad)])
        raise SingularSigma(f"det sigma vanishes numerically at r = {r_bad:.6g}", radius=r_bad)
    m = np.linalg.solve(np.swapaxes(core, -1, -2), np.broadcast_to(b.T, core.shape))
    m = np.swapaxes(m, -1, -2)
    u = np.diag(kap)[None] - 2.0 * (kap * em)[:, :, None] * m * em[:, None, :]
    return _out(u, scalar)


def coefficient_matrices_u0(param: U0Parametrization, spec: FactorizationSpec):
    """``(C2, D2)`` with ``sigma = e^{kappa r} kappa^{-1/2} C2 + e^{-kappa r} kappa^{-1/2} D2``."""
    kap = spec.kappa
    sq = np.sqrt(kap)
    a = param.u0 / kap[:, None]
    eye = np.eye(spec.n)
    return 0.5 * sq[:, None] * (eye + a), 0.5 * sq[:, None] * (eye - a)


# -- canonicalization ----------------------------------------------------------


def _rank(m: np.ndarray, scale: float) -> int:
    if m.size == 0 or scale == 0:
        return 0
    sv = np.linalg.svd(m, compute_uv=False)
    return int(np.count_nonzero(sv > RANK_TOL * scale))


def matrix_rank(c2: np.ndarray) -> int:
    """Rank by column-pivoted QR with relative tolerance ``1e-10 * ||C||``."""
    norm = np.linalg.norm(c2, 2)
    if norm == 0:
        return 0
    _, rr, _ = scipy.linalg.qr(c2, pivoting=True)
    return int(np.count_nonzero(np.abs(np.diag(rr)) > RANK_TOL * norm))


def greedy_channel_order(c2: np.ndarray, spec: FactorizationSpec, rank: int | None = None):
    """Rows picked by descending threshold, keeping only those independent of earlier picks."""
    scale = np.linalg.norm(c2, 2)
    if rank is None:
        rank = matrix_rank(c2)
    by_threshold = sorted(range(spec.n), key=lambda i: -spec.channels.thresholds[i])
    picked: list[int] = []
    for i in by_threshold:
        if len(picked) == rank:
            break
        if _rank(c2[picked + [i]], scale) == len(picked) + 1:
            picked.append(i)
    rest = [i for i in range(spec.n) if i not in picked]
    return picked + rest


def canonicalize(c2: np.ndarray, d2: np.ndarray, spec: FactorizationSpec) -> CanonicalForm:
    c2 = np.asarray(c2, dtype=float)
    d2 = np.asarray(d2, dtype=float)
    n = spec.n
    if c2.shape != (n, n) or d2.shape != (n, n):
        raise ValueError(f"C2, D2 must be {n}x{n}")
    scale = max(np.linalg.norm(c2, 2) * np.linalg.norm(d2, 2), 1e-300)
    asym = np.abs(d2.T @ c2 - c2.T @ d2).max()
    if asym > 1e-10 * scale:
        raise SymmetryViolated(f"D2^T C2 - C2^T D2 has entries of size {asym:.3e}")

    rank = matrix_rank(c2)
    order = greedy_channel_order(c2, spec, rank)
    c3, d3 = c2[order], d2[order]

    cnorm = np.linalg.norm(c2, 2)
    cols: list[int] = []
    for j in range(n):
        if len(cols) == rank:
            break
        if _rank(c3[:rank, cols + [j]], cnorm) == len(cols) + 1:
            cols.append(j)
    col_order = cols + [j for j in range(n) if j not in cols]
    c, d = c3[:, col_order], d3[:, col_order]

    r = rank
    eye_r, eye_s = np.eye(r), np.eye(n - r)
    if r > 0:
        m = c[:r, :r]
        p = np.linalg.solve(m, c[:r, r:])
        q0 = np.linalg.solve(m.T, c[r:, :r].T).T
        minv = np.linalg.inv(m)
    else:
        p = np.zeros((0, n))
        q0 = np.zeros((n, 0))
        minv = np.zeros((0, 0))
    t1 = np.block([[eye_r, p], [np.zeros((n - r, r)), -eye_s]]) @ scipy.linalg.block_diag(minv, eye_s)
    dt1 = d @ t1
    d11, d12 = dt1[:r, :r], dt1[:r, r:]
    d21, d22 = dt1[r:, :r], dt1[r:, r:]
    if n - r > 0 and np.linalg.cond(d22) > 1e12:
        raise SingularD22("block D22 is singular; sigma would be singular for all r")
    if r < n and r > 0 and np.abs(d12 + q0.T @ d22).max() > 1e-8 * max(1.0, np.abs(d22).max()):
        raise SymmetryViolated("D12 != -Q0^T D22 after reduction")
    x0 = d11 + q0.T @ d21
    if r > 0 and np.abs(x0 - x0.T).max() > 1e-8 * max(1.0, np.abs(x0).max()):
        raise SymmetryViolated("X0 is not symmetric")

    kap = spec.kappa[order]
    q0 = q0.copy()
    for j in range(n - r):
        for i in range(r):
            if kap[i] < kap[r + j]:
                q0[j, i] = 0.0
    t2 = np.linalg.inv(np.block([[eye_r, np.zeros((r, n - r))], [d21, d22]]))
    param = CanonicalParametrization(r, tuple(order), q0, x0)
    return CanonicalForm(param, c, d, t1 @ t2, tuple(col_order))


def canonical_from_u0(param: U0Parametrization, spec: FactorizationSpec) -> CanonicalParametrization:
    c2, d2 = coefficient_matrices_u0(param, spec)
    return canonicalize(c2, d2, spec).param


def check_vanishing_rule(param: CanonicalParametrization, spec: FactorizationSpec, tol: float = 0.0):
    kap = spec.kappa[list(param.order)]
    r = param.rank
    for j in range(param.n - r):
        for i in range(r):
            if kap[i] < kap[r + j] and abs(param.q0[j, i]) > tol:
                raise PreconditionViolated(
                    f"q0[{j},{i}] must vanish: kappa' = {kap[i]:.6g} < kappa'' = {kap[r + j]:.6g}"
                )


# -- canonical evaluation -------------------------------------------------------


def _canonical_blocks(param: CanonicalParametrization, spec: FactorizationSpec, rr):
    kap = spec.kappa[list(param.order)]
    r = param.rank
    kp, kpp = kap[:r], kap[r:]
    ex = np.exp(-(kp[None, :, None] + kp[None, None, :]) * rr[:, None, None])
    x = param.x0[None] * ex
    rate = kpp[:, None] - kp[None, :]
    with np.errstate(over="ignore", invalid="ignore"):
        eq = np.exp(rate[None] * rr[:, None, None])
        q = np.where(param.q0[None] == 0.0, 0.0, param.q0[None] * eq)
    y = np.eye(r)[None] + x + np.swapaxes(q, -1, -2) @ q
    return kap, x, q, y


def _det_y(param, spec, rr):
    if param.rank == 0:
        return np.ones_like(rr)
    return np.linalg.det(_canonical_blocks(param, spec, rr)[3])


def superpotential_canonical(param: CanonicalParametrization, spec: FactorizationSpec, r):
    rr, scalar = _radii(r)
    n, rk = param.n, param.rank
    kap = spec.kappa[list(param.order)]
    u = np.broadcast_to(-np.diag(kap), (len(rr), n, n)).copy()
    if rk > 0:
        _, _, q, y = _canonical_blocks(param, spec, rr)
        dets = np.linalg.det(y)
        if np.any(np.abs(dets) < 1e-14):
            r_bad = float(rr[np.argmin(np.abs(dets))])
            raise SingularY(f"det Y vanishes at r = {r_bad:.6g}", radius=r_bad)
        yinv = np.linalg.inv(y)
        qyinv = q @ yinv
        top = np.concatenate([yinv, np.swapaxes(qyinv, -1, -2)], axis=-1)
        bottom = np.concatenate([qyinv, qyinv @ np.swapaxes(q, -1, -2)], axis=-1)
        b = np.concatenate([top, bottom], axis=-2)
        sq = np.sqrt(kap)
        u += 2.0 * sq[None, :, None] * b * sq[None, None, :]
    p = _permutation_matrix(param.order)
    return _out(p @ u @ p.T, scalar)


def superpotential_closed_forms(param: CanonicalParametrization, spec: FactorizationSpec, r, form=None):
    """Reduced superpotentials for ``X0 = 0``: row form (rank N-1) or column form (rank 1)."""
    n, rk = param.n, param.rank
    if np.any(param.x0 != 0):
        raise PreconditionViolated("closed forms require X0 = 0")
    if form is None:
        form = "column" if rk == 1 else "row" if rk == n - 1 else None
    if form == "row" and rk != n - 1 or form == "column" and rk != 1 or form is None:
        raise PreconditionViolated(f"no closed form for rank {rk} with {n} channels")
    check_vanishing_rule(param, spec)
    rr, scalar = _radii(r)
    kap = spec.kappa[list(param.order)]
    sq = np.sqrt(kap)
    kk = sq[:, None] * sq[None, :]
    out = np.empty((len(rr), n, n))
    for m, rad in enumerate(rr):
        if form == "row":
            qrow = param.q0[0] * np.exp((kap[-1] - kap[:-1]) * rad)
            blk = np.block([[np.outer(qrow, qrow), -qrow[:, None]], [-qrow[None, :], np.ones((1, 1))]])
            out[m] = np.diag(kap) - 2.0 / (1.0 + qrow @ qrow) * kk * blk
        else:
            qcol = param.q0[:, 0] * np.exp((kap[1:] - kap[0]) * rad)
            blk = np.block([[np.ones((1, 1)), qcol[None, :]], [qcol[:, None], np.outer(qcol, qcol)]])
            out[m] = -np.diag(kap) + 2.0 / (1.0 + qcol @ qcol) * kk * blk
    p = _permutation_matrix(param.order)
    return _out(p @ out @ p.T, scalar)


def u_at_infinity(param, spec: FactorizationSpec) -> np.ndarray:
    """``diag(+kappa')`` on the growing channels and ``-kappa''`` on the rest, in user order."""
    if isinstance(param, U0Parametrization):
        param = canonical_from_u0(param, spec)
    signs = np.full(spec.n, -1.0)
    signs[list(param.order[: param.rank])] = 1.0
    return np.diag(signs * spec.kappa)


# -- 2x2 parameter maps -------------------------------------------------------


def canonical_from_u0_2x2(u0, spec: FactorizationSpec) -> CanonicalParametrization:
    """``X0`` entries for a rank-2 two-channel ``U(0) = [[a1, b], [b, a2]]``."""
    u0 = np.asarray(u0, dtype=float)
    if spec.n != 2 or u0.shape != (2, 2):
        raise PreconditionViolated("two-channel map only")
    a1, a2, b = u0[0, 0], u0[1, 1], u0[0, 1]
    k1, k2 = spec.kappa
    det = (a1 + k1) * (a2 + k2) - b * b
    if abs(det) < RANK_TOL * max(1.0, (abs(a1) + k1) * (abs(a2) + k2)):
        raise RankDrop("det[U(0) + kappa] = 0: rank C < 2, use canonicalize for the rank-1 form")
    x11 = (b * b - (a1 - k1) * (a2 + k2)) / det
    x22 = (b * b - (a1 + k1) * (a2 - k2)) / det
    x12 = -2.0 * b * math.sqrt(k1 * k2) / det
    return CanonicalParametrization(2, (0, 1), np.zeros((0, 2)), [[x11, x12], [x12, x22]])


def u0_from_canonical_2x2(param: CanonicalParametrization, spec: FactorizationSpec) -> np.ndarray:
    """Inverse map; also handles the rank-1 case through its closed form at r = 0."""
    if spec.n != 2:
        raise PreconditionViolated("two-channel map only")
    kap = spec.kappa[list(param.order)]
    k1, k2 = kap
    if param.rank == 2:
        x = param.x0
        den = (1 + x[0, 0]) * (1 + x[1, 1]) - x[0, 1] ** 2
        sq = np.sqrt(kap)
        inner = np.array([[1 + x[1, 1], -x[0, 1]], [-x[0, 1], 1 + x[0, 0]]])
        u = -np.diag(kap) + 2.0 / den * sq[:, None] * inner * sq[None, :]
    elif param.rank == 1:
        q, x = param.q0[0, 0], param.x0[0, 0]
        s = 1 + x + q * q
        u = np.array(
            [
                [(1 - x - q * q) / s * k1, 2 * q * math.sqrt(k1 * k2) / s],
                [2 * q * math.sqrt(k1 * k2) / s, -(1 + x - q * q) / s * k2],
            ]
        )
    else:
        u = -np.diag(kap)
    p = _permutation_matrix(param.order)
    return p @ u @ p.T


# -- transform result ----------------------------------------------------------


def default_r_max(param: CanonicalParametrization, spec: FactorizationSpec) -> float:
    """Radius beyond which every decaying term of Y is below 1e-14."""
    kap = spec.kappa[list(param.order)]
    r = param.rank
    rates = [2.0 * kap.min()]
    rates += [2.0 * kap[i] for i in range(r)]
    for j in range(param.n - r):
        for i in range(r):
            if param.q0[j, i] != 0.0:
                rates.append(2.0 * (kap[i] - kap[r + j]))
    return math.log(1.0 / TAIL_EPS) / min(rates)


def prescan_regularity(param: CanonicalParametrization, spec: FactorizationSpec, r_max: float):
    """Reject parametrizations whose det Y changes sign on [0, r_max]."""
    if param.rank == 0:
        return
    grid = np.concatenate([[0.0], np.geomspace(r_max * 1e-4, r_max, PRESCAN_POINTS - 1)])
    dets = _det_y(param, spec, grid)
    if dets[0] == 0.0:
        raise SingularY("det Y vanishes at r = 0", radius=0.0)
    # det Y -> 1 at infinity, so a non-positive tail value also implies a crossing
    signs = np.sign(np.append(dets, 1.0))
    flips = np.flatnonzero(signs[:-1] != signs[1:])
    if flips.size:
        i = flips[0]
        a = grid[i]
        b = grid[i + 1] if i + 1 < len(grid) else 10.0 * r_max
        f = lambda s: _det_y(param, spec, np.array([s]))[0]
        root = bisect(f, a, b, xtol=1e-12) if f(a) * f(b) < 0 else b
        raise SingularY(f"det Y changes sign near r = {root:.10g}; potential is singular", radius=root)


@dataclass(frozen=True)
class TransformResult:
    """Evaluators for one SUSY partner of the zero potential."""

    spec: FactorizationSpec
    param: U0Parametrization | CanonicalParametrization
    canonical: CanonicalParametrization
    r_max: float
    u_origin: np.ndarray = field(repr=False)
    u_at_infinity: np.ndarray = field(repr=False)
    c: np.ndarray = field(repr=False)
    d: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.spec.n

    @property
    def rank(self) -> int:
        return self.canonical.rank

    def superpotential(self, r):
        return superpotential_canonical(self.canonical, self.spec, r)

    def potential(self, r):
        """``V = 2 (U^2 - kappa^2)``, from ``U' = kappa^2 - U^2`` for the zero initial potential."""
        u = self.superpotential(r)
        return 2.0 * (u @ u - np.diag(self.spec.kappa**2))

    def sigma(self, r):
        """Factorization solution and derivative, ``kappa^{-1/2}(e^{kappa r} C + e^{-kappa r} D)``."""
        rr, scalar = _radii(r)
        kap = self.spec.kappa
        ep = np.exp(kap[None, :] * rr[:, None]) / np.sqrt(kap)
        em = np.exp(-kap[None, :] * rr[:, None]) / np.sqrt(kap)
        s = ep[:, :, None] * self.c + em[:, :, None] * self.d
        ds = (kap * ep)[:, :, None] * self.c - (kap * em)[:, :, None] * self.d
        return _out(s, scalar), _out(ds, scalar)

    def jost_k(self, k, initial=None) -> np.ndarray:
        """``F~(k) = [U(inf) - ik]^-1 [F(k) U(0) + G(k)]`` at an arbitrary wave-number vector.

        ``initial`` is an optional pair of callables ``(F, G)`` of the initial
        potential; the default is the zero potential (F = I, G = -ik).
        """
        k = np.asarray(k, dtype=complex)
        ik = np.diag(1j * k)
        if initial is None:
            rhs = self.u_origin - ik
        else:
            f, g = initial
            rhs = np.asarray(f(k)) @ self.u_origin + np.asarray(g(k))
        return np.linalg.solve(self.u_at_infinity - ik, rhs)

    def jost(self, energy: float, initial=None) -> np.ndarray:
        k = channel_wavenumbers(energy, self.spec.channels)
        return self.jost_k(k.values, initial)

    def jost_solution(self, energy: float, r) -> np.ndarray:
        """``f~(k, r) = [U(r) - ik] e^{ikr} [U(inf) - ik]^-1``."""
        k = channel_wavenumbers(energy, self.spec.channels).values
        rr, scalar = _radii(r)
        u = self.superpotential(rr)
        ik = np.diag(1j * k)
        right = np.linalg.inv(self.u_at_infinity - ik)
        phase = np.exp(1j * k[None, :] * rr[:, None])
        f = (u - ik) * phase[:, None, :] @ right
        return _out(f, scalar)

    def jost_solution_derivative(self, energy: float, r) -> np.ndarray:
        """r-derivative of :meth:`jost_solution`, using ``U' = kappa^2 - U^2``."""
        k = channel_wavenumbers(energy, self.spec.channels).values
        rr, scalar = _radii(r)
        u = self.superpotential(rr)
        ik = np.diag(1j * k)
        du = np.diag(self.spec.kappa**2) - u @ u
        right = np.linalg.inv(self.u_at_infinity - ik)
        phase = np.exp(1j * k[None, :] * rr[:, None])
        f = (du + (u - ik) @ ik) * phase[:, None, :] @ right
        return _out(f, scalar)

    def s_matrix(self, energy: float) -> SMatrixPoint:
        k = channel_wavenumbers(energy, self.spec.channels)
        return s_matrix_from_jost(self.jost_k(k.values), self.jost_k(-k.values), k)

    def solution_at_factorization_energy(self, r: float, r0: float = 0.0):
        """``phi~ = (sigma^T)^-1`` and ``psi~ = (sigma^T)^-1 int_{r}^{r0} sigma^T sigma``.

        Both returned as :class:`SolutionSample` (value, derivative) at ``r``.
        The integration direction fixes ``W[phi~, psi~] = -I``. Accuracy degrades
        with the condition number of ``sigma(r)``, which grows exponentially when
        ``rank C < N``.
        """
        hi = max(r0, r)
        if hi > self.r_max:
            prescan_regularity(self.canonical, self.spec, hi)

        def integrand(s):
            sig = self.sigma(s)[0]
            return sig.T @ sig

        integral, _ = quad_vec(integrand, r0, r, epsabs=1e-13, epsrel=1e-12)
        sig, dsig = self.sigma(r)
        phi = np.linalg.inv(sig.T)
        dphi = -phi @ dsig.T @ phi
        psi = -phi @ integral
        dpsi = -(dphi @ integral + sig)
        return SolutionSample(phi, dphi), SolutionSample(psi, dpsi)

    def tail_decay_rate(self, r_lo: float, r_hi: float, n: int = 40) -> float:
        """Slope of log ||U(r) - U(inf)||_inf from a linear fit over [r_lo, r_hi]."""
        rr = np.linspace(r_lo, r_hi, n)
        dev = np.abs(self.superpotential(rr) - self.u_at_infinity).max(axis=(1, 2))
        keep = dev > 1e-300
        return float(np.polyfit(rr[keep], np.log(dev[keep]), 1)[0])


def _user_coefficients(param: CanonicalParametrization, spec: FactorizationSpec):
    n, r = param.n, param.rank
    c = np.zeros((n, n))
    d = np.zeros((n, n))
    c[:r, :r] = np.eye(r)
    c[r:, :r] = param.q0
    d[:r, :r] = param.x0
    d[:r, r:] = -param.q0.T
    d[r:, r:] = np.eye(n - r)
    p = _permutation_matrix(param.order)
    return p @ c, p @ d


def transform(
    spec: FactorizationSpec,
    param: U0Parametrization | CanonicalParametrization,
    r_max: float | None = None,
    prescan: bool = True,
) -> TransformResult:
    """Validate a parametrization and build its :class:`TransformResult`.

    Raises :class:`SingularSigma` (or :class:`SingularY`) when the resulting
    potential would be singular somewhere on ``[0, r_max]``.
    """
    if isinstance(param, U0Parametrization):
        if param.u0.shape != (spec.n, spec.n):
            raise ValueError(f"U(0) must be {spec.n}x{spec.n}")
        canonical = canonical_from_u0(param, spec)
        c, d = coefficient_matrices_u0(param, spec)
        u_origin = param.u0
    elif isinstance(param, CanonicalParametrization):
        if param.n != spec.n:
            raise ValueError(f"parametrization has {param.n} channels, spec has {spec.n}")
        check_vanishing_rule(param, spec)
        canonical = param
        c, d = _user_coefficients(param, spec)
        u_origin = None
    else:
        raise TypeError(f"unsupported parametrization {type(param).__name__}")
    if r_max is None:
        r_max = default_r_max(canonical, spec)
    if prescan:
        prescan_regularity(canonical, spec, r_max)
    if u_origin is None:
        u_origin = superpotential_canonical(canonical, spec, 0.0)
    return TransformResult(
        spec=spec,
        param=param,
        canonical=canonical,
        r_max=float(r_max),
        u_origin=u_origin,
        u_at_infinity=u_at_infinity(canonical, spec),
        c=c,
        d=d,
    )


# -- module-level operations on (param, spec) ------------------------------------


def transformed_potential(param, spec: FactorizationSpec, r):
    return transform(spec, param, prescan=False).potential(r)


def transformed_jost(param, spec: FactorizationSpec, energy: float, initial=None):
    return transform(spec, param, prescan=False).jost(energy, initial)


def transformed_jost_solution(param, spec: FactorizationSpec, energy: float, r):
    return transform(spec, param, prescan=False).jost_solution(energy, r)


def solution_at_factorization_energy(param, spec: FactorizationSpec, r: float, r0: float = 0.0):
    return transform(spec, param, prescan=False).solution_at_factorization_energy(r, r0)


def free_parameter_count(n: int, rank: int) -> int:
    return rank * (rank + 1) // 2 + rank * (n - rank)


def potential_jacobian_rank(
    param: CanonicalParametrization,
    spec: FactorizationSpec,
    radii: np.ndarray,
    step: float = 1e-6,
    rtol: float = 1e-7,
) -> tuple[int, int]:
    """Numerical rank of (free Q0 entries, X0 upper triangle) -> sampled potential.

    Returns ``(rank, number_of_parameters)``. Central differences; singular
    values below ``rtol * s_max`` count as zero.
    """
    n, r = param.n, param.rank
    kap = spec.kappa[list(param.order)]
    q_free = [(j, i) for j in range(n - r) for i in range(r) if kap[i] > kap[r + j]]
    x_free = [(i, j) for i in range(r) for j in range(i, r)]
    iu = np.triu_indices(n)

    def sample(vec):
        q0 = param.q0.copy()
        x0 = param.x0.copy()
        for v, (j, i) in zip(vec[: len(q_free)], q_free):
            q0[j, i] = v
        for v, (i, j) in zip(vec[len(q_free) :], x_free):
            x0[i, j] = x0[j, i] = v
        p = CanonicalParametrization(r, param.order, q0, x0)
        pot = transform(spec, p, prescan=False).potential(radii)
        return pot[:, iu[0], iu[1]].ravel()

    base = np.array([param.q0[j, i] for j, i in q_free] + [param.x0[i, j] for i, j in x_free])
    cols = []
    for m in range(len(base)):
        e = np.zeros_like(base)
        e[m] = step
        cols.append((sample(base + e) - sample(base - e)) / (2 * step))
    if not cols:
        return 0, 0
    jac = np.stack(cols, axis=1)
    sv = np.linalg.svd(jac, compute_uv=False)
    return int(np.count_nonzero(sv > rtol * sv[0])), len(base)
