"""Multichannel scattering primitives.

Channel kinematics, matrix Wronskians, the S-matrix built from a Jost
matrix, and the eigenphase (Blatt-Biedenharn) decomposition of 2x2 S-matrices.
Energies are in reduced units where ``k_i**2 = E - threshold_i``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .errors import NotSymmetric, NotUnitary, SingularJost

DEFAULT_TOL = 1e-8
SINGULAR_JOST_TOL = 1e-12


@dataclass(frozen=True)
class ChannelSet:
    """Channel thresholds plus the permutation applied to the user's ordering.

    ``permutation[i]`` is the user-facing index of internal channel ``i``.
    """

    thresholds: tuple[float, ...]
    permutation: tuple[int, ...] = field(default=())

    def __post_init__(self):
        thresholds = tuple(float(t) for t in self.thresholds)
        object.__setattr__(self, "thresholds", thresholds)
        n = len(thresholds)
        if n < 1:
            raise ValueError("at least one channel is required")
        if len(set(thresholds)) != n:
            raise ValueError(f"thresholds must be pairwise distinct, got {thresholds}")
        perm = tuple(int(p) for p in self.permutation) or tuple(range(n))
        if sorted(perm) != list(range(n)):
            raise ValueError(f"permutation {perm} is not a bijection on {n} channels")
        object.__setattr__(self, "permutation", perm)

    @property
    def n_channels(self) -> int:
        return len(self.thresholds)

    @property
    def delta(self) -> np.ndarray:
        return np.asarray(self.thresholds)

    def reordered(self, order: Sequence[int]) -> "ChannelSet":
        """Channel set whose channel ``i`` is this set's channel ``order[i]``."""
        order = [int(o) for o in order]
        return ChannelSet(
            tuple(self.thresholds[o] for o in order),
            tuple(self.permutation[o] for o in order),
        )


@dataclass(frozen=True)
class WaveNumbers:
    values: np.ndarray
    energy: float

    @property
    def diag(self) -> np.ndarray:
        return np.diag(self.values)

    @property
    def open_mask(self) -> np.ndarray:
        # open strictly above threshold; k == 0 at threshold counts as closed
        return (self.values.imag == 0) & (self.values.real > 0)

    def __len__(self):
        return len(self.values)


class SolutionSample(NamedTuple):
    """Matrix solution value and r-derivative at a single radius."""

    value: np.ndarray
    derivative: np.ndarray


@dataclass(frozen=True)
class SMatrixPoint:
    energy: float
    s: np.ndarray
    open_mask: np.ndarray

    @property
    def n_open(self) -> int:
        return int(np.count_nonzero(self.open_mask))


class Eigenphases(NamedTuple):
    delta1: float
    delta2: float
    epsilon: float


def channel_wavenumbers(energy: float, channels: ChannelSet) -> WaveNumbers:
    """Wave numbers on the physical sheet, Im k >= 0."""
    de = float(energy) - channels.delta
    k = np.where(de >= 0, np.sqrt(np.abs(de)) + 0j, 1j * np.sqrt(np.abs(de)))
    return WaveNumbers(k.astype(complex), float(energy))


def wronskian(a: SolutionSample, b: SolutionSample) -> np.ndarray:
    """``W[a, b] = a^T b' - (a')^T b``."""
    av, ad = np.atleast_2d(a.value), np.atleast_2d(a.derivative)
    bv, bd = np.atleast_2d(b.value), np.atleast_2d(b.derivative)
    if av.shape != ad.shape or bv.shape != bd.shape or av.shape[0] != bv.shape[0]:
        raise ValueError(
            f"Wronskian dimension mismatch: {av.shape}/{ad.shape} vs {bv.shape}/{bd.shape}"
        )
    return av.T @ bd - ad.T @ bv


def _sqrt_principal(k: np.ndarray) -> np.ndarray:
    return np.sqrt(np.asarray(k, dtype=complex))


def check_singular_jost(f_plus: np.ndarray, tol: float = SINGULAR_JOST_TOL):
    n = f_plus.shape[0]
    scale = np.linalg.norm(f_plus, 2) ** n
    det = np.linalg.det(f_plus)
    if abs(det) < tol * scale:
        cond = np.linalg.cond(f_plus)
        raise SingularJost(
            f"Jost matrix is singular (|det F| = {abs(det):.3e}, cond = {cond:.3e})",
            condition=cond,
        )


def s_matrix_from_jost(
    f_plus: np.ndarray, f_minus: np.ndarray, k: WaveNumbers
) -> SMatrixPoint:
    """``S = k^{-1/2} F(-k) F(k)^{-1} k^{1/2}`` restricted to open channels."""
    f_plus = np.asarray(f_plus, dtype=complex)
    f_minus = np.asarray(f_minus, dtype=complex)
    check_singular_jost(f_plus)
    mask = k.open_mask
    # the open block only involves the open-channel k^{+-1/2} factors
    ratio = np.linalg.solve(f_plus.T, f_minus.T).T
    idx = np.flatnonzero(mask)
    sq = _sqrt_principal(k.values[idx])
    s = ratio[np.ix_(idx, idx)] * (sq[None, :] / sq[:, None])
    return SMatrixPoint(k.energy, s, mask)


def unitarity_defect(s: np.ndarray) -> float:
    if s.size == 0:
        return 0.0
    return float(np.max(np.abs(s @ s.conj().T - np.eye(s.shape[0]))))


def symmetry_defect(s: np.ndarray) -> float:
    if s.size == 0:
        return 0.0
    return float(np.max(np.abs(s - s.T)))


def _rotation(eps: float) -> np.ndarray:
    c, s = np.cos(eps), np.sin(eps)
    return np.array([[c, -s], [s, c]])


def eigenphases_2ch(point: SMatrixPoint | np.ndarray, tol: float = DEFAULT_TOL) -> Eigenphases:
    """Blatt-Biedenharn decomposition ``S = R(eps)^T diag(e^{2i delta}) R(eps)``.

    ``R(eps)`` is the counterclockwise rotation ``[[cos, -sin], [sin, cos]]``.
    The mixing angle is returned in (-pi/4, pi/4], which labels ``delta1``
    with the eigenvector closer to the first open channel.
    """
    s = point.s if isinstance(point, SMatrixPoint) else np.asarray(point, dtype=complex)
    if s.shape != (2, 2):
        raise ValueError(f"expected a 2x2 S-matrix, got shape {s.shape}")
    if (d := unitarity_defect(s)) > tol:
        raise NotUnitary(f"unitarity defect {d:.3e} exceeds {tol:.1e}")
    if (d := symmetry_defect(s)) > tol:
        raise NotSymmetric(f"symmetry defect {d:.3e} exceeds {tol:.1e}")
    s = 0.5 * (s + s.T)
    # S11 - S22 = cos(2 eps) z and 2 S12 = -sin(2 eps) z share the complex factor z
    a = s[0, 0] - s[1, 1]
    b = -2.0 * s[0, 1]
    if max(abs(a), abs(b)) < 1e-14:
        eps = 0.0
    else:
        rot = np.exp(-1j * (np.angle(a) if abs(a) >= abs(b) else np.angle(b)))
        eps = 0.5 * np.arctan2((b * rot).real, (a * rot).real)
        if eps > np.pi / 4:
            eps -= np.pi / 2
        elif eps <= -np.pi / 4:
            eps += np.pi / 2
    r = _rotation(eps)
    d = r @ s @ r.T
    return Eigenphases(
        float(np.angle(d[0, 0]) / 2), float(np.angle(d[1, 1]) / 2), float(eps)
    )


def recompose_2ch(delta1: float, delta2: float, epsilon: float) -> np.ndarray:
    r = _rotation(epsilon)
    return r.T @ np.diag(np.exp(2j * np.array([delta1, delta2]))) @ r


def swap_labels(delta1: float, delta2: float, epsilon: float) -> Eigenphases:
    """The equivalent decomposition with the eigenphase labels exchanged."""
    return Eigenphases(delta2, delta1, epsilon + np.pi / 2)


def _nearest(value: float, target: float, period: float = np.pi) -> float:
    return value + period * np.round((target - value) / period)


def _centered(value: float, period: float = np.pi) -> float:
    return value - period * np.round(value / period)


def _track(prev: list, point: SMatrixPoint) -> tuple[list, float]:
    """Representative of ``point`` closest to ``prev``; returns (triple, largest jump)."""
    if point.open_mask.shape != (2,):
        raise ValueError("eigenphase tracking expects 2-channel S-matrix points")
    if point.n_open == 0:
        return [None, None, None], 0.0
    if point.n_open == 1:
        ch = int(np.flatnonzero(point.open_mask)[0])
        ph = float(np.angle(point.s[0, 0]) / 2)
        jump = 0.0
        if prev[ch] is not None:
            ph = _nearest(ph, prev[ch])
            jump = abs(ph - prev[ch])
        out = [None, None, None]
        out[ch] = ph
        return out, jump
    d1, d2, eps = eigenphases_2ch(point)
    best, best_cost, best_jump = None, np.inf, 0.0
    for cand in ((d1, d2, eps), swap_labels(d1, d2, eps)):
        adj, cost, jump = [], 0.0, 0.0
        for j, v in enumerate(cand):
            if prev[j] is not None:
                v = _nearest(v, prev[j])
                cost += abs(v - prev[j])
                jump = max(jump, abs(v - prev[j]))
            elif j == 2:
                v = _centered(v)
                cost += abs(v)
            adj.append(v)
        if cost < best_cost - 1e-15:
            best, best_cost, best_jump = adj, cost, jump
    return best, best_jump


def unwrap_eigenphases(points: Sequence[SMatrixPoint]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Continuous (delta1, delta2, epsilon) curves over a fixed grid of 2-channel points.

    Entries are NaN where undefined: a closed channel's phase, and the mixing
    angle whenever fewer than two channels are open. Each step picks the
    representative (shifts by pi, or the label swap with epsilon + pi/2)
    closest to the previous point. Use :func:`eigenphase_curves` when the
    S-matrix can be evaluated between grid points.
    """
    out = np.full((len(points), 3), np.nan)
    prev = [None, None, None]
    for i, p in enumerate(points):
        cur, _ = _track(prev, p)
        if p.n_open:
            out[i] = [np.nan if v is None else v for v in cur]
            prev = [c if c is not None else (q if p.n_open < 2 else None) for c, q in zip(cur, prev)]
    return out[:, 0], out[:, 1], out[:, 2]


def eigenphase_curves(
    s_of_energy: Callable[[float], SMatrixPoint],
    energies: Sequence[float],
    thresholds: Sequence[float],
    max_jump: float = 0.05,
    min_step: float = 1e-12,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Continuous eigenphase and mixing curves on ``energies`` for a 2-channel system.

    Tracking starts just above each threshold (where the new channel's
    eigenphase and the mixing angle vanish) and bisects any interval on which
    a component would move by more than ``max_jump``, so fast threshold cusps
    and narrow resonances keep their labels.
    """
    energies = np.asarray(energies, dtype=float)
    if np.any(np.diff(energies) <= 0):
        raise ValueError("energies must be strictly increasing")
    e_last = energies[-1]
    starts = [t + 1e-10 * max(1.0, abs(t)) for t in thresholds]
    track = sorted(set(energies.tolist()) | {e for e in starts if e <= e_last})
    requested = set(energies.tolist())
    result = {}
    prev = [None, None, None]
    e_prev = None
    for e in track:
        pending = [e]
        while pending:
            target = pending[-1]
            point = s_of_energy(target)
            cur, jump = _track(prev, point)
            if (
                e_prev is not None
                and jump > max_jump
                and target - e_prev > min_step * max(1.0, abs(target))
            ):
                pending.append(0.5 * (e_prev + target))
                continue
            pending.pop()
            if point.n_open:
                prev = [c if c is not None else (q if point.n_open < 2 else None) for c, q in zip(cur, prev)]
            e_prev = target
            if target in requested:
                result[target] = [np.nan if v is None else v for v in cur]
    out = np.array([result[e] for e in energies])
    return out[:, 0], out[:, 1], out[:, 2]


def eigenphases(s: np.ndarray) -> np.ndarray:
    """Eigenphases of a unitary S-matrix of any order, sorted ascending in (-pi/2, pi/2]."""
    if s.size == 0:
        return np.zeros(0)
    phases = np.angle(np.linalg.eigvals(s)) / 2
    return np.sort(phases)


def unwrap_eigenphases_general(points: Sequence[SMatrixPoint]) -> np.ndarray:
    """Continuous eigenphase branches for N channels, matched by nearest permutation.

    Branch ``j`` of the result is NaN until ``j + 1`` channels are open.
    """
    n_ch = points[0].open_mask.shape[0] if points else 0
    out = np.full((len(points), n_ch), np.nan)
    prev: list[float] = []
    for i, p in enumerate(points):
        ph = list(eigenphases(p.s))
        if not ph:
            continue
        if not prev:
            chosen = ph
        else:
            m = min(len(prev), len(ph))
            best, best_cost = None, np.inf
            for perm in itertools.permutations(range(len(ph)), m):
                vals = [_nearest(ph[q], prev[j]) for j, q in enumerate(perm)]
                cost = sum(abs(v - prev[j]) for j, v in enumerate(vals))
                if cost < best_cost:
                    best, best_cost = (perm, vals), cost
            perm, vals = best
            rest = [ph[q] for q in range(len(ph)) if q not in perm]
            chosen = vals + rest
        out[i, : len(chosen)] = chosen
        prev = chosen
    return out


def jost_symmetry_check(
    jost: Callable[[np.ndarray], np.ndarray], energy: float, channels: ChannelSet
) -> float:
    """Max-norm of ``F(k) - conj(F(-conj(k)))``.

    Below all thresholds the imaginary part of ``F`` is folded into the defect,
    since the Jost matrix is real there.
    """
    k = channel_wavenumbers(energy, channels).values
    f = np.asarray(jost(k))
    defect = float(np.max(np.abs(f - np.conj(jost(-np.conj(k))))))
    if energy < channels.delta.min():
        defect = max(defect, float(np.max(np.abs(f.imag))))
    return defect
