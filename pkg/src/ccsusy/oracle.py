"""Numerical reference: integrate the coupled radial equation directly.

Nothing here uses the closed-form Jost matrices. The regular solution
(``phi(0) = 0``, ``phi'(0) = I``) is integrated with a fixed step out to a
radius where the potential has died off, then matched to free waves
``e^{+-ikr}`` to read off ``F(k)`` and ``F(-k)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import bisect

from . import kernels
from .errors import IllConditionedMatch, StepUnstable
from .scattering import ChannelSet, SMatrixPoint, channel_wavenumbers, s_matrix_from_jost

METHODS = ("rk4", "numerov")


@dataclass(frozen=True)
class IntegrationConfig:
    r_max: float
    step: float
    method: str = "rk4"
    match_tolerance: float = 1e-10

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError("step must be positive")
        if not self.r_max > 0:
            raise ValueError("r_max must be positive")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")

    @classmethod
    def for_transform(cls, result, energy_max: float, step=None, r_max=None, method="rk4",
                      match_tolerance=1e-10, refine: float = 1.0):
        """Defaults for a transformed potential.

        The step is ``min(1/(20 max kappa), 1/(20 k_max)) / refine`` and ``r_max`` is the
        smallest ``r >= 10/kappa_min`` (in steps of 0.5) with ``||V(r)|| < match_tolerance``.
        """
        kap = result.spec.kappa
        if step is None:
            k_max = math.sqrt(max(energy_max - result.spec.channels.delta.min(), 1e-12))
            step = min(1.0 / (20.0 * kap.max()), 1.0 / (20.0 * k_max)) / refine
        if r_max is None:
            r_max = 10.0 / kap.min()
            while np.abs(result.potential(r_max)).max() >= match_tolerance:
                r_max += 0.5
                if r_max > 1e3:
                    raise ValueError("potential does not decay below match_tolerance")
        return cls(float(r_max), float(step), method, match_tolerance)


@dataclass(frozen=True)
class RegularSolutionTrace:
    """Regular solution and derivative sampled on the integration grid."""

    energy: float
    r: np.ndarray
    phi: np.ndarray
    dphi: np.ndarray

    @property
    def r_end(self) -> float:
        return float(self.r[-1])

    def at(self, index: int = -1):
        return self.phi[index], self.dphi[index]


def _g_matrix(potential, radii, energy, channels):
    v = np.asarray(potential(radii), dtype=float)
    return np.ascontiguousarray(v - np.diag(energy - channels.delta)[None])


def integrate_regular(
    potential: Callable[[np.ndarray], np.ndarray],
    energy: float,
    channels: ChannelSet,
    cfg: IntegrationConfig,
    backend=None,
) -> RegularSolutionTrace:
    """Integrate ``phi'' = (V - k^2) phi`` from ``phi(0) = 0, phi'(0) = I`` to ``cfg.r_max``.

    ``potential`` maps an array of radii to a stack of ``N x N`` matrices.
    ``backend`` optionally overrides the kernel pair ``(rk4, numerov)``.
    """
    rk4, numerov = backend or (kernels.rk4_matrix, kernels.numerov_matrix)
    n = channels.n_channels
    steps = max(2, math.ceil(cfg.r_max / cfg.step))
    h = cfg.r_max / steps
    zero, eye = np.zeros((n, n)), np.eye(n)
    try:
        if cfg.method == "rk4":
            r_half = np.linspace(0.0, cfg.r_max, 2 * steps + 1)
            g = _g_matrix(potential, r_half, energy, channels)
            phi, dphi = rk4(g, h, zero, eye)
            r = r_half[::2]
        else:
            # one extra point beyond r_max for the derivative at r_max
            r = np.linspace(0.0, cfg.r_max + h, steps + 2)
            g = _g_matrix(potential, r, energy, channels)
            g_start = _g_matrix(potential, np.array([0.0, 0.5 * h, h]), energy, channels)
            y1 = rk4(g_start, h, zero, eye)[0][1]
            ainv = np.ascontiguousarray(np.linalg.inv(eye[None] - h * h / 12.0 * g))
            y = numerov(g, ainv, h, zero, y1)
            gy = g @ y
            c = h * h / 6.0
            dphi = np.empty_like(y)
            dphi[0] = eye
            dphi[1:-1] = ((y[2:] - c * gy[2:]) - (y[:-2] - c * gy[:-2])) / (2 * h)
            phi, dphi, r = y[:-1], dphi[:-1], r[:-1]
    except OverflowError as exc:
        raise StepUnstable(f"{exc}; reduce the step or r_max") from exc
    return RegularSolutionTrace(float(energy), r, phi, dphi)


def match_jost(trace: RegularSolutionTrace, channels: ChannelSet, max_condition: float = 1e8):
    """``(F(k), F(-k))`` from free-wave matching of the regular solution at its last radius.

    With ``f(+-k, r) = e^{+-ikr}`` beyond the potential, the matching system
    solves to ``F(+-k) = e^{+-ikR} [phi'(R) -+ ik phi(R)]`` row by row.
    """
    k = channel_wavenumbers(trace.energy, channels).values
    big_r = trace.r_end
    cond = float(np.exp(2.0 * np.abs(k.imag).max() * big_r))
    if cond > max_condition:
        raise IllConditionedMatch(
            f"closed channels at r_max = {big_r:g} give matching condition {cond:.2e}; "
            "lower r_max or use energies above all thresholds",
            condition=cond,
        )
    phi, dphi = trace.at(-1)
    ik = 1j * k[:, None]
    f_plus = np.exp(1j * k * big_r)[:, None] * (dphi - ik * phi)
    f_minus = np.exp(-1j * k * big_r)[:, None] * (dphi + ik * phi)
    return f_plus, f_minus


def extract_jost(trace: RegularSolutionTrace, channels: ChannelSet, max_condition: float = 1e8):
    return match_jost(trace, channels, max_condition)[0]


def oracle_s_matrix(potential, energy: float, channels: ChannelSet, cfg: IntegrationConfig) -> SMatrixPoint:
    trace = integrate_regular(potential, energy, channels, cfg)
    f_plus, f_minus = match_jost(trace, channels)
    return s_matrix_from_jost(f_plus, f_minus, channel_wavenumbers(energy, channels))


def convergence_order(potential, energy: float, channels: ChannelSet, cfg: IntegrationConfig) -> float:
    """Observed order of ``F(k)`` from runs at ``h``, ``h/2`` and ``h/4``."""
    jost = []
    for div in (1, 2, 4):
        c = IntegrationConfig(cfg.r_max, cfg.step / div, cfg.method, cfg.match_tolerance)
        jost.append(extract_jost(integrate_regular(potential, energy, channels, c), channels))
    d1 = np.abs(jost[0] - jost[1]).max()
    d2 = np.abs(jost[1] - jost[2]).max()
    return float(np.log2(d1 / d2))


@dataclass(frozen=True)
class OracleComparison:
    max_jost_deviation: float
    max_s_deviation: float
    energies: tuple


def compare_with_oracle(result, energies, cfg: IntegrationConfig) -> OracleComparison:
    """Max-norm deviations of the closed-form ``F`` and ``S`` from the integrated ones."""
    channels = result.spec.channels
    dev_f = dev_s = 0.0
    for e in energies:
        trace = integrate_regular(result.potential, float(e), channels, cfg)
        f_plus, f_minus = match_jost(trace, channels)
        s_num = s_matrix_from_jost(f_plus, f_minus, channel_wavenumbers(float(e), channels)).s
        dev_f = max(dev_f, float(np.abs(f_plus - result.jost(float(e))).max()))
        dev_s = max(dev_s, float(np.abs(s_num - result.s_matrix(float(e)).s).max()))
    return OracleComparison(dev_f, dev_s, tuple(float(e) for e in energies))


def bound_state_scan(
    jost: Callable[[float], np.ndarray],
    channels: ChannelSet,
    e_min: float,
    e_max: float,
    n_grid: int = 400,
    xtol: float = 1e-12,
) -> list[float]:
    """Energies below all thresholds where the real ``det F(E)`` changes sign.

    Sign changes caused by poles of ``det F`` are discarded: a true zero has a
    smaller ``|det F|`` after bisection than at the bracketing grid points.
    """
    if not e_max < channels.delta.min():
        raise ValueError("bound-state scan requires e_max below all thresholds")

    def det(e):
        try:
            return float(np.linalg.det(jost(e)).real)
        except np.linalg.LinAlgError:
            return float(np.linalg.det(jost(e + 1e-9 * max(1.0, abs(e)))).real)

    grid = np.linspace(e_min, e_max, n_grid)
    values = np.array([det(e) for e in grid])
    roots = []
    for i in np.flatnonzero(np.sign(values[:-1]) * np.sign(values[1:]) <= 0):
        a, b = grid[i], grid[i + 1]
        if values[i] == 0.0:
            root = a
        elif values[i + 1] == 0.0:
            continue
        else:
            root = bisect(det, a, b, xtol=xtol)
        if abs(det(root)) <= max(abs(values[i]), abs(values[i + 1])):
            roots.append(float(root))
    return roots
