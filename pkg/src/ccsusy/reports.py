"""Tables and verification reports built from a :class:`RunConfig`."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import RunConfig, default_bound_range
from .errors import ConfigError
from .oracle import IntegrationConfig, bound_state_scan, compare_with_oracle, convergence_order
from .scattering import (
    eigenphase_curves,
    jost_symmetry_check,
    symmetry_defect,
    unitarity_defect,
    unwrap_eigenphases_general,
)
from .susy import TransformResult, transform

UNITARITY_TOL = 1e-10
SYMMETRY_TOL = 1e-10
TAIL_RATIO_TOL = 1e-6
MIN_ORDER = 3.9


@dataclass(frozen=True)
class Table:
    columns: tuple[str, ...]
    rows: list[list[float]]


def build_transform(cfg: RunConfig) -> TransformResult:
    """Transform with the regularity prescan covering at least the requested radii."""
    result = transform(cfg.spec, cfg.parametrization)
    if cfg.r_grid.stop > result.r_max:
        result = transform(cfg.spec, cfg.parametrization, r_max=cfg.r_grid.stop)
    return result


def _pair_label(i: int, j: int, n: int) -> str:
    return f"V{i + 1}{j + 1}" if n < 10 else f"V{i + 1}_{j + 1}"


def potential_table(cfg: RunConfig, result: TransformResult) -> Table:
    n = result.n
    radii = cfg.r_grid.points()
    v = result.potential(radii)
    iu = np.triu_indices(n)
    cols = ("r",) + tuple(_pair_label(i, j, n) for i, j in zip(*iu))
    rows = [[float(r)] + v[m][iu].tolist() for m, r in enumerate(radii)]
    return Table(cols, rows)


def smatrix_table(cfg: RunConfig, result: TransformResult) -> Table:
    energies = cfg.e_grid.points()
    n = result.n
    if n == 2:
        d1, d2, eps = eigenphase_curves(result.s_matrix, energies, cfg.channels.thresholds)
        phases = np.column_stack([d1, d2, eps])
        cols = ("E", "delta1", "delta2", "epsilon", "open_channels")
    else:
        phases = unwrap_eigenphases_general([result.s_matrix(float(e)) for e in energies])
        cols = ("E",) + tuple(f"delta{i + 1}" for i in range(n)) + ("open_channels",)
    n_open = [int(np.count_nonzero(float(e) > cfg.channels.delta)) for e in energies]
    rows = [[float(e)] + phases[m].tolist() + [n_open[m]] for m, e in enumerate(energies)]
    return Table(cols, rows)


def bound_states(cfg: RunConfig, result: TransformResult) -> list[float]:
    lo, hi = cfg.bound_range or default_bound_range(cfg.spec)
    return bound_state_scan(result.jost, cfg.channels, lo, hi, cfg.bound_points)


def boundstate_table(cfg: RunConfig, result: TransformResult) -> Table:
    return Table(("index", "E"), [[i + 1, e] for i, e in enumerate(bound_states(cfg, result))])


def oracle_energies(cfg: RunConfig) -> np.ndarray:
    """Grid energies strictly above all thresholds, thinned to at most ``max_energies``."""
    e = cfg.e_grid.points()
    e = e[e > cfg.channels.delta.max()]
    if e.size > cfg.oracle.max_energies:
        idx = np.unique(np.round(np.linspace(0, e.size - 1, cfg.oracle.max_energies)).astype(int))
        e = e[idx]
    return e


def tail_check(result: TransformResult, r: float) -> dict:
    u_inf = result.u_at_infinity
    norm = lambda m: float(np.abs(m).sum(axis=1).max())
    dev = norm(result.superpotential(r) - u_inf)
    ref = norm(result.u_origin - u_inf)
    passed = dev <= TAIL_RATIO_TOL * ref or dev < 1e-14
    lo = 0.5 * r
    rate = result.tail_decay_rate(lo, r) if dev > 1e-14 else None
    return {"radius": r, "deviation": dev, "reference": ref, "ratio_tolerance": TAIL_RATIO_TOL,
            "fitted_log_slope": rate, "passed": bool(passed)}


def verify_report(cfg: RunConfig, result: TransformResult) -> dict:
    energies = oracle_energies(cfg)
    if energies.size == 0:
        raise ConfigError("no grid energies above all thresholds for the oracle", "e_grid")
    e_top = float(energies.max())
    icfg = IntegrationConfig.for_transform(result, e_top, method=cfg.oracle.method,
                                           refine=cfg.oracle.refine)
    cmp = compare_with_oracle(result, energies, icfg)
    mid = float(energies[len(energies) // 2])
    base = IntegrationConfig.for_transform(result, e_top, method=cfg.oracle.method)
    order = convergence_order(result.potential, mid, cfg.channels, base)

    unit = sym = jsym = 0.0
    for e in energies:
        s = result.s_matrix(float(e)).s
        unit = max(unit, unitarity_defect(s))
        sym = max(sym, symmetry_defect(s))
        jsym = max(jsym, jost_symmetry_check(result.jost_k, float(e), cfg.channels))
    u = result.superpotential(cfg.r_grid.points())
    u_sym = float(np.abs(u - np.swapaxes(u, 1, 2)).max())
    tail = tail_check(result, cfg.r_grid.stop)
    bound = bound_states(cfg, result)

    checks = {
        "jost_deviation": cmp.max_jost_deviation < cfg.oracle.tolerance,
        "s_deviation": cmp.max_s_deviation < cfg.oracle.tolerance,
        "convergence_order": order >= MIN_ORDER,
        "unitarity": unit < UNITARITY_TOL,
        "s_symmetry": sym < SYMMETRY_TOL,
        "superpotential_symmetry": u_sym < SYMMETRY_TOL,
        "tail": tail["passed"],
    }
    return {
        "source": cfg.source,
        "rank": result.rank,
        "factorization_energy": result.spec.energy,
        "kappa": result.spec.kappa.tolist(),
        "u_at_infinity": np.diag(result.u_at_infinity).tolist(),
        "oracle": {
            "method": icfg.method,
            "step": icfg.step,
            "r_max": icfg.r_max,
            "n_energies": int(energies.size),
            "energy_range": [float(energies.min()), e_top],
            "max_jost_deviation": cmp.max_jost_deviation,
            "max_s_deviation": cmp.max_s_deviation,
            "tolerance": cfg.oracle.tolerance,
            "convergence_order": order,
            "convergence_energy": mid,
        },
        "defects": {
            "unitarity": unit,
            "s_symmetry": sym,
            "jost_reflection": jsym,
            "superpotential_symmetry": u_sym,
        },
        "tail": tail,
        "bound_states": bound,
        "checks": checks,
        "passed": all(checks.values()),
    }


def finite_or_none(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x
