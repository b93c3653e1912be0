"""Run configuration: a single JSON document, validated into :class:`RunConfig`.

Channel indices in the JSON document are 1-based. Example::

    {
      "channels": {"thresholds": [10, 0]},
      "factorization": {"kappa": 3, "channel": 2},
      "parametrization": {"mode": "u0", "u0": [[-2, 0.6], [0.6, -2]]},
      "r_grid": {"r_max": 8, "n_points": 161},
      "e_grid": {"e_min": 0, "e_max": 20, "n_points": 401}
    }

``factorization`` takes ``energy``, a full ``kappa`` list, or a single
``kappa`` with its ``channel``. ``parametrization.mode`` is ``u0``,
``canonical`` (``rank``, ``order``, ``q0``, ``x0``) or ``preset`` (``name``).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .errors import ConfigError
from .models import PRESET_NAMES, figure_preset
from .oracle import METHODS
from .scattering import ChannelSet
from .susy import CanonicalParametrization, FactorizationSpec, U0Parametrization

FORMATS = ("csv", "json")
TOP_LEVEL = {"channels", "factorization", "parametrization", "r_grid", "e_grid", "oracle",
             "bound_states", "outputs", "source"}


@dataclass(frozen=True)
class Grid:
    start: float
    stop: float
    n_points: int

    def points(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.n_points)


@dataclass(frozen=True)
class OracleSettings:
    method: str = "rk4"
    refine: float = 4.0
    tolerance: float = 1e-6
    max_energies: int = 50


@dataclass(frozen=True)
class RunConfig:
    channels: ChannelSet
    factorization: dict
    spec: FactorizationSpec
    parametrization: U0Parametrization | CanonicalParametrization
    r_grid: Grid
    e_grid: Grid
    oracle: OracleSettings = OracleSettings()
    bound_range: tuple[float, float] | None = None
    bound_points: int = 400
    directory: str = "."
    formats: tuple[str, ...] = ("csv",)
    source: dict = field(default_factory=dict)

    def effective(self) -> dict:
        """Fully expanded JSON-ready config; re-running it reproduces the same outputs.

        The output directory is left out so that the echo does not depend on where it is written.
        """
        p = self.parametrization
        if isinstance(p, U0Parametrization):
            param = {"mode": "u0", "u0": p.u0.tolist()}
        else:
            param = {
                "mode": "canonical",
                "rank": p.rank,
                "order": [o + 1 for o in p.order],
                "q0": p.q0.tolist(),
                "x0": p.x0.tolist(),
            }
        out = {
            "channels": {"thresholds": list(self.channels.thresholds)},
            "factorization": dict(self.factorization),
            "parametrization": param,
            "r_grid": {"r_min": self.r_grid.start, "r_max": self.r_grid.stop,
                       "n_points": self.r_grid.n_points},
            "e_grid": {"e_min": self.e_grid.start, "e_max": self.e_grid.stop,
                       "n_points": self.e_grid.n_points},
            "oracle": {"method": self.oracle.method, "refine": self.oracle.refine,
                       "tolerance": self.oracle.tolerance,
                       "max_energies": self.oracle.max_energies},
            "bound_states": {"n_points": self.bound_points},
            "outputs": {"formats": list(self.formats)},
        }
        if self.bound_range is not None:
            out["bound_states"].update(e_min=self.bound_range[0], e_max=self.bound_range[1])
        if self.source:
            out["source"] = dict(self.source)
        return out

    def with_outputs(self, directory=None, formats=None) -> "RunConfig":
        from dataclasses import replace

        return replace(
            self,
            directory=self.directory if directory is None else str(directory),
            formats=self.formats if formats is None else tuple(formats),
        )


# -- field helpers -----------------------------------------------------------------


def _section(doc: dict, key: str, required=True) -> dict:
    if key not in doc:
        if required:
            raise ConfigError("missing section", key)
        return {}
    value = doc[key]
    if not isinstance(value, dict):
        raise ConfigError("expected an object", key)
    return value


def _real(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"expected a number, got {value!r}", where)
    if not math.isfinite(value):
        raise ConfigError("must be finite", where)
    return float(value)


def _integer(value, where: str, minimum: int) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"expected an integer, got {value!r}", where)
    if value < minimum:
        raise ConfigError(f"must be >= {minimum}", where)
    return value


def _matrix(value, where: str, shape=None) -> np.ndarray:
    if not isinstance(value, list) or not all(isinstance(row, list) for row in value):
        raise ConfigError("expected a list of rows", where)
    rows = [[_real(x, f"{where}[{i}][{j}]") for j, x in enumerate(row)] for i, row in enumerate(value)]
    if rows and len({len(r) for r in rows}) != 1:
        raise ConfigError("rows have different lengths", where)
    m = np.array(rows, dtype=float).reshape(len(rows), len(rows[0]) if rows else 0)
    if shape is not None and m.shape != shape and m.size + int(np.prod(shape)) > 0:
        raise ConfigError(f"expected shape {shape}, got {m.shape}", where)
    return m.reshape(shape) if shape is not None else m


def _unknown(section: dict, allowed: set, where: str):
    extra = sorted(set(section) - allowed)
    if extra:
        raise ConfigError(f"unknown key(s) {', '.join(extra)}", where)


def _grid(doc: dict, key: str, lo_key: str, hi_key: str) -> Grid:
    sec = _section(doc, key)
    _unknown(sec, {lo_key, hi_key, "n_points"}, key)
    for name in (hi_key, "n_points"):
        if name not in sec:
            raise ConfigError("missing", f"{key}.{name}")
    lo = _real(sec[lo_key], f"{key}.{lo_key}") if lo_key in sec else 0.0
    hi = _real(sec[hi_key], f"{key}.{hi_key}")
    n = _integer(sec["n_points"], f"{key}.n_points", 2)
    if not hi > lo:
        raise ConfigError(f"grid must be strictly increasing ({lo_key} < {hi_key})", key)
    return Grid(lo, hi, n)


def _factorization(sec: dict, channels: ChannelSet) -> tuple[FactorizationSpec, dict]:
    _unknown(sec, {"energy", "kappa", "channel"}, "factorization")
    n = channels.n_channels
    try:
        if "energy" in sec:
            if "kappa" in sec or "channel" in sec:
                raise ConfigError("give either energy or kappa, not both", "factorization")
            e = _real(sec["energy"], "factorization.energy")
            return FactorizationSpec(channels, e), {"energy": e}
        if "kappa" not in sec:
            raise ConfigError("needs energy or kappa", "factorization")
        if "channel" in sec:
            ch = _integer(sec["channel"], "factorization.channel", 1)
            if ch > n:
                raise ConfigError(f"channel must be in 1..{n}", "factorization.channel")
            kap = _real(sec["kappa"], "factorization.kappa")
            if not kap > 0:
                raise ConfigError("must be positive", "factorization.kappa")
            return FactorizationSpec.from_kappa(channels, kap, channel=ch - 1), {"kappa": kap, "channel": ch}
        raw = sec["kappa"]
        if not isinstance(raw, list):
            raise ConfigError("a single kappa needs a channel index", "factorization")
        kap = [_real(x, f"factorization.kappa[{i}]") for i, x in enumerate(raw)]
        return FactorizationSpec.from_kappa(channels, kap), {"kappa": kap}
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc), "factorization") from exc


def _parametrization(sec: dict, n: int):
    mode = sec.get("mode")
    try:
        if mode == "u0":
            _unknown(sec, {"mode", "u0"}, "parametrization")
            if "u0" not in sec:
                raise ConfigError("missing", "parametrization.u0")
            return U0Parametrization(_matrix(sec["u0"], "parametrization.u0", (n, n)))
        if mode == "canonical":
            _unknown(sec, {"mode", "rank", "order", "q0", "x0"}, "parametrization")
            rank = _integer(sec.get("rank"), "parametrization.rank", 0)
            if rank > n:
                raise ConfigError(f"must be <= {n}", "parametrization.rank")
            order = sec.get("order", list(range(1, n + 1)))
            if not isinstance(order, list) or sorted(order) != list(range(1, n + 1)):
                raise ConfigError(f"must be a permutation of 1..{n}", "parametrization.order")
            q0 = _matrix(sec.get("q0", []), "parametrization.q0", (n - rank, rank))
            x0 = _matrix(sec.get("x0", []), "parametrization.x0", (rank, rank))
            return CanonicalParametrization(rank, tuple(o - 1 for o in order), q0, x0)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc), "parametrization") from exc
    raise ConfigError(f"mode must be 'u0', 'canonical' or 'preset', got {mode!r}", "parametrization.mode")


def _expand_preset(doc: dict) -> dict:
    sec = doc["parametrization"]
    _unknown(sec, {"mode", "name"}, "parametrization")
    name = sec.get("name")
    if name not in PRESET_NAMES:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESET_NAMES)}",
                          "parametrization.name")
    for key in ("channels", "factorization"):
        if key in doc:
            raise ConfigError("fixed by the preset; remove it or use mode 'u0'", key)
    p = figure_preset(name)
    expanded = dict(doc)
    expanded["channels"] = {"thresholds": list(p.channels.thresholds)}
    expanded["factorization"] = {"kappa": p.kappa2, "channel": 2}
    expanded["parametrization"] = {"mode": "u0", "u0": p.u0.tolist()}
    expanded.setdefault("r_grid", {"r_min": p.r_range[0], "r_max": p.r_range[1], "n_points": 161})
    expanded.setdefault("e_grid", {"e_min": p.e_range[0], "e_max": p.e_range[1], "n_points": 401})
    expanded["source"] = {"preset": name}
    return expanded


def preset_document(name: str) -> dict:
    return _expand_preset({"parametrization": {"mode": "preset", "name": name}})


def parse_config(doc: Any) -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError("top level must be a JSON object")
    _unknown(doc, TOP_LEVEL, "config")
    param_sec = _section(doc, "parametrization")
    if param_sec.get("mode") == "preset":
        doc = _expand_preset(doc)
        param_sec = doc["parametrization"]

    ch_sec = _section(doc, "channels")
    _unknown(ch_sec, {"thresholds"}, "channels")
    raw = ch_sec.get("thresholds")
    if not isinstance(raw, list) or not raw:
        raise ConfigError("expected a non-empty list", "channels.thresholds")
    thresholds = [_real(x, f"channels.thresholds[{i}]") for i, x in enumerate(raw)]
    if len(set(thresholds)) != len(thresholds):
        raise ConfigError("thresholds must be distinct", "channels.thresholds")
    channels = ChannelSet(tuple(thresholds))

    spec, fact = _factorization(_section(doc, "factorization"), channels)
    param = _parametrization(param_sec, channels.n_channels)
    r_grid = _grid(doc, "r_grid", "r_min", "r_max")
    if r_grid.start < 0:
        raise ConfigError("must be >= 0", "r_grid.r_min")
    e_grid = _grid(doc, "e_grid", "e_min", "e_max")

    o = _section(doc, "oracle", required=False)
    _unknown(o, {"method", "refine", "tolerance", "max_energies"}, "oracle")
    method = o.get("method", "rk4")
    if method not in METHODS:
        raise ConfigError(f"must be one of {', '.join(METHODS)}", "oracle.method")
    refine = _real(o.get("refine", 4.0), "oracle.refine")
    tol = _real(o.get("tolerance", 1e-6), "oracle.tolerance")
    if refine <= 0 or tol <= 0:
        raise ConfigError("refine and tolerance must be positive", "oracle")
    oracle = OracleSettings(method, refine, tol, _integer(o.get("max_energies", 50), "oracle.max_energies", 1))

    b = _section(doc, "bound_states", required=False)
    _unknown(b, {"e_min", "e_max", "n_points"}, "bound_states")
    bound_range = None
    if "e_min" in b or "e_max" in b:
        lo_default, hi_default = default_bound_range(spec)
        lo = _real(b.get("e_min", lo_default), "bound_states.e_min")
        hi = _real(b.get("e_max", hi_default), "bound_states.e_max")
        if not lo < hi < channels.delta.min():
            raise ConfigError("need e_min < e_max < lowest threshold", "bound_states")
        bound_range = (lo, hi)
    bound_points = _integer(b.get("n_points", 400), "bound_states.n_points", 2)

    out = _section(doc, "outputs", required=False)
    _unknown(out, {"directory", "formats"}, "outputs")
    directory = out.get("directory", ".")
    if not isinstance(directory, str):
        raise ConfigError("expected a string", "outputs.directory")
    formats = out.get("formats", ["csv"])
    if not isinstance(formats, list) or not formats or any(f not in FORMATS for f in formats):
        raise ConfigError(f"expected a list drawn from {FORMATS}", "outputs.formats")

    source = doc.get("source", {})
    if not isinstance(source, dict):
        raise ConfigError("expected an object", "source")
    return RunConfig(channels, fact, spec, param, r_grid, e_grid, oracle, bound_range, bound_points,
                     directory, tuple(formats), dict(source))


def default_bound_range(spec: FactorizationSpec) -> tuple[float, float]:
    """Scan window below the lowest threshold, twice as deep as the factorization energy."""
    top = float(spec.channels.delta.min())
    depth = top - spec.energy
    return top - 2.0 * depth, top - 1e-9 * max(1.0, abs(top))


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return parse_config(doc)
