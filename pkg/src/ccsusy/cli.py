"""Command-line entry point: ``ccsusy [--config PATH] [--out DIR] [--format csv|json] COMMAND``.

Exit status: 0 ok, 2 invalid input, 3 verification failure, 4 singular parametrization.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from . import reports
from .config import FORMATS, RunConfig, load_config, parse_config, preset_document
from .errors import (
    ConfigError,
    PreconditionViolated,
    RankDeficientPivot,
    RankDrop,
    ScatteringError,
    SingularD22,
    SingularJost,
    SingularSigma,
    SymmetryViolated,
)
from .models import PRESET_NAMES

EXIT_OK, EXIT_INVALID, EXIT_VERIFY, EXIT_SINGULAR = 0, 2, 3, 4
SINGULAR = (SingularSigma, SingularD22, RankDeficientPivot, RankDrop, SingularJost)
INVALID = (ConfigError, PreconditionViolated, SymmetryViolated, ValueError)


class CommandFailed(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


# -- serialization -----------------------------------------------------------------


def format_value(x) -> str:
    if isinstance(x, (bool, int)) and not isinstance(x, float):
        return str(int(x))
    x = float(x)
    return "" if math.isnan(x) else format(x, ".17g")


def table_csv(table: reports.Table) -> str:
    lines = [",".join(table.columns)]
    lines += [",".join(format_value(v) for v in row) for row in table.rows]
    return "\n".join(lines) + "\n"


def _clean(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def dump_json(obj) -> str:
    return json.dumps(_clean(obj), indent=2, allow_nan=False) + "\n"


def table_json(table: reports.Table, config: dict) -> str:
    return dump_json({"columns": list(table.columns), "rows": table.rows, "config": config})


def _write(path: Path, text: str, written: list):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    written.append(path)


def write_table(table, out_dir: Path, stem: str, formats, config: dict, written: list):
    for fmt in formats:
        text = table_csv(table) if fmt == "csv" else table_json(table, config)
        _write(out_dir / f"{stem}.{fmt}", text, written)


# -- commands ----------------------------------------------------------------------


def _table_command(builder, stem):
    def run(cfg: RunConfig, out_dir: Path, written: list):
        result = reports.build_transform(cfg)
        effective = cfg.effective()
        write_table(builder(cfg, result), out_dir, stem, cfg.formats, effective, written)
        _write(out_dir / f"{stem}_config.json", dump_json(effective), written)

    return run


def cmd_verify(cfg: RunConfig, out_dir: Path, written: list):
    result = reports.build_transform(cfg)
    report = reports.verify_report(cfg, result)
    report["config"] = cfg.effective()
    _write(out_dir / "verify.json", dump_json(report), written)
    if not report["passed"]:
        failed = ", ".join(k for k, ok in report["checks"].items() if not ok)
        raise CommandFailed(f"verification failed: {failed}", EXIT_VERIFY)


def cmd_figdata(cfg: RunConfig, out_dir: Path, written: list, name: str):
    result = reports.build_transform(cfg)
    effective = cfg.effective()
    write_table(reports.potential_table(cfg, result), out_dir, f"{name}_potential", cfg.formats,
                effective, written)
    write_table(reports.smatrix_table(cfg, result), out_dir, f"{name}_smatrix", cfg.formats,
                effective, written)
    _write(out_dir / f"{name}_config.json", dump_json(effective), written)


COMMANDS = {
    "potential": _table_command(reports.potential_table, "potential"),
    "smatrix": _table_command(reports.smatrix_table, "smatrix"),
    "boundstates": _table_command(reports.boundstate_table, "boundstates"),
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", default=argparse.SUPPRESS,
                        help="JSON run configuration")
    common.add_argument("--out", metavar="DIR", default=argparse.SUPPRESS,
                        help="output directory (overrides outputs.directory)")
    common.add_argument("--format", choices=FORMATS, default=argparse.SUPPRESS,
                        help="table format (overrides outputs.formats)")
    parser = argparse.ArgumentParser(
        prog="ccsusy", parents=[common],
        description="Coupled-channel SUSY partners of the zero potential: tables and checks.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    helps = {
        "potential": "tabulate the transformed potential on r_grid",
        "smatrix": "tabulate eigenphases and mixing angle on e_grid",
        "verify": "compare closed forms with direct integration; write verify.json",
        "boundstates": "list bound-state energies below the lowest threshold",
    }
    for name, text in helps.items():
        sub.add_parser(name, parents=[common], help=text, description=text)
    fig = sub.add_parser("figdata", parents=[common], help="potential and S-matrix tables for a preset")
    fig.add_argument("name", choices=PRESET_NAMES)
    return parser


def _resolve_config(args) -> RunConfig:
    config_path = getattr(args, "config", None)
    if args.command == "figdata":
        if config_path is not None:
            raise ConfigError("figdata takes a preset name, not --config")
        cfg = parse_config(preset_document(args.name))
    elif config_path is None:
        raise ConfigError("--config PATH is required")
    else:
        cfg = load_config(config_path)
    fmt = getattr(args, "format", None)
    return cfg.with_outputs(getattr(args, "out", None), [fmt] if fmt else None)


def run(argv=None) -> tuple[int, list[Path]]:
    args = build_parser().parse_args(argv)
    written: list[Path] = []
    try:
        cfg = _resolve_config(args)
        out_dir = Path(cfg.directory)
        if args.command == "figdata":
            cmd_figdata(cfg, out_dir, written, args.name)
        else:
            COMMANDS[args.command](cfg, out_dir, written)
    except CommandFailed as exc:
        print(f"ccsusy: {exc}", file=sys.stderr)
        return exc.code, written
    except SINGULAR as exc:
        where = getattr(exc, "radius", None)
        suffix = f" (r = {where:.10g})" if where is not None else ""
        print(f"ccsusy: singular parametrization: {exc}{suffix}", file=sys.stderr)
        return EXIT_SINGULAR, written
    except INVALID as exc:
        print(f"ccsusy: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID, written
    except ScatteringError as exc:
        print(f"ccsusy: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_VERIFY, written
    return EXIT_OK, written


def main(argv=None) -> int:
    code, written = run(argv)
    for path in written:
        print(path)
    return code


if __name__ == "__main__":
    sys.exit(main())
