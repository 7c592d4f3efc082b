"""Command-line entry point: ``tpew {protocol,sweep,decomposition,validate,replay}``.

Data goes to ``--out`` (or stdout).  Every file written with ``--out`` gets a
``<out>.manifest.json`` sidecar recording the command line, resolved
parameters and a SHA-256 of the output; ``tpew replay`` re-runs a manifest
and checks the bytes match.

Exit codes: 0 success, 1 invalid input, 2 validation failure, 3 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import tempfile
import warnings
from typing import Iterable, Optional, Sequence

import numpy as np

from . import __version__, analytics, validation
from .analytics import ALL_PROTOCOLS, SweepGrid, sweep
from .protocols import ALIASES, PROTOCOLS, StrengthWarning, canonical, run
from .states import input_from_population

EXIT_OK, EXIT_INVALID, EXIT_VALIDATION, EXIT_IO = 0, 1, 2, 3
SCHEMA_VERSION = 1

SWEEP_COLUMNS = ("protocol", "r", "q", "avg_fidelity", "conditional_success", "unconditional_success", "degenerate")
DECOMPOSITION_COLUMNS = ("r", "delta", "recoverable_probability", "is_row_argmax")
BRANCH_COLUMNS = ("alice_outcome", "conditional_probability", "wm_success", "fidelity")

DEFAULTS = {
    "r_grid": "0:0.05:0.95",
    "q_grid": "0:0.05:0.95",
    "nodes": analytics.DEFAULT_NODES,
    "panels": 1,
    "seed": 0,
    "workers": 1,
    "format": "csv",
    "measure": "amplitude",
    "method": "closed_form",
    "n": 1_000_000,
    "delta_step": math.pi / 200,
    "delta_stop": 2 * math.pi,
}


class InvalidInput(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InvalidInput(f"{self.prog}: {message}")


# ---------------------------------------------------------------------------
# grids and serialization
# ---------------------------------------------------------------------------

def parse_grid(text: str) -> tuple:
    """``start:step:stop`` (stop inclusive) or a comma-separated list."""
    text = str(text).strip()
    try:
        if ":" in text:
            parts = [float(p) for p in text.split(":")]
            if len(parts) != 3:
                raise InvalidInput(f"grid {text!r} must be start:step:stop")
            start, step, stop = parts
            if step <= 0 or stop < start:
                raise InvalidInput(f"grid {text!r} needs step > 0 and stop >= start")
            n = int(math.floor((stop - start) / step + 1e-9))
            return tuple(float(round(start + k * step, 12)) for k in range(n + 1))
        return tuple(float(p) for p in text.split(",") if p.strip())
    except ValueError:
        raise InvalidInput(f"cannot parse grid {text!r}") from None


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def parse_value(text: str):
    if text in ("true", "false"):
        return text == "true"
    try:
        return float(text)
    except ValueError:
        return text


def to_csv(records: Iterable[dict], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for rec in records:
        w.writerow([format_value(rec[c]) for c in columns])
    return buf.getvalue()


def from_csv(text: str) -> list[dict]:
    rows = list(csv.reader(io.StringIO(text)))
    header, body = rows[0], rows[1:]
    return [{k: parse_value(v) for k, v in zip(header, row)} for row in body]


def _json_safe(v):
    if isinstance(v, dict):
        return {k: _json_safe(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_json_safe(x) for x in v]
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return None if math.isnan(v) else v
    if isinstance(v, np.integer):
        return int(v)
    return v


def dumps(obj) -> str:
    return json.dumps(_json_safe(obj), indent=2, sort_keys=False, allow_nan=False) + "\n"


def to_json_table(records: Iterable[dict], columns: Sequence[str], metadata: Optional[dict] = None) -> str:
    return dumps({
        "schema_version": SCHEMA_VERSION,
        "columns": list(columns),
        "rows": [{c: rec[c] for c in columns} for rec in records],
        "metadata": metadata or {},
    })


def from_json_table(text: str) -> list[dict]:
    """Inverse of :func:`to_json_table`; null becomes NaN."""
    doc = json.loads(text)
    return [{k: (math.nan if v is None else v) for k, v in row.items()} for row in doc["rows"]]


def _table(records, columns, fmt, metadata) -> str:
    records = list(records)
    return to_csv(records, columns) if fmt == "csv" else to_json_table(records, columns, metadata)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _unit(name, v) -> float:
    if v is None or not 0.0 <= v <= 1.0:
        raise InvalidInput(f"--{name} must be given and lie in [0, 1]")
    return float(v)


def cmd_protocol(args, opts) -> tuple[str, dict, int]:
    name = canonical(args.protocol)
    if name not in PROTOCOLS:
        raise InvalidInput(f"unknown protocol {args.protocol!r}")
    r = _unit("r", args.r)
    q = _unit("q", args.q if args.q is not None else 0.0)
    if args.x is not None:
        if args.alpha is not None or args.beta is not None:
            raise InvalidInput("give either --x or --alpha/--beta, not both")
        psi = input_from_population(_unit("x", args.x), args.phase_alpha, args.phase_beta)
        alpha, beta = psi.amplitudes
    else:
        if args.alpha is None or args.beta is None:
            raise InvalidInput("give --x or both --alpha and --beta")
        try:
            alpha, beta = complex(args.alpha), complex(args.beta)
        except ValueError:
            raise InvalidInput("--alpha/--beta must be complex literals such as 0.6 or 0.8j") from None
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", StrengthWarning)
        try:
            report = run(name, alpha, beta, r, q)
        except ValueError as exc:
            raise InvalidInput(str(exc)) from None
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    doc = {"schema_version": SCHEMA_VERSION, **report.to_dict()}
    doc["g_tot"] = doc["conditional_success"]
    if opts["format"] == "csv":
        text = to_csv(
            [{k: (math.nan if v is None else v) for k, v in b.to_dict().items()} for b in report.branches],
            BRANCH_COLUMNS,
        )
    else:
        text = dumps(doc)
    params = {"protocol": name, "alpha": alpha, "beta": beta, "r": r, "q": q}
    return text, params, EXIT_OK


def cmd_sweep(args, opts) -> tuple[str, dict, int]:
    try:
        grid = SweepGrid(
            args.protocol,
            parse_grid(opts["r_grid"]),
            parse_grid(opts["q_grid"]),
            nodes=int(opts["nodes"]),
            panels=int(opts["panels"]),
            measure=opts["measure"],
            method=opts["method"],
        )
    except ValueError as exc:
        raise InvalidInput(str(exc)) from None
    result = sweep(grid, workers=int(opts["workers"]))
    meta = dict(result.metadata, protocol=grid.protocol)
    text = _table(result.rows(), SWEEP_COLUMNS, opts["format"], meta)
    params = {
        "protocol": grid.protocol, "r_grid": opts["r_grid"], "q_grid": opts["q_grid"],
        "nodes": grid.nodes, "panels": grid.panels, "measure": grid.measure, "method": grid.method,
    }
    return text, params, EXIT_OK


def cmd_decomposition(args, opts) -> tuple[str, dict, int]:
    rs = parse_grid(opts["r_grid"])
    if any(not 0.0 <= r <= 1.0 for r in rs):
        raise InvalidInput("r grid values must lie in [0, 1]")
    step, stop = float(opts["delta_step"]), float(opts["delta_stop"])
    if step <= 0 or stop < 0:
        raise InvalidInput("--delta-step must be positive and --delta-stop non-negative")
    deltas = analytics.delta_grid(step, stop)
    values = analytics.decomposition_sweep(rs, deltas)
    mask = analytics.row_argmax_mask(values)
    records = (
        {"r": r, "delta": float(d), "recoverable_probability": float(values[i, j]), "is_row_argmax": bool(mask[i, j])}
        for i, r in enumerate(rs)
        for j, d in enumerate(deltas)
    )
    text = _table(records, DECOMPOSITION_COLUMNS, opts["format"], {"version": __version__})
    return text, {"r_grid": opts["r_grid"], "delta_step": step, "delta_stop": stop}, EXIT_OK


def cmd_validate(args, opts) -> tuple[str, dict, int]:
    if args.suite == "analytic":
        result = validation.analytic_suite()
    else:
        n = int(opts["n"])
        if n < 1:
            raise InvalidInput("--n must be positive")
        result = validation.mc_suite(seed=int(opts["seed"]), n_trajectories=n, workers=int(opts["workers"]))
    for c in result.checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name} deviation={c.deviation:.6g}", file=sys.stderr)
    params = {"suite": args.suite}
    if args.suite == "mc":
        params.update(seed=int(opts["seed"]), n=int(opts["n"]))
    return dumps(result.to_dict()), params, result.exit_code


# ---------------------------------------------------------------------------
# manifests
# ---------------------------------------------------------------------------

def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def manifest_path(out: str) -> str:
    return out + ".manifest.json"


def build_manifest(argv, command, params, opts, out, data: bytes) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "tool": "tpew",
        "version": __version__,
        "argv": list(argv),
        "command": command,
        "parameters": params,
        "seed": int(opts["seed"]),
        "quadrature": {"rule": "gauss-legendre", "nodes": int(opts["nodes"]), "panels": int(opts["panels"]),
                       "measure": opts["measure"]},
        "format": opts["format"],
        "outputs": {os.path.basename(out): sha256_bytes(data)},
    }


def _jsonable_params(params: dict) -> dict:
    out = {}
    for k, v in params.items():
        if isinstance(v, (complex, np.complexfloating)):
            out[k] = {"real": float(v.real), "imag": float(v.imag)}
        else:
            out[k] = v
    return out


def cmd_replay(args) -> int:
    try:
        with open(args.manifest, encoding="utf-8") as fh:
            manifest = json.load(fh)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except json.JSONDecodeError as exc:
        print(f"error: manifest is not valid JSON: {exc}", file=sys.stderr)
        return EXIT_INVALID
    argv = list(manifest["argv"])
    expected = next(iter(manifest["outputs"].values()))
    with tempfile.TemporaryDirectory() as tmp:
        target = os.path.join(tmp, "replay.out")
        i = argv.index("--out")
        argv[i + 1] = target
        code = main(argv)
        if code not in (EXIT_OK, EXIT_VALIDATION):
            return code
        with open(target, "rb") as fh:
            got = sha256_bytes(fh.read())
    if got != expected:
        print(f"replay mismatch: expected {expected}, got {got}", file=sys.stderr)
        return EXIT_VALIDATION
    print(f"replay ok: {got}", file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _common() -> argparse.ArgumentParser:
    p = _Parser(add_help=False)
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"), default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--nodes", type=int, default=None, help="Gauss-Legendre nodes per panel")
    p.add_argument("--config", help="JSON file of defaults; command-line flags take precedence")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(prog="tpew", description="Teleportation through amplitude damping with EAM and weak measurement.")
    parser.add_argument("--version", action="version", version=f"tpew {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    protocol_ids = sorted(PROTOCOLS) + sorted(ALIASES)
    p = sub.add_parser("protocol", parents=[common], help="run one protocol for one input")
    p.add_argument("protocol", choices=protocol_ids)
    p.add_argument("--alpha")
    p.add_argument("--beta")
    p.add_argument("--x", type=float, help="input population |alpha|^2")
    p.add_argument("--phase-alpha", type=float, default=0.0)
    p.add_argument("--phase-beta", type=float, default=0.0)
    p.add_argument("--r", type=float)
    p.add_argument("--q", type=float)

    s = sub.add_parser("sweep", parents=[common], help="average fidelity and success over an (r, q) grid")
    s.add_argument("protocol", choices=sorted(ALL_PROTOCOLS) + sorted(ALIASES))
    s.add_argument("--r-grid", dest="r_grid")
    s.add_argument("--q-grid", dest="q_grid")
    s.add_argument("--panels", type=int)
    s.add_argument("--measure", choices=analytics.MEASURES)
    s.add_argument("--method", choices=analytics.METHODS)

    d = sub.add_parser("decomposition", parents=[common], help="recoverable probability over Kraus re-decompositions")
    d.add_argument("--r-grid", dest="r_grid")
    d.add_argument("--delta-step", dest="delta_step", type=float)
    d.add_argument("--delta-stop", dest="delta_stop", type=float)

    v = sub.add_parser("validate", parents=[common], help="run an invariant suite")
    v.add_argument("suite", choices=("analytic", "mc"))
    v.add_argument("--n", type=int, help="trajectories per configuration (mc suite)")

    r = sub.add_parser("replay", help="re-run a manifest and compare output checksums")
    r.add_argument("manifest")
    return parser


def resolve_options(args) -> dict:
    """CLI flags > config file > built-in defaults."""
    config = {}
    if getattr(args, "config", None):
        try:
            with open(args.config, encoding="utf-8") as fh:
                config = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidInput(f"config file is not valid JSON: {exc}") from None
        if not isinstance(config, dict):
            raise InvalidInput("config file must hold a JSON object")
        config = {k.replace("-", "_"): v for k, v in config.items()}
    opts = {}
    for key, default in DEFAULTS.items():
        flag = getattr(args, key, None)
        opts[key] = flag if flag is not None else config.get(key, default)
    if opts["format"] not in ("csv", "json"):
        raise InvalidInput(f"unknown format {opts['format']!r}")
    if int(opts["workers"]) < 1:
        raise InvalidInput("--workers must be at least 1")
    if int(opts["nodes"]) < 1:
        raise InvalidInput("--nodes must be at least 1")
    if not 0 <= int(opts["seed"]) < 2**64:
        raise InvalidInput("--seed must be an unsigned 64-bit integer")
    return opts


COMMANDS = {
    "protocol": cmd_protocol,
    "sweep": cmd_sweep,
    "decomposition": cmd_decomposition,
    "validate": cmd_validate,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
        if args.command == "replay":
            return cmd_replay(args)
        opts = resolve_options(args)
        text, params, code = COMMANDS[args.command](args, opts)
    except InvalidInput as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO

    data = text.encode("utf-8")
    if args.out is None:
        sys.stdout.write(text)
        return code
    try:
        with open(args.out, "wb") as fh:
            fh.write(data)
        manifest = build_manifest(argv, args.command, _jsonable_params(params), opts, args.out, data)
        with open(manifest_path(args.out), "w", encoding="utf-8") as fh:
            fh.write(dumps(manifest))
    except OSError as exc:
        print(f"error: cannot write output: {exc}", file=sys.stderr)
        return EXIT_IO
    return code


if __name__ == "__main__":
    sys.exit(main())
