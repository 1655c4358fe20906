"""Command-line front end.

    catalyst-qed run        --spec SPEC.json --out RESULT.json [--no-timestamp]
    catalyst-qed sweep      --spec SPEC.json --axis NAME --values V1,V2,... --out TABLE.csv
    catalyst-qed gate-check --spec SPEC.json --out REPORT.json

A spec file is one JSON object. Keys:

    n_atoms        int (alias N)
    r              field displacement, >= 0
    g_tau          segment length as g*tau       } give exactly one
    two_g_tau_sq   loop phase 2*(g*tau)**2       }
    n_bar_th       thermal photon number (default 0)
    cutoff         Fock cutoff n_max (default: chosen per engine)
    engine         LabExact | DisplacedExact | AnalyticRWA (default DisplacedExact)
    initial_state  "bloch" or a +/- label such as "+-" (default "bloch")
    metrics        subset of the metric names to report (default all)

Numbers may be written as expressions in ``pi``, e.g. ``"0.55*pi"``.

Exit codes: 0 success, 2 invalid input, 3 physics-validity failure
(truncation or a failed overlap/phase check).
"""

from __future__ import annotations

import argparse
import ast
import csv
import io
import json
import math
import operator
import os
import sys
import tempfile
import time
import warnings
from dataclasses import asdict
from datetime import datetime, timezone

from . import analysis, fockspace
from .protocol import (
    ConfigError,
    DisplaceField,
    Evolve,
    ProtocolConfig,
    RotateAtoms,
    build_schedule,
    expected_conditional_phase,
    extract_two_qubit_phases,
    loop_geometry,
    wrap_signed,
)

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_PHYSICS = 3

SPEC_KEYS = {"n_atoms", "N", "r", "g_tau", "two_g_tau_sq", "n_bar_th", "cutoff", "engine", "initial_state", "metrics"}
METRIC_NAMES = ("ghz_fidelity", "atomic_purity", "product_form_distance", "mean_photon_final")
CSV_COLUMNS = METRIC_NAMES + ("truncation_flag", "error")
PHASE_TOL = 0.02

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv, ast.Pow: operator.pow}
_UNOPS = {ast.USub: operator.neg, ast.UAdd: operator.pos}


def parse_number(value) -> float:
    """A JSON number, or a string expression over numbers and ``pi``."""
    if isinstance(value, bool):
        raise ConfigError(f"expected a number, got {value!r}")
    if isinstance(value, (int, float)):
        return value
    if not isinstance(value, str):
        raise ConfigError(f"expected a number, got {value!r}")

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
            return node.value
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNOPS:
            return _UNOPS[type(node.op)](ev(node.operand))
        raise ConfigError(f"cannot evaluate {value!r}")

    try:
        return float(ev(ast.parse(value.strip(), mode="eval")))
    except (SyntaxError, ZeroDivisionError, OverflowError) as exc:
        raise ConfigError(f"cannot evaluate {value!r}: {exc}") from None


def _integer(value, name):
    value = parse_number(value)
    if int(value) != value:
        raise ConfigError(f"{name} must be an integer, got {value!r}")
    return int(value)


def parse_spec(data: dict) -> tuple[ProtocolConfig, tuple[str, ...]]:
    """Validate a spec object; returns the config and the requested metric names."""
    if not isinstance(data, dict):
        raise ConfigError("spec must be a JSON object")
    unknown = set(data) - SPEC_KEYS
    if unknown:
        raise ConfigError(f"unknown spec keys: {sorted(unknown)}")
    if "n_atoms" in data and "N" in data:
        raise ConfigError("give n_atoms or N, not both")
    if "n_atoms" not in data and "N" not in data:
        raise ConfigError("missing n_atoms")
    angle_keys = [k for k in ("g_tau", "two_g_tau_sq") if k in data]
    if len(angle_keys) != 1:
        raise ConfigError("give exactly one of g_tau or two_g_tau_sq")
    if "r" not in data:
        raise ConfigError("missing r")

    if angle_keys[0] == "g_tau":
        g_tau = parse_number(data["g_tau"])
    else:
        loop = parse_number(data["two_g_tau_sq"])
        if loop < 0:
            raise ConfigError(f"two_g_tau_sq must be >= 0, got {loop!r}")
        g_tau = math.sqrt(loop / 2)

    cutoff = data.get("cutoff")
    metrics = data.get("metrics", list(METRIC_NAMES))
    if not isinstance(metrics, list) or not set(metrics) <= set(METRIC_NAMES):
        raise ConfigError(f"metrics must be a list drawn from {list(METRIC_NAMES)}")
    config = ProtocolConfig(
        n_atoms=_integer(data.get("n_atoms", data.get("N")), "n_atoms"),
        r=parse_number(data["r"]),
        tau=g_tau / ProtocolConfig.g,
        n_bar_th=parse_number(data.get("n_bar_th", 0.0)),
        cutoff=None if cutoff is None else _integer(cutoff, "cutoff"),
        engine=data.get("engine", "DisplacedExact"),
        initial_state=data.get("initial_state", "bloch"),
    )
    if not isinstance(config.initial_state, str):
        raise ConfigError("initial_state must be a label string")
    return config, tuple(m for m in METRIC_NAMES if m in metrics)


def config_echo(config: ProtocolConfig) -> dict:
    """Spec-file form of ``config``; feeding it back to :func:`parse_spec` gives an equal config."""
    return {
        "n_atoms": config.n_atoms,
        "r": config.r,
        "g_tau": config.tau * config.g,
        "n_bar_th": config.n_bar_th,
        "cutoff": config.cutoff,
        "engine": config.engine.value,
        "initial_state": config.initial_state,
    }


def load_spec(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read spec {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"spec {path} is not valid JSON: {exc}") from None


def fmt(x: float) -> float:
    """Round to 12 significant digits."""
    return float(f"{x:.12g}")


def _complex(z: complex) -> list[float]:
    return [fmt(z.real), fmt(z.imag)]


def _step_doc(step) -> dict:
    if isinstance(step, DisplaceField):
        return {"kind": "displace", "beta": _complex(step.beta)}
    if isinstance(step, RotateAtoms):
        return {"kind": "rotate", "quarter_turns": step.quarter_turns}
    if isinstance(step, Evolve):
        return {"kind": "evolve", "duration": fmt(step.duration)}
    raise TypeError(step)


def write_atomic(path: str, text: str) -> None:
    """Write ``text`` to ``path`` through a temporary file in the same directory."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _dump(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _timing(start: float, enabled: bool) -> dict | None:
    if not enabled:
        return None
    return {
        "wall_clock_s": round(time.perf_counter() - start, 6),
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }


def cmd_run(spec_path: str, out_path: str, timestamp: bool = True) -> int:
    start = time.perf_counter()
    config, wanted = parse_spec(load_spec(spec_path))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", fockspace.TruncationWarning)
        result, metrics = analysis.evaluate(config)
    geometry = result.geometry
    doc = {
        "command": "run",
        "config": config_echo(config),
        "resolved_cutoff": config.resolved_cutoff(),
        "metrics": {k: fmt(v) for k, v in asdict(metrics).items() if k in wanted},
        "loop": {
            "final_phi": fmt(geometry.final_phi),
            "dynamic_phase": fmt(geometry.dynamic_phase),
            "geometric_phase": fmt(geometry.geometric_phase),
            "orientation": geometry.orientation,
            "net_displacement": _complex(geometry.net_displacement),
        },
        "segments": [
            {
                "index": rec.index,
                "step": _step_doc(rec.step),
                "trace": fmt(rec.trace),
                "top_fock_population": None if rec.top_fock_population is None else fmt(rec.top_fock_population),
                "frame_amplitude": _complex(rec.frame_amplitude),
            }
            for rec in result.records
        ],
        "truncation_flag": result.truncation_flag,
    }
    timing = _timing(start, timestamp)
    if timing:
        doc["timing"] = timing
    write_atomic(out_path, _dump(doc))
    if result.truncation_flag:
        print(
            f"run invalid: top Fock levels hold {result.max_top_fock_population:.3g}; raise the cutoff",
            file=sys.stderr,
        )
        return EXIT_PHYSICS
    return EXIT_OK


def parse_values(text: str, axis: str) -> list:
    if text.strip() == "":
        return []
    values = [parse_number(v.strip()) for v in text.split(",")]
    if axis in ("N", "n_atoms", "cutoff"):
        return [_integer(v, axis) for v in values]
    return [float(v) for v in values]


def cmd_sweep(spec_path: str, axis: str, values_text: str, out_path: str, workers: int | None = None) -> int:
    config, _ = parse_spec(load_spec(spec_path))
    if axis not in analysis.SWEEP_AXES:
        raise ConfigError(f"unknown sweep axis {axis!r}; choose from {sorted(analysis.SWEEP_AXES)}")
    values = parse_values(values_text, axis)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", fockspace.TruncationWarning)
        rows = analysis.sweep(config, axis, values, max_workers=workers)

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow((axis,) + CSV_COLUMNS)
    for row in rows:
        value = row.value if isinstance(row.value, int) else repr(fmt(row.value))
        if row.metrics is None:
            writer.writerow([value, "", "", "", "", "", row.error])
        else:
            m = asdict(row.metrics)
            writer.writerow([value] + [repr(fmt(m[k])) for k in METRIC_NAMES] + [int(row.truncation_flag), ""])
    write_atomic(out_path, buf.getvalue())

    if not rows or any(r.metrics is not None for r in rows):
        return EXIT_OK
    for r in rows:
        print(f"{axis}={r.value}: {r.error}", file=sys.stderr)
    return EXIT_INVALID if all(r.error.startswith("ConfigError") for r in rows) else EXIT_PHYSICS


def cmd_gate_check(spec_path: str, out_path: str) -> int:
    config, _ = parse_spec(load_spec(spec_path))
    if config.n_atoms != 2:
        raise ConfigError("gate-check needs n_atoms = 2")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", fockspace.TruncationWarning)
        gate = extract_two_qubit_phases(config)
    geometry = loop_geometry(build_schedule(config.r, config.tau), config.g)
    loop_phase = 2 * (config.g * config.tau) ** 2
    expected = expected_conditional_phase(geometry)
    theta_pp, theta_pm, theta_mp, theta_mm = gate.phases
    # the normalized conditional phase is only defined modulo pi
    phase_error = abs(math.remainder(theta_pp - expected, math.pi))
    ideal = (math.pi / 2, 0.0, 0.0, math.pi / 2)
    passed = phase_error < PHASE_TOL and abs(theta_mp) < PHASE_TOL and not gate.flagged and not gate.truncation_flag
    doc = {
        "command": "gate-check",
        "config": config_echo(config),
        "phases": {lab: fmt(p) for lab, p in zip(("++", "+-", "-+", "--"), gate.phases)},
        "raw_phases": {lab: fmt(p) for lab, p in gate.raw.items()},
        "overlaps": {lab: fmt(v) for lab, v in gate.overlaps.items()},
        "deviation_from_ideal": [fmt(wrap_signed(p - q)) for p, q in zip(gate.phases, ideal)],
        "loop_phase_2_g_tau_sq": fmt(loop_phase),
        "expected_conditional_phase": fmt(expected),
        "conditional_phase_error": fmt(phase_error),
        "robustness_fidelity": fmt(analysis.robustness_fidelity(loop_phase)),
        "final_phi": fmt(gate.final_phi),
        "overlap_flag": gate.flagged,
        "truncation_flag": gate.truncation_flag,
        "passed": passed,
    }
    write_atomic(out_path, _dump(doc))
    if gate.flagged:
        print(f"output overlap below threshold: {gate.overlaps}", file=sys.stderr)
        return EXIT_PHYSICS
    if not passed:
        print(
            f"conditional phase {theta_pp:.6f} misses expected {expected:.6f} "
            f"(cross phase {theta_mp:.3g}, tolerance {PHASE_TOL})",
            file=sys.stderr,
        )
        return EXIT_PHYSICS
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="catalyst-qed", description="Displaced-thermal-field GHZ protocol simulator.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="execute one protocol run")
    p.add_argument("--spec", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--no-timestamp", action="store_true", help="omit timing fields for reproducible output")

    p = sub.add_parser("sweep", help="run the protocol over a list of values of one parameter")
    p.add_argument("--spec", required=True)
    p.add_argument("--axis", required=True, help="r, n_bar_th, tau, N or cutoff")
    p.add_argument("--values", required=True, help="comma-separated list")
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=None)

    p = sub.add_parser("gate-check", help="extract the two-atom phase gate")
    p.add_argument("--spec", required=True)
    p.add_argument("--out", required=True)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    try:
        if args.command == "run":
            return cmd_run(args.spec, args.out, timestamp=not args.no_timestamp)
        if args.command == "sweep":
            return cmd_sweep(args.spec, args.axis, args.values, args.out, args.workers)
        return cmd_gate_check(args.spec, args.out)
    except ConfigError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
