"""Command-line front end.

Every subcommand reads JSON files, writes a single JSON object to stdout and
keeps human-readable chatter on stderr behind --verbose.  Exit codes: 0 on
success, 1 on a domain error (reported as JSON on stderr), 2 on usage errors
(argparse).  All randomized procedures take --seed and default to 0, so equal
argv means byte-identical stdout.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import approx, boolcompile, bounds, rewrite, simulator
from .circuit import (
    Circuit,
    parse_circuit,
    serialize_circuit,
    is_formula,
)
from .config import D_MAX, tolerance
from .linalg import unitarity_residual
from .simulator import SuperOp, superop_from_kraus


def _emit(obj) -> None:
    sys.stdout.write(json.dumps(obj, sort_keys=True) + "\n")


def _note(args, text: str) -> None:
    if getattr(args, "verbose", False):
        sys.stderr.write(text + "\n")


def _load_circuit(path: str, d_max: int) -> Circuit:
    with open(path) as fh:
        return parse_circuit(fh.read(), d_max=d_max, tol=tolerance())


def _parse_bits(text: str) -> list[int]:
    if not text or any(ch not in "01" for ch in text):
        raise ValueError(f"input must be a nonempty 0/1 string, got {text!r}")
    return [int(ch) for ch in text]


def _parse_tau(text: str, out_vars: list[int]) -> dict[int, int]:
    if "=" in text:
        tau = {}
        for part in text.split(","):
            key, _, val = part.partition("=")
            key = key.strip()
            if not key.startswith("x"):
                raise ValueError(f"bad tau entry {part!r}")
            tau[int(key[1:])] = int(val)
        return tau
    bits = _parse_bits(text)
    if len(bits) != len(out_vars):
        raise ValueError(
            f"tau has {len(bits)} bits but there are {len(out_vars)} "
            f"out-of-block variables {out_vars}"
        )
    return dict(zip(out_vars, bits))


def _matrix_from_json(rows) -> np.ndarray:
    return np.array(
        [[complex(cell[0], cell[1]) for cell in row] for row in rows], dtype=complex
    )


def _load_channel(path: str) -> SuperOp:
    with open(path) as fh:
        doc = json.load(fh)
    d_in, d_out = int(doc["d_in"]), int(doc["d_out"])
    if "kraus" in doc:
        kraus = [_matrix_from_json(m) for m in doc["kraus"]]
        return superop_from_kraus(kraus, d_in, d_out)
    if "superop" in doc:
        rep = _matrix_from_json(doc["superop"])
        return SuperOp(d_in=d_in, d_out=d_out, rep=rep)
    raise ValueError("channel file needs a 'kraus' or 'superop' field")


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def _cmd_simulate(args) -> int:
    c = _load_circuit(args.circuit, args.dmax)
    bits = _parse_bits(args.input)
    if args.engine == "statevector":
        p = simulator.statevector_run(c, bits)
    elif args.engine == "formula":
        p = simulator.formula_run(c, bits).p
    else:
        ok, _ = is_formula(c)
        p = simulator.formula_run(c, bits).p if ok else simulator.statevector_run(c, bits)
    _emit({"p": p})
    return 0


def _cmd_truthtable(args) -> int:
    c = _load_circuit(args.circuit, args.dmax)
    table = simulator.truthtable(c, engine=args.engine)
    rows = []
    for r, p in enumerate(table.probabilities):
        rows.append(
            {
                "assignment": "".join(map(str, table.assignment_bits(r))),
                "p": p,
                "value": table.value(r),
            }
        )
    _emit(
        {
            "variables": table.variables,
            "rows": rows,
            "undecided_rows": table.undecided_rows,
        }
    )
    return 0


def _cmd_check_formula(args) -> int:
    c = _load_circuit(args.circuit, args.dmax)
    ok, witness = is_formula(c)
    graph = simulator.computation_graph(c)
    _emit(
        {
            "formula": ok,
            "witness": witness,
            "graph_nodes": graph.nodes,
            "dead_gates": graph.dead,
        }
    )
    return 0


def _cmd_squeeze(args) -> int:
    c = _load_circuit(args.circuit, args.dmax)
    block = [int(v) for v in args.block.split(",")]
    out_vars = sorted(set(c.variables()) - set(block))
    tau = _parse_tau(args.tau, out_vars) if args.tau else {}
    squeezed, report = rewrite.squeeze_formula_report(c, block, tau)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(serialize_circuit(squeezed))
        _note(args, f"wrote squeezed circuit to {args.output}")
    report["output_file"] = args.output
    report["K"] = 3.0
    _emit(report)
    return 0


def _cmd_truncate(args) -> int:
    c = _load_circuit(args.circuit, args.dmax)
    result = approx.verify_truncation(c, args.bits)
    report = {
        "mu": args.bits,
        "delta": result["delta"],
        "eta": approx.eta(result["d"], result["delta"]),
        "bound": result["bound"],
        "measured": max(result["measured_trace_dist"], result["measured_p_dev"]),
        "measured_trace_dist": result["measured_trace_dist"],
        "measured_p_dev": result["measured_p_dev"],
        "pass": result["pass"],
    }
    _emit(report)
    return 0


def _cmd_compile_bool(args) -> int:
    c = _load_circuit(args.circuit, args.dmax)
    nl = boolcompile.compile_formula(c, args.bits)
    stats = boolcompile.netlist_stats(nl)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(boolcompile.serialize_netlist(nl))
        _note(args, f"wrote netlist to {args.output}")
    _emit(
        {
            "mu": nl.mu,
            "W": nl.width,
            "size": stats["size"],
            "depth": stats["depth"],
            "inputs": len(nl.inputs),
            "output_file": args.output,
            "scaling_note": (
                "schoolbook arithmetic: size grows like gates * W^2; "
                "fast multiplier circuits would give gates * W log W loglog W"
            ),
        }
    )
    return 0


def _cmd_eval_netlist(args) -> int:
    with open(args.netlist) as fh:
        nl = boolcompile.parse_netlist(fh.read())
    bits = _parse_bits(args.input)
    word, p = boolcompile.eval_netlist(nl, bits)
    _emit({"word": word, "p_hat": p, "mu": nl.mu, "W": nl.width})
    return 0


def _cmd_dilate(args) -> int:
    t = _load_channel(args.channel)
    dil = simulator.stinespring_dilation(t)
    rng = np.random.default_rng(args.seed)
    from .generate import random_density

    worst = 0.0
    for _ in range(args.trials):
        rho = random_density(t.dim_in, rng)
        err = np.max(np.abs(simulator.apply_dilation(dil, rho) - t.apply(rho)))
        worst = max(worst, float(err))
    _emit(
        {
            "system_in_qubits": dil.system_in_qubits,
            "system_out_qubits": dil.system_out_qubits,
            "ancilla_in_qubits": dil.ancilla_in_qubits,
            "traced_out_qubits": dil.traced_out_qubits,
            "unitary_residual": unitarity_residual(dil.unitary),
            "max_reconstruction_error": worst,
            "trials": args.trials,
            "seed": args.seed,
        }
    )
    return 0


def _cmd_bounds(args) -> int:
    if args.bound == "nechiporuk":
        sigmas = [int(s) for s in args.sigmas.split(",")]
        rep = bounds.nechiporuk_bound(sigmas)
        _emit(
            {
                "sigmas": rep.sigmas,
                "terms": rep.terms,
                "total": rep.total,
                "skipped_blocks": rep.skipped,
            }
        )
    elif args.bound == "ed-sigma":
        _emit(bounds.ed_sigma_lower(args.ell))
    elif args.bound == "warren":
        _emit(
            {
                "d": args.degree,
                "m": args.count,
                "t": args.vars,
                "log2_count": bounds.warren_count(args.degree, args.count, args.vars),
            }
        )
    else:
        _emit(bounds.appendix_count(args.n, args.size, args.arity))
    return 0


def _cmd_suggest_mu(args) -> int:
    _emit(
        {
            "gates": args.gates,
            "eps": args.eps,
            "arity": args.arity,
            "mu_headline_formula": approx.mu_paper(args.gates, args.eps),
            "mu_bound_driven": approx.mu_for_error(args.arity, args.gates, args.eps),
        }
    )
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qformula")
    p.add_argument("--verbose", action="store_true", help="summaries on stderr")
    p.add_argument("--seed", type=int, default=0, help="seed for randomized steps")
    p.add_argument("--threads", type=int, default=1, help="reserved; default 1")
    p.add_argument(
        "--dmax", type=int, default=D_MAX, help="largest gate arity accepted on parse"
    )
    sub = p.add_subparsers(dest="cmd", required=True)

    s = sub.add_parser("simulate", help="acceptance probability on one input")
    s.add_argument("circuit")
    s.add_argument("--input", required=True)
    s.add_argument(
        "--engine", choices=["auto", "formula", "statevector"], default="auto"
    )
    s.set_defaults(fn=_cmd_simulate)

    s = sub.add_parser("truthtable", help="probability for every assignment")
    s.add_argument("circuit")
    s.add_argument(
        "--engine", choices=["auto", "formula", "statevector"], default="auto"
    )
    s.set_defaults(fn=_cmd_truthtable)

    s = sub.add_parser("check-formula", help="tree test with witness")
    s.add_argument("circuit")
    s.set_defaults(fn=_cmd_check_formula)

    s = sub.add_parser("squeeze", help="squeeze long paths of a formula")
    s.add_argument("circuit")
    s.add_argument("--block", required=True, help="comma-separated variable indices")
    s.add_argument(
        "--tau",
        default="",
        help="constants for out-of-block variables: bits or x2=0,x3=1",
    )
    s.add_argument("-o", "--output", default=None)
    s.set_defaults(fn=_cmd_squeeze)

    s = sub.add_parser("truncate", help="gate truncation error report")
    s.add_argument("circuit")
    s.add_argument("--bits", type=int, required=True)
    s.add_argument("--report", action="store_true", help="kept for compatibility")
    s.set_defaults(fn=_cmd_truncate)

    s = sub.add_parser("compile-bool", help="compile a formula to a netlist")
    s.add_argument("circuit")
    s.add_argument("--bits", type=int, required=True)
    s.add_argument("-o", "--output", default=None)
    s.set_defaults(fn=_cmd_compile_bool)

    s = sub.add_parser("eval-netlist", help="evaluate a compiled netlist")
    s.add_argument("netlist")
    s.add_argument("--input", required=True)
    s.set_defaults(fn=_cmd_eval_netlist)

    s = sub.add_parser("dilate", help="unitary dilation of a channel")
    s.add_argument("channel")
    s.add_argument("--trials", type=int, default=50)
    s.set_defaults(fn=_cmd_dilate)

    s = sub.add_parser("bounds", help="counting and lower-bound reports")
    bsub = s.add_subparsers(dest="bound", required=True)
    b = bsub.add_parser("nechiporuk")
    b.add_argument("--sigmas", required=True)
    b.set_defaults(fn=_cmd_bounds)
    b = bsub.add_parser("ed-sigma")
    b.add_argument("--ell", type=int, required=True)
    b.set_defaults(fn=_cmd_bounds)
    b = bsub.add_parser("warren")
    b.add_argument("--degree", type=int, required=True)
    b.add_argument("--count", type=int, required=True)
    b.add_argument("--vars", type=int, required=True)
    b.set_defaults(fn=_cmd_bounds)
    b = bsub.add_parser("appendix")
    b.add_argument("--n", type=int, required=True)
    b.add_argument("--size", type=int, required=True)
    b.add_argument("--arity", type=int, default=2)
    b.set_defaults(fn=_cmd_bounds)

    s = sub.add_parser("suggest-mu", help="truncation bits for a target error")
    s.add_argument("--gates", type=int, required=True)
    s.add_argument("--eps", type=float, required=True)
    s.add_argument("--arity", type=int, default=2)
    s.set_defaults(fn=_cmd_suggest_mu)

    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, OSError, KeyError) as exc:
        sys.stderr.write(
            json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n"
        )
        return 1


if __name__ == "__main__":
    sys.exit(main())
