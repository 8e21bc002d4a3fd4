"""Quantum circuit model.

A circuit is a list of wires with input labels, a time-ordered gate list and a
designated output wire.  A wire index denotes the same qubit for the whole
circuit: a gate consumes its target wires and reproduces them in place, so
fan-out is impossible by construction.  Input labels are strings: ``"0"`` and
``"1"`` for constants, ``"x3"`` for variable 3; the same variable may label
several wires.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

import numpy as np

from .config import D_MAX, TOL
from .linalg import as_cmatrix, unitarity_residual


class SchemaError(ValueError):
    """Raised when a circuit document violates the JSON schema."""


class NotUnitaryError(ValueError):
    """Raised for a gate matrix that is not unitary; carries the residual."""

    def __init__(self, residual: float):
        super().__init__(f"gate matrix is not unitary: ||U†U - I|| = {residual:.3e}")
        self.residual = residual


class NotFormulaError(ValueError):
    """Raised when a formula-only operation receives a non-formula circuit."""

    def __init__(self, witness):
        super().__init__("circuit is not a formula")
        self.witness = witness


_SQ2 = 1.0 / np.sqrt(2.0)

NAMED_GATES: dict[str, np.ndarray] = {
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "H": np.array([[_SQ2, _SQ2], [_SQ2, -_SQ2]], dtype=complex),
    "CNOT": np.array(
        [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
    ),
    "SWAP": np.array(
        [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex
    ),
    "TOFFOLI": np.eye(8, dtype=complex),
}
NAMED_GATES["TOFFOLI"][6, 6] = 0
NAMED_GATES["TOFFOLI"][7, 7] = 0
NAMED_GATES["TOFFOLI"][6, 7] = 1
NAMED_GATES["TOFFOLI"][7, 6] = 1

_VAR_RE = re.compile(r"^x(\d+)$")


def is_var(label: str) -> bool:
    return bool(_VAR_RE.match(label))


def var_index(label: str) -> int:
    m = _VAR_RE.match(label)
    if not m:
        raise ValueError(f"label {label!r} is not a variable")
    return int(m.group(1))


def check_label(label: str) -> str:
    if label in ("0", "1") or is_var(label):
        return label
    raise SchemaError(f"bad input label {label!r}")


@dataclass(eq=False)
class Gate:
    """A unitary on an ordered tuple of distinct target wires.

    ``targets[0]`` is the most significant qubit of the local space, matching
    the tensor order of :func:`embed_gate`.
    """

    targets: tuple[int, ...]
    unitary: np.ndarray
    name: str | None = None

    def __post_init__(self):
        self.targets = tuple(int(t) for t in self.targets)
        self.unitary = np.asarray(self.unitary, dtype=complex)
        d = len(self.targets)
        if len(set(self.targets)) != d:
            raise SchemaError(f"gate targets {self.targets} are not distinct")
        if self.unitary.shape != (2**d, 2**d):
            raise SchemaError(
                f"gate on {d} wires needs a {2**d}x{2**d} matrix, "
                f"got {self.unitary.shape}"
            )

    @property
    def arity(self) -> int:
        return len(self.targets)


def named_gate(name: str, targets) -> Gate:
    if name not in NAMED_GATES:
        raise SchemaError(f"unknown gate name {name!r}")
    return Gate(tuple(targets), NAMED_GATES[name].copy(), name=name)


@dataclass(eq=False)
class Circuit:
    wires: int
    inputs: list[str]
    gates: list[Gate]
    output: int

    def __post_init__(self):
        if len(self.inputs) != self.wires:
            raise SchemaError("inputs list length must equal wire count")
        for label in self.inputs:
            check_label(label)
        if not (0 <= self.output < self.wires):
            raise SchemaError(f"output wire {self.output} out of range")
        for g in self.gates:
            for t in g.targets:
                if not (0 <= t < self.wires):
                    raise SchemaError(f"gate target {t} out of range")

    def variables(self) -> list[int]:
        """Sorted distinct variable indices appearing on input wires."""
        return sorted({var_index(l) for l in self.inputs if is_var(l)})

    def size(self) -> int:
        return len(self.gates)


@dataclass
class ComputationGraph:
    """Gates reachable backward from the output gate, with wire-labeled edges.

    ``sources[g]`` lists, per target wire of gate ``g`` in target order,
    the producing gate position (or None for a fresh input wire) and the wire.
    ``consumers[g]`` lists (consumer position, wire) pairs within the graph.
    """

    root: int | None
    nodes: list[int]
    sources: dict[int, list[tuple[int | None, int]]]
    consumers: dict[int, list[tuple[int, int]]]
    dead: list[int]

    def is_tree(self) -> bool:
        return all(len(self.consumers[g]) <= 1 for g in self.nodes)

    def parent(self, g: int) -> tuple[int | None, int | None]:
        """(consumer position, wire) for a tree node; (None, None) at the root."""
        cons = self.consumers[g]
        if not cons:
            return (None, None)
        return cons[0]

    def leaf_wires(self) -> list[int]:
        """Input wires consumed by graph gates, in wire order."""
        leaves = set()
        for g in self.nodes:
            for producer, wire in self.sources[g]:
                if producer is None:
                    leaves.add(wire)
        return sorted(leaves)


def computation_graph(c: Circuit) -> ComputationGraph:
    """Build the computation graph of ``c``.

    The node set contains exactly the gates with a forward wire path to the
    output wire; gates without one are reported in ``dead``.
    """
    last_writer: dict[int, int] = {}
    sources_all: list[list[tuple[int | None, int]]] = []
    for pos, g in enumerate(c.gates):
        srcs = [(last_writer.get(w), w) for w in g.targets]
        sources_all.append(srcs)
        for w in g.targets:
            last_writer[w] = pos
    root = last_writer.get(c.output)
    nodes: list[int] = []
    if root is not None:
        seen = {root}
        stack = [root]
        while stack:
            g = stack.pop()
            nodes.append(g)
            for producer, _ in sources_all[g]:
                if producer is not None and producer not in seen:
                    seen.add(producer)
                    stack.append(producer)
        nodes.sort()
    node_set = set(nodes)
    consumers: dict[int, list[tuple[int, int]]] = {g: [] for g in nodes}
    for g in nodes:
        for producer, wire in sources_all[g]:
            if producer is not None:
                consumers[producer].append((g, wire))
    dead = [p for p in range(len(c.gates)) if p not in node_set]
    return ComputationGraph(
        root=root,
        nodes=nodes,
        sources={g: sources_all[g] for g in nodes},
        consumers=consumers,
        dead=dead,
    )


def _descend_to_leaf(graph: ComputationGraph, g: int) -> int:
    """Some input wire feeding the subtree rooted at gate ``g``."""
    while True:
        producer, wire = graph.sources[g][0]
        if producer is None:
            return wire
        g = producer


def is_formula(c: Circuit):
    """Tree test for the computation graph.

    Returns ``(True, None)`` when every input reaches the output along a
    unique path, else ``(False, witness)`` where the witness holds two
    distinct input-to-output paths through the offending gate.
    """
    graph = computation_graph(c)
    if graph.root is None:
        return True, None
    for g in graph.nodes:
        cons = graph.consumers[g]
        if len(cons) <= 1:
            continue
        leaf = _descend_to_leaf(graph, g)
        paths = []
        for consumer, wire in cons[:2]:
            gates = [g, consumer]
            cur = consumer
            while graph.consumers[cur]:
                cur = graph.consumers[cur][0][0]
                gates.append(cur)
            paths.append({"leaf_wire": leaf, "via_wire": wire, "gates": gates})
        return False, paths
    return True, None


def embed_gate(gate: Gate, m: int) -> np.ndarray:
    """Expand a gate to the full 2^m-dimensional unitary.

    Acts as the gate unitary on the target qubits (in target order, first
    target most significant) and as the identity elsewhere.  Wire 0 is the
    most significant bit of the global basis index.
    """
    d = gate.arity
    if any(t >= m for t in gate.targets):
        raise ValueError("gate target exceeds wire count")
    dim = 1 << m
    shifts = [m - 1 - t for t in gate.targets]
    res = np.zeros((dim, dim), dtype=complex)
    u = gate.unitary
    for col in range(dim):
        jloc = 0
        base = col
        for k, s in enumerate(shifts):
            bit = (col >> s) & 1
            jloc |= bit << (d - 1 - k)
            base &= ~(1 << s)
        for iloc in range(1 << d):
            row = base
            for k, s in enumerate(shifts):
                if (iloc >> (d - 1 - k)) & 1:
                    row |= 1 << s
            v = u[iloc, jloc]
            if v != 0:
                res[row, col] = v
    return res


def apply_gate_statevector(state: np.ndarray, gate: Gate, m: int) -> np.ndarray:
    """Apply a gate to a 2^m statevector without building the full unitary."""
    d = gate.arity
    t = state.reshape([2] * m)
    u = gate.unitary.reshape([2] * d + [2] * d)
    axes = list(gate.targets)
    t = np.tensordot(u, t, axes=(list(range(d, 2 * d)), axes))
    # tensordot puts the gate's output axes first; move them back.
    t = np.moveaxis(t, list(range(d)), axes)
    return t.reshape(-1)


# ---------------------------------------------------------------------------
# JSON codec
# ---------------------------------------------------------------------------


def _matrix_to_json(u: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in u]


def _matrix_from_json(rows) -> np.ndarray:
    try:
        arr = np.array(
            [[complex(cell[0], cell[1]) for cell in row] for row in rows],
            dtype=complex,
        )
    except (TypeError, IndexError) as exc:
        raise SchemaError(f"bad matrix encoding: {exc}") from exc
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise SchemaError("gate matrix must be square")
    return arr


def parse_circuit(doc, d_max: int = D_MAX, tol: float = TOL) -> Circuit:
    """Parse a circuit from a JSON string or an already-decoded dict."""
    if isinstance(doc, (str, bytes)):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise SchemaError("circuit document must be a JSON object")
    for key in ("wires", "inputs", "output", "gates"):
        if key not in doc:
            raise SchemaError(f"missing key {key!r}")
    wires = doc["wires"]
    if not isinstance(wires, int) or wires <= 0:
        raise SchemaError("wires must be a positive integer")
    inputs = doc["inputs"]
    if not isinstance(inputs, list) or len(inputs) != wires:
        raise SchemaError("inputs must list one label per wire")
    gates = []
    for k, gd in enumerate(doc["gates"]):
        if not isinstance(gd, dict) or "targets" not in gd:
            raise SchemaError(f"gate {k}: missing targets")
        name = gd.get("name")
        matrix = gd.get("matrix")
        if (name is None) == (matrix is None):
            raise SchemaError(f"gate {k}: exactly one of name/matrix required")
        targets = tuple(gd["targets"])
        if name is not None:
            g = named_gate(name, targets)
        else:
            u = _matrix_from_json(matrix)
            if u.shape != (2 ** len(targets), 2 ** len(targets)):
                raise SchemaError(
                    f"gate {k}: matrix shape {u.shape} does not match "
                    f"{len(targets)} targets"
                )
            g = Gate(targets, u)
        if g.arity > d_max:
            raise SchemaError(f"gate {k}: arity {g.arity} exceeds limit {d_max}")
        residual = unitarity_residual(g.unitary)
        if residual > tol:
            raise NotUnitaryError(residual)
        gates.append(g)
    try:
        output = int(doc["output"])
    except (TypeError, ValueError) as exc:
        raise SchemaError("output must be an integer wire index") from exc
    return Circuit(wires=wires, inputs=list(inputs), gates=gates, output=output)


def circuit_to_dict(c: Circuit) -> dict:
    gates = []
    for g in c.gates:
        if g.name is not None:
            gates.append({"name": g.name, "targets": list(g.targets), "matrix": None})
        else:
            gates.append(
                {"name": None, "targets": list(g.targets), "matrix": _matrix_to_json(g.unitary)}
            )
    return {
        "wires": c.wires,
        "inputs": list(c.inputs),
        "output": c.output,
        "gates": gates,
    }


def serialize_circuit(c: Circuit) -> str:
    """Canonical JSON form: sorted keys, two-space indent, trailing newline."""
    return json.dumps(circuit_to_dict(c), sort_keys=True, indent=2) + "\n"
