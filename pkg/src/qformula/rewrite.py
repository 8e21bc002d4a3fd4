"""Semantics-preserving circuit transformations.

Three layers:

* order rewrites: swapping adjacent gates on disjoint wires and postponing a
  gate set past a position (products of such swaps);
* path decomposition of a formula with respect to a block of variables: the
  wires carrying block variables, their paths to the output, the gates where
  two such paths meet, and for each maximal meet-free path the constant
  companion wires and postponable dead gates;
* path squeezing: replacing each long path by a single gate on the two path
  qubits plus four fresh constant-|0> qubits while preserving the acceptance
  probability.

The squeezed gate is built by simulating the path fragment on its two path
inputs and v companion qubits, decomposing the four image states over the
(exit, secondary) output qubits, orthonormalizing the 16 residual vectors and
re-expressing them on the four ancilla qubits.  The completion of the
resulting 4 orthonormal columns to a full 64x64 unitary is irrelevant to the
acceptance probability.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import RANK_TOL, SV_MAX, TOL
from .circuit import (
    Circuit,
    ComputationGraph,
    Gate,
    NotFormulaError,
    apply_gate_statevector,
    computation_graph,
    is_formula,
    is_var,
    var_index,
)
from .linalg import gram_schmidt_extend, unitarity_residual


class SqueezeError(ValueError):
    """Raised when a formula cannot be squeezed as specified."""


# ---------------------------------------------------------------------------
# Order rewrites
# ---------------------------------------------------------------------------


def commute_disjoint(c: Circuit, i: int, j: int) -> Circuit:
    """Swap the adjacent gates at positions i and i+1.

    Legal only when the two gates act on disjoint wire sets, in which case the
    full-circuit unitary is unchanged.
    """
    if j != i + 1:
        raise ValueError(f"positions {i}, {j} are not adjacent")
    if not (0 <= i and j < len(c.gates)):
        raise ValueError("gate position out of range")
    a, b = c.gates[i], c.gates[j]
    shared = set(a.targets) & set(b.targets)
    if shared:
        raise ValueError(f"gates at {i}, {j} share wires {sorted(shared)}")
    gates = list(c.gates)
    gates[i], gates[j] = gates[j], gates[i]
    return Circuit(wires=c.wires, inputs=list(c.inputs), gates=gates, output=c.output)


def postpone_gates(c: Circuit, gate_positions, after_position: int) -> Circuit:
    """Move the gates at ``gate_positions`` to just after ``after_position``.

    The move is a product of disjoint-wire adjacent swaps: every selected gate
    must act on wires untouched by every unselected gate between its position
    and ``after_position``.  Relative order within the selection is kept.
    """
    sel = sorted(set(int(p) for p in gate_positions))
    n = len(c.gates)
    if not sel:
        return Circuit(wires=c.wires, inputs=list(c.inputs), gates=list(c.gates), output=c.output)
    if not (0 <= sel[0] and sel[-1] < n and 0 <= after_position < n):
        raise ValueError("gate position out of range")
    if after_position in sel:
        raise ValueError("after_position cannot itself be postponed")
    if any(p > after_position for p in sel):
        raise ValueError("all postponed gates must precede after_position")
    sel_set = set(sel)
    for p in sel:
        wires = set(c.gates[p].targets)
        for q in range(p + 1, after_position + 1):
            if q in sel_set:
                continue
            shared = wires & set(c.gates[q].targets)
            if shared:
                raise ValueError(
                    f"gate {p} cannot move past gate {q}: shared wire {sorted(shared)[0]}"
                )
    gates = (
        [c.gates[k] for k in range(after_position + 1) if k not in sel_set]
        + [c.gates[k] for k in sel]
        + [c.gates[k] for k in range(after_position + 1, n)]
    )
    return Circuit(wires=c.wires, inputs=list(c.inputs), gates=gates, output=c.output)


def statevector_deviation(a: Circuit, b: Circuit, assignments=None) -> float:
    """Max statevector deviation between two same-shape circuits.

    Compares final state vectors entrywise over all (or the given)
    assignments; used to certify order rewrites.
    """
    if a.wires != b.wires or a.wires > SV_MAX:
        raise ValueError("circuits must match and fit the statevector engine")
    variables = a.variables()
    n = len(variables)
    if assignments is None:
        assignments = [
            {variables[i]: (k >> (n - 1 - i)) & 1 for i in range(n)}
            for k in range(1 << n)
        ]
    worst = 0.0
    for amap in assignments:
        pa = _full_state(a, amap)
        pb = _full_state(b, amap)
        worst = max(worst, float(np.max(np.abs(pa - pb))))
    return worst


def _full_state(c: Circuit, amap) -> np.ndarray:
    from .simulator import label_bit  # local import to avoid a cycle

    m = c.wires
    idx = 0
    for w, label in enumerate(c.inputs):
        idx |= label_bit(label, amap) << (m - 1 - w)
    psi = np.zeros(1 << m, dtype=complex)
    psi[idx] = 1.0
    for g in c.gates:
        psi = apply_gate_statevector(psi, g, m)
    return psi


# ---------------------------------------------------------------------------
# Substitution and path decomposition
# ---------------------------------------------------------------------------


def substitute(c: Circuit, tau: dict[int, int]) -> Circuit:
    """Replace variable labels by constants according to ``tau``."""
    inputs = []
    for label in c.inputs:
        if is_var(label) and var_index(label) in tau:
            inputs.append(str(int(tau[var_index(label)])))
        else:
            inputs.append(label)
    return Circuit(wires=c.wires, inputs=inputs, gates=list(c.gates), output=c.output)


@dataclass
class PathSegment:
    """A maximal meet-free piece of a block path.

    The path reads (bottom, interior..., top) where bottom is an input wire or
    a meet gate, top is a meet gate or the output wire (``top_gate is None``),
    and interior gates lie on no other block path.  ``m = 2 + len(interior)``;
    only segments with m > 2 are squeezed.
    """

    bottom_leaf: int | None
    bottom_gate: int | None
    interior: list[int]
    top_gate: int | None
    thread_exit_wire: int
    companions: list[int] = field(default_factory=list)
    prep_gates: list[int] = field(default_factory=list)
    postponed: list[int] = field(default_factory=list)

    @property
    def m(self) -> int:
        return 2 + len(self.interior)

    @property
    def short(self) -> bool:
        return self.m <= 2

    @property
    def fragment_gates(self) -> list[int]:
        own = [] if self.bottom_gate is None else [self.bottom_gate]
        return sorted(own + self.interior + self.prep_gates)


@dataclass
class PathDecomposition:
    f_tau: Circuit
    block: list[int]
    tau: dict[int, int]
    sigma_wires: list[int]
    live_sigma_wires: list[int]
    full_paths: dict[int, list[int]]
    meet_gates: list[int]
    segments: list[PathSegment]
    graph: ComputationGraph
    block_children: dict[int, list[int]]


def _const_subtree(graph: ComputationGraph, producer: int) -> tuple[list[int], list[int]]:
    """(gates, leaf wires) of the all-constant subtree rooted at a gate."""
    gates, leaves = [], []
    stack = [producer]
    while stack:
        g = stack.pop()
        gates.append(g)
        for src, wire in graph.sources[g]:
            if src is None:
                leaves.append(wire)
            else:
                stack.append(src)
    return sorted(gates), sorted(leaves)


def decompose_paths(f: Circuit, block, tau: dict[int, int]) -> PathDecomposition:
    """Decompose a formula into block paths, meet gates and companions.

    ``tau`` must assign a constant to exactly the variables outside ``block``.
    The decomposition is computed on the substituted circuit F_tau.
    """
    block = sorted(set(int(v) for v in block))
    variables = set(f.variables())
    if not set(block) <= variables:
        raise ValueError(f"block {block} contains unknown variables")
    expected = variables - set(block)
    tau = {int(k): int(v) for k, v in tau.items()}
    if set(tau) != expected:
        raise ValueError(
            f"tau must cover exactly the out-of-block variables {sorted(expected)}"
        )
    ok, witness = is_formula(f)
    if not ok:
        raise NotFormulaError(witness)
    f_tau = substitute(f, tau)
    graph = computation_graph(f_tau)

    sigma = [
        w
        for w, label in enumerate(f_tau.inputs)
        if is_var(label) and var_index(label) in block
    ]
    sigma_set = set(sigma)

    first_gate: dict[int, int] = {}
    for g in graph.nodes:
        for src, wire in graph.sources[g]:
            if src is None and wire not in first_gate:
                first_gate[wire] = g
    live = [w for w in sigma if w in first_gate]
    live_or_out = set(live)
    if graph.root is None and f_tau.inputs[f_tau.output] in [f"x{v}" for v in block]:
        live_or_out.add(f_tau.output)

    # Per tree gate: which children (by source slot) lead back to block leaves.
    has_block: dict[int, bool] = {}
    block_children: dict[int, list[int]] = {}
    for g in graph.nodes:  # time order: producers come first
        slots = []
        for slot, (src, wire) in enumerate(graph.sources[g]):
            if src is None:
                if wire in sigma_set:
                    slots.append(slot)
            elif has_block[src]:
                slots.append(slot)
        block_children[g] = slots
        has_block[g] = bool(slots)

    meets = [g for g in graph.nodes if len(block_children[g]) >= 2]
    meet_set = set(meets)
    if len(meets) > len(sigma):
        raise AssertionError("meet gate count exceeds block wire count")

    full_paths: dict[int, list[int]] = {}
    for w in live:
        path = [first_gate[w]]
        while True:
            consumer, _ = graph.parent(path[-1])
            if consumer is None:
                break
            path.append(consumer)
        full_paths[w] = path

    segments: list[PathSegment] = []
    starts: list[tuple[str, int]] = [("leaf", w) for w in live] + [
        ("gate", g) for g in sorted(meets)
    ]
    for kind, start in starts:
        if kind == "leaf":
            bottom_leaf, bottom_gate = start, None
            cur = first_gate[start]
            prev = None
        else:
            bottom_leaf, bottom_gate = None, start
            consumer, wire = graph.parent(start)
            prev = start
            cur = consumer
        interior: list[int] = []
        exit_wire = None
        while cur is not None and cur not in meet_set:
            interior.append(cur)
            prev = cur
            cur = graph.parent(cur)[0]
        if prev is None:
            # leaf feeding a meet gate directly
            top_gate = cur
            exit_wire = start
        elif cur is None:
            top_gate = None
            exit_wire = f_tau.output
        else:
            top_gate = cur
            exit_wire = graph.parent(prev)[1]
        seg = PathSegment(
            bottom_leaf=bottom_leaf,
            bottom_gate=bottom_gate,
            interior=interior,
            top_gate=top_gate,
            thread_exit_wire=exit_wire,
        )
        _collect_companions(f_tau, graph, seg, block_children)
        segments.append(seg)

    return PathDecomposition(
        f_tau=f_tau,
        block=block,
        tau=tau,
        sigma_wires=sigma,
        live_sigma_wires=live,
        full_paths=full_paths,
        meet_gates=sorted(meets),
        segments=segments,
        graph=graph,
        block_children=block_children,
    )


def _collect_companions(f_tau, graph, seg: PathSegment, block_children) -> None:
    """Fill companions, preparation gates and postponed dead gates of a segment."""
    companions: list[int] = []
    preps: list[int] = []

    def absorb(src, wire):
        if src is None:
            companions.append(wire)
        else:
            gates, leaves = _const_subtree(graph, src)
            preps.extend(gates)
            companions.extend(leaves)

    if seg.bottom_gate is not None:
        blocked = set(block_children[seg.bottom_gate])
        if len(blocked) > 2:
            raise SqueezeError(
                f"gate {seg.bottom_gate} joins {len(blocked)} block paths; "
                "squeezing supports at most 2"
            )
        if not seg.short:
            for slot, (src, wire) in enumerate(graph.sources[seg.bottom_gate]):
                if slot not in blocked:
                    absorb(src, wire)
    for g in seg.interior:
        thread_slots = set(block_children[g])
        for slot, (src, wire) in enumerate(graph.sources[g]):
            if slot not in thread_slots:
                absorb(src, wire)
    seg.companions = sorted(set(companions))
    seg.prep_gates = sorted(set(preps))

    # Dead gates touching companion wires after their consumption, closed
    # under entanglement with further wires.
    frontier = set(seg.companions)
    postponed: list[int] = []
    for pos in sorted(graph.dead):
        targets = set(f_tau.gates[pos].targets)
        if targets & frontier:
            postponed.append(pos)
            frontier |= targets
    seg.postponed = postponed


# ---------------------------------------------------------------------------
# Path squeezing
# ---------------------------------------------------------------------------


@dataclass
class SqueezeData:
    images: np.ndarray  # shape (4, 4, 2**v): [alpha index, (c0,c1) index, :]
    basis: list[np.ndarray]
    lambdas: np.ndarray  # shape (4, 4, 16): coefficients, zero-padded past rank
    rank: int
    exit_slot: int
    secondary_slot: int
    image_gram_residual: float


@dataclass
class SqueezeResult:
    unitary: np.ndarray  # 64 x 64 replacement gate
    data: SqueezeData
    fragment: Circuit  # standalone C~0 on 2 + v wires, output = exit slot
    replacement: Circuit  # standalone 6-wire circuit with the squeezed gate


def _fragment_layout(f_tau: Circuit, graph, seg: PathSegment, block_children):
    """Local wire order [q0, q1, companions...] and the fragment gate list."""
    if seg.bottom_gate is not None:
        gate = f_tau.gates[seg.bottom_gate]
        slots = block_children[seg.bottom_gate]
        if len(slots) != 2:
            raise SqueezeError(
                f"meet gate {seg.bottom_gate} needs exactly 2 block inputs to squeeze"
            )
        q0_wire = gate.targets[slots[0]]
        q1_wire = gate.targets[slots[1]]
        locals_ = [q0_wire, q1_wire]
        dummy_slot = None
    else:
        locals_ = [seg.bottom_leaf, None]
        dummy_slot = 1
    for w in seg.companions:
        locals_.append(w)
    return locals_, dummy_slot


def squeeze_path(
    f_tau: Circuit,
    seg: PathSegment,
    decomp: PathDecomposition,
    rank_tol: float = RANK_TOL,
) -> SqueezeResult:
    """Build the 6-qubit replacement gate for one long path segment.

    Simulates the path fragment (companion preparations plus the path gates,
    postponed gates excluded) for the four basis inputs on the path qubits,
    decomposes the images, orthonormalizes the residual vectors and rewrites
    them on four fresh ancilla qubits.
    """
    if seg.short:
        raise SqueezeError("segment has m <= 2 and is not squeezed")
    graph = decomp.graph
    locals_, dummy_slot = _fragment_layout(f_tau, graph, seg, decomp.block_children)
    v = len(seg.companions)
    if 2 + v > SV_MAX:
        raise SqueezeError(f"fragment needs {2 + v} qubits, beyond limit {SV_MAX}")
    slot_of = {w: k for k, w in enumerate(locals_) if w is not None}

    frag_gates: list[Gate] = []
    for w in seg.companions:
        if f_tau.inputs[w] == "1":
            frag_gates.append(Gate((slot_of[w],), np.array([[0, 1], [1, 0]], complex)))
    for pos in seg.fragment_gates:
        g = f_tau.gates[pos]
        frag_gates.append(Gate(tuple(slot_of[t] for t in g.targets), g.unitary))

    n_local = 2 + v
    exit_slot = slot_of[seg.thread_exit_wire]
    secondary_slot = 1 if exit_slot != 1 else 0

    outs = []
    for a0 in (0, 1):
        for a1 in (0, 1):
            psi = np.zeros(1 << n_local, dtype=complex)
            idx = (a0 << (n_local - 1)) | (a1 << (n_local - 2))
            psi[idx] = 1.0
            for g in frag_gates:
                psi = apply_gate_statevector(psi, g, n_local)
            outs.append(psi)
    gram = np.array([[np.vdot(x, y) for y in outs] for x in outs])
    gram_residual = float(np.max(np.abs(gram - np.eye(4))))
    if gram_residual > 1e-8:
        raise SqueezeError(
            f"fragment images are not orthonormal (residual {gram_residual:.3e}); "
            "this indicates an implementation bug"
        )

    images = np.zeros((4, 4, 1 << v), dtype=complex)
    for a, psi in enumerate(outs):
        t = psi.reshape([2] * n_local)
        t = np.moveaxis(t, [exit_slot, secondary_slot], [0, 1])
        for c0 in (0, 1):
            for c1 in (0, 1):
                images[a, 2 * c0 + c1] = t[c0, c1].reshape(-1)

    vectors = [images[a, cc] for a in range(4) for cc in range(4)]
    basis, coeffs, _ = gram_schmidt_extend(vectors, 1 << v, rank_tol=rank_tol)
    d = len(basis)
    if d > 16:
        raise SqueezeError(f"companion span rank {d} exceeds 16")

    lambdas = np.zeros((4, 4, 16), dtype=complex)
    for a in range(4):
        for cc in range(4):
            lambdas[a, cc, :d] = coeffs[4 * a + cc]

    cols = []
    for a in range(4):
        col = np.zeros(64, dtype=complex)
        for cc in range(4):
            col[cc * 16 : cc * 16 + 16] = lambdas[a, cc]
        cols.append(col)
    col_basis, _, completion = gram_schmidt_extend(cols, 64)
    if len(col_basis) != 4:
        raise SqueezeError("replacement columns are rank deficient")
    u = np.zeros((64, 64), dtype=complex)
    defined = {0: cols[0], 16: cols[1], 32: cols[2], 48: cols[3]}
    free = iter(completion)
    for col_idx in range(64):
        u[:, col_idx] = defined.get(col_idx)[:] if col_idx in defined else next(free)

    frag_inputs = []
    for k, w in enumerate(locals_):
        if k == 0:
            frag_inputs.append("x0")
        elif k == 1:
            frag_inputs.append("x1")
        else:
            frag_inputs.append("0")
    fragment = Circuit(
        wires=n_local, inputs=frag_inputs, gates=frag_gates, output=exit_slot
    )
    replacement = Circuit(
        wires=6,
        inputs=["x0", "x1", "0", "0", "0", "0"],
        gates=[Gate(tuple(range(6)), u)],
        output=0,
    )
    data = SqueezeData(
        images=images,
        basis=basis,
        lambdas=lambdas,
        rank=d,
        exit_slot=exit_slot,
        secondary_slot=secondary_slot,
        image_gram_residual=gram_residual,
    )
    return SqueezeResult(unitary=u, data=data, fragment=fragment, replacement=replacement)


# ---------------------------------------------------------------------------
# Whole-formula squeezing
# ---------------------------------------------------------------------------


def squeeze_formula_report(
    f: Circuit, block, tau: dict[int, int], rank_tol: float = RANK_TOL
) -> tuple[Circuit, dict]:
    """Squeeze every long path of F_tau; returns the new circuit and a report.

    All dead gates (including every postponed set) are dropped; constant
    subtrees feeding squeezed paths disappear into the replacement gates.
    """
    decomp = decompose_paths(f, block, tau)
    f_tau = decomp.f_tau
    graph = decomp.graph

    report: dict = {
        "s_j": len(decomp.sigma_wires),
        "live_block_wires": len(decomp.live_sigma_wires),
        "meet_gates": len(decomp.meet_gates),
        "segments": len(decomp.segments),
        "squeezed_paths": 0,
        "ranks": [],
        "unitarity_residuals": [],
        "image_gram_residuals": [],
    }

    if graph.root is None or not decomp.live_sigma_wires:
        out = Circuit(
            wires=f_tau.wires,
            inputs=list(f_tau.inputs),
            gates=[f_tau.gates[g] for g in graph.nodes],
            output=f_tau.output,
        )
        report["size"] = len(out.gates)
        report["size_ratio"] = (
            len(out.gates) / report["s_j"] if report["s_j"] else 0.0
        )
        return out, report

    seg_by_top: dict[int, list[PathSegment]] = {}
    root_segment = None
    for seg in decomp.segments:
        if seg.top_gate is None:
            root_segment = seg
        else:
            seg_by_top.setdefault(seg.top_gate, []).append(seg)
    if root_segment is None:
        raise AssertionError("no root segment found")

    new_inputs: list[str] = []
    new_gates: list[Gate] = []

    def new_wire(label: str) -> int:
        new_inputs.append(label)
        return len(new_inputs) - 1

    def emit_const_subtree(src, wire) -> int:
        if src is None:
            return new_wire(f_tau.inputs[wire])
        gate = f_tau.gates[src]
        wires = [emit_const_subtree(s, w) for s, w in graph.sources[src]]
        new_gates.append(Gate(tuple(wires), gate.unitary, name=gate.name))
        _, out_wire = graph.parent(src)
        return wires[gate.targets.index(out_wire)]

    def child_segment(gate_pos: int, exit_wire: int) -> PathSegment:
        for seg in seg_by_top.get(gate_pos, []):
            if seg.thread_exit_wire == exit_wire:
                return seg
        raise AssertionError(
            f"no segment enters gate {gate_pos} on wire {exit_wire}"
        )

    def emit_segment(seg: PathSegment) -> int:
        if seg.short:
            if seg.bottom_gate is None:
                return new_wire(f_tau.inputs[seg.bottom_leaf])
            gate = f_tau.gates[seg.bottom_gate]
            blocked = set(decomp.block_children[seg.bottom_gate])
            wires = []
            for slot, (src, wire) in enumerate(graph.sources[seg.bottom_gate]):
                if slot in blocked:
                    wires.append(emit_segment(child_segment(seg.bottom_gate, wire)))
                else:
                    wires.append(emit_const_subtree(src, wire))
            new_gates.append(Gate(tuple(wires), gate.unitary, name=gate.name))
            return wires[gate.targets.index(seg.thread_exit_wire)]
        result = squeeze_path(f_tau, seg, decomp, rank_tol=rank_tol)
        report["squeezed_paths"] += 1
        report["ranks"].append(result.data.rank)
        report["unitarity_residuals"].append(float(unitarity_residual(result.unitary)))
        report["image_gram_residuals"].append(result.data.image_gram_residual)
        if seg.bottom_gate is None:
            t0 = new_wire(f_tau.inputs[seg.bottom_leaf])
            t1 = new_wire("0")
        else:
            gate = f_tau.gates[seg.bottom_gate]
            slots = decomp.block_children[seg.bottom_gate]
            w_q0 = gate.targets[slots[0]]
            w_q1 = gate.targets[slots[1]]
            t0 = emit_segment(child_segment(seg.bottom_gate, w_q0))
            t1 = emit_segment(child_segment(seg.bottom_gate, w_q1))
        anc = [new_wire("0") for _ in range(4)]
        new_gates.append(Gate(tuple([t0, t1] + anc), result.unitary))
        return t0

    out_wire = emit_segment(root_segment)
    squeezed = Circuit(
        wires=len(new_inputs), inputs=new_inputs, gates=new_gates, output=out_wire
    )
    report["size"] = len(new_gates)
    report["size_ratio"] = len(new_gates) / max(1, report["s_j"])
    return squeezed, report


def squeeze_formula(f: Circuit, block, tau: dict[int, int]) -> Circuit:
    """Squeeze every long path of F_tau; see squeeze_formula_report."""
    return squeeze_formula_report(f, block, tau)[0]
