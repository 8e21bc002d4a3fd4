"""Two execution semantics for circuits plus a super-operator toolkit.

``statevector_run`` is the exponential reference engine: it applies every gate
to a dense state vector.  ``formula_run`` exploits the tree structure of a
formula and propagates one 2x2 density matrix per tree edge, which is
polynomial in the circuit size.  The toolkit converts gates to one-output
super-operators, extracts Kraus decompositions from Choi matrices and builds
unitary dilations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import SV_MAX, TOL
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
from .linalg import (
    as_cmatrix,
    dagger,
    gram_schmidt_extend,
    kron_all,
    op_norm,
    partial_trace,
)


class NotCPError(ValueError):
    """Raised when a map is not completely positive; carries the eigenvalue."""

    def __init__(self, eigenvalue: float):
        super().__init__(
            f"map is not completely positive: Choi eigenvalue {eigenvalue:.3e}"
        )
        self.eigenvalue = eigenvalue


# ---------------------------------------------------------------------------
# Assignments
# ---------------------------------------------------------------------------


def assignment_map(c: Circuit, assignment) -> dict[int, int]:
    """Normalize an assignment to a {variable index: bit} dict.

    Sequences are matched positionally against the circuit's sorted variable
    list; dicts are validated to cover exactly those variables.
    """
    variables = c.variables()
    if isinstance(assignment, dict):
        amap = {int(k): int(v) for k, v in assignment.items()}
        if set(amap) != set(variables):
            raise ValueError(
                f"assignment covers {sorted(amap)} but circuit has {variables}"
            )
    else:
        bits = [int(b) for b in assignment]
        if len(bits) != len(variables):
            raise ValueError(
                f"assignment length {len(bits)} != variable count {len(variables)}"
            )
        amap = dict(zip(variables, bits))
    for v, b in amap.items():
        if b not in (0, 1):
            raise ValueError(f"assignment bit for x{v} must be 0 or 1")
    return amap


def label_bit(label: str, amap: dict[int, int]) -> int:
    if label == "0":
        return 0
    if label == "1":
        return 1
    return amap[var_index(label)]


def _basis_density(bit: int) -> np.ndarray:
    rho = np.zeros((2, 2), dtype=complex)
    rho[bit, bit] = 1.0
    return rho


# ---------------------------------------------------------------------------
# Statevector engine
# ---------------------------------------------------------------------------


def statevector_run(c: Circuit, assignment) -> float:
    """Acceptance probability by dense statevector simulation.

    Builds the basis state defined by the input labels, applies every gate in
    time order and returns the squared norm of the component where the output
    wire reads 1.
    """
    if c.wires > SV_MAX:
        raise ValueError(f"{c.wires} wires exceed the statevector limit {SV_MAX}")
    amap = assignment_map(c, assignment)
    m = c.wires
    idx = 0
    for w, label in enumerate(c.inputs):
        idx |= label_bit(label, amap) << (m - 1 - w)
    psi = np.zeros(1 << m, dtype=complex)
    psi[idx] = 1.0
    for g in c.gates:
        psi = apply_gate_statevector(psi, g, m)
    probs = np.abs(psi.reshape([2] * m)) ** 2
    sel = [slice(None)] * m
    sel[c.output] = 1
    return float(np.sum(probs[tuple(sel)]))


# ---------------------------------------------------------------------------
# Mixed-state tree propagation
# ---------------------------------------------------------------------------


@dataclass
class FormulaResult:
    rho_final: np.ndarray
    p: float


def tree_propagate(
    c: Circuit,
    graph: ComputationGraph,
    amap: dict[int, int],
    matrix_of=None,
) -> np.ndarray:
    """Propagate one 2x2 density per tree edge; returns the final density.

    ``matrix_of`` optionally overrides each gate's matrix (used for truncated
    gate sweeps); the result is then generally not a valid density matrix.
    Disjoint subtrees never interact, so the joint input of a gate is exactly
    the tensor product of the child densities.
    """
    if matrix_of is None:
        matrix_of = lambda g: g.unitary
    if graph.root is None:
        return _basis_density(label_bit(c.inputs[c.output], amap))
    kept_out: dict[int, np.ndarray] = {}
    for pos in graph.nodes:
        gate = c.gates[pos]
        children = []
        for producer, wire in graph.sources[pos]:
            if producer is None:
                children.append(_basis_density(label_bit(c.inputs[wire], amap)))
            else:
                children.append(kept_out[producer])
        rho_in = kron_all(children)
        u = matrix_of(gate)
        rho_out = u @ rho_in @ dagger(u)
        consumer, wire = graph.parent(pos)
        kept_wire = c.output if consumer is None else wire
        k = gate.targets.index(kept_wire)
        if gate.arity > 1:
            rho_out = partial_trace(rho_out, [2] * gate.arity, [k])
        kept_out[pos] = rho_out
    return kept_out[graph.root]


def formula_run(c: Circuit, assignment) -> FormulaResult:
    """Acceptance probability of a formula by 2x2 density propagation.

    Gates outside the computation tree never influence the output-wire
    marginal and are skipped.  ``p`` is the real part of the entry indexed by
    the output qubit reading 1.
    """
    ok, witness = is_formula(c)
    if not ok:
        raise NotFormulaError(witness)
    amap = assignment_map(c, assignment)
    graph = computation_graph(c)
    rho = tree_propagate(c, graph, amap)
    return FormulaResult(rho_final=rho, p=float(rho[1, 1].real))


# ---------------------------------------------------------------------------
# Truth tables
# ---------------------------------------------------------------------------


@dataclass
class TruthTable:
    variables: list[int]
    probabilities: list[float]

    def assignment_bits(self, row: int) -> tuple[int, ...]:
        n = len(self.variables)
        return tuple((row >> (n - 1 - i)) & 1 for i in range(n))

    def value(self, row: int):
        p = self.probabilities[row]
        if p > 2.0 / 3.0:
            return 1
        if p < 1.0 / 3.0:
            return 0
        return None

    @property
    def values(self) -> list:
        return [self.value(r) for r in range(len(self.probabilities))]

    @property
    def undecided_rows(self) -> list[int]:
        return [r for r in range(len(self.probabilities)) if self.value(r) is None]

    def boolean_function(self) -> list[int]:
        und = self.undecided_rows
        if und:
            raise ValueError(f"truth table is ambiguous on rows {und}")
        return [self.value(r) for r in range(len(self.probabilities))]


def truthtable(c: Circuit, engine: str = "auto", variables=None) -> TruthTable:
    """Acceptance probability for every assignment of the circuit variables.

    Rows are ordered by the integer value of the assignment with the lowest
    variable index as the most significant bit.  A row with p in [1/3, 2/3]
    has no Boolean value and is reported as undecided, not as an error.
    """
    own_vars = c.variables()
    variables = own_vars if variables is None else sorted(variables)
    if not set(own_vars) <= set(variables):
        raise ValueError("variables must cover the circuit's variables")
    n = len(variables)
    if n > 20:
        raise ValueError("refusing exhaustive enumeration beyond 20 variables")
    formula_ok, _ = is_formula(c)
    if engine == "auto":
        engine = "formula" if formula_ok else "statevector"
    if engine == "formula" and not formula_ok:
        raise NotFormulaError(is_formula(c)[1])
    graph = computation_graph(c) if engine == "formula" else None
    probs = []
    for row in range(1 << n):
        bits = {variables[i]: (row >> (n - 1 - i)) & 1 for i in range(n)}
        amap = {v: bits[v] for v in own_vars}
        if engine == "formula":
            rho = tree_propagate(c, graph, amap)
            probs.append(float(rho[1, 1].real))
        else:
            probs.append(statevector_run(c, amap))
    return TruthTable(variables=list(variables), probabilities=probs)


# ---------------------------------------------------------------------------
# Super-operators
# ---------------------------------------------------------------------------


def vec(m: np.ndarray) -> np.ndarray:
    """Column-stacking vectorization."""
    return np.asarray(m, dtype=complex).reshape(-1, order="F")


def unvec(v: np.ndarray, dim: int) -> np.ndarray:
    return np.asarray(v, dtype=complex).reshape((dim, dim), order="F")


@dataclass(eq=False)
class SuperOp:
    """Linear map on vectorized density matrices (column-stacking).

    ``rep`` has shape (4**d_out, 4**d_in): column j*2^d_in + i is the
    vectorized image of the matrix unit E_ij.
    """

    d_in: int
    d_out: int
    rep: np.ndarray

    @property
    def dim_in(self) -> int:
        return 2**self.d_in

    @property
    def dim_out(self) -> int:
        return 2**self.d_out

    def apply(self, rho) -> np.ndarray:
        rho = as_cmatrix(rho)
        if rho.shape != (self.dim_in, self.dim_in):
            raise ValueError("input dimension mismatch")
        return unvec(self.rep @ vec(rho), self.dim_out)


def superop_from_map(fn, d_in: int, d_out: int) -> SuperOp:
    """Build the matrix representation of a linear map on density matrices."""
    dim_in, dim_out = 2**d_in, 2**d_out
    rep = np.zeros((dim_out * dim_out, dim_in * dim_in), dtype=complex)
    for j in range(dim_in):
        for i in range(dim_in):
            e = np.zeros((dim_in, dim_in), dtype=complex)
            e[i, j] = 1.0
            rep[:, j * dim_in + i] = vec(fn(e))
    return SuperOp(d_in=d_in, d_out=d_out, rep=rep)


def conjugation_superop(v: np.ndarray, d: int) -> SuperOp:
    """The map rho -> V rho V† for an arbitrary (not necessarily unitary) V."""
    v = as_cmatrix(v)
    return SuperOp(d_in=d, d_out=d, rep=np.kron(np.conj(v), v))


def gate_superop(gate: Gate, kept_output: int) -> SuperOp:
    """One-output super-operator of a gate.

    Conjugation by the gate unitary followed by tracing out every output
    except local qubit ``kept_output``.
    """
    d = gate.arity
    if not (0 <= kept_output < d):
        raise ValueError("kept_output must index a gate qubit")
    u = gate.unitary

    def fn(rho):
        out = u @ rho @ dagger(u)
        if d == 1:
            return out
        return partial_trace(out, [2] * d, [kept_output])

    return superop_from_map(fn, d, 1)


def trace_out_superop(d_in: int, keep: int) -> SuperOp:
    """Partial trace, keeping local qubit ``keep``, as a super-operator."""
    return superop_from_map(
        lambda rho: partial_trace(rho, [2] * d_in, [keep]), d_in, 1
    )


def choi_matrix(t: SuperOp) -> np.ndarray:
    """Choi matrix with composite index (input, output) on rows and columns."""
    din, dout = t.dim_in, t.dim_out
    rep4 = t.rep.reshape(dout, dout, din, din)  # axes (b, a, j, i)
    return rep4.transpose(3, 1, 2, 0).reshape(din * dout, din * dout)


def cptp_residuals(t: SuperOp) -> tuple[float, float]:
    """(trace-preservation residual, smallest Choi eigenvalue)."""
    din, dout = t.dim_in, t.dim_out
    j = choi_matrix(t)
    j4 = j.reshape(din, dout, din, dout)
    tr_out = np.einsum("iaja->ij", j4)
    tp = op_norm(tr_out - np.eye(din))
    herm = (j + dagger(j)) / 2
    eigs = np.linalg.eigvalsh(herm)
    return float(tp), float(eigs[0])


def kraus_decomposition(t: SuperOp, tol: float = TOL) -> list[np.ndarray]:
    """Kraus operators of a completely positive map via its Choi matrix.

    Raises NotCPError when the Choi matrix has an eigenvalue below -tol.
    """
    din, dout = t.dim_in, t.dim_out
    j = choi_matrix(t)
    if op_norm(j - dagger(j)) > max(tol, 1e-8):
        raise NotCPError(float("nan"))
    evals, vecs = np.linalg.eigh((j + dagger(j)) / 2)
    if evals[0] < -tol:
        raise NotCPError(float(evals[0]))
    kraus = []
    for lam, v in zip(evals, vecs.T):
        if lam <= 1e-12:
            continue
        k = (np.sqrt(lam) * v).reshape(din, dout).T
        kraus.append(k)
    return kraus


def superop_from_kraus(kraus, d_in: int, d_out: int) -> SuperOp:
    ks = [as_cmatrix(k) for k in kraus]

    def fn(rho):
        out = np.zeros((2**d_out, 2**d_out), dtype=complex)
        for k in ks:
            out += k @ rho @ dagger(k)
        return out

    return superop_from_map(fn, d_in, d_out)


# ---------------------------------------------------------------------------
# Dilation
# ---------------------------------------------------------------------------


@dataclass
class Dilation:
    """Unitary realization of a channel with traced-out environment.

    The unitary acts on (system in) x (ancilla in |0..0>) and its output
    splits as (system out) x (traced-out environment).
    """

    unitary: np.ndarray
    system_in_qubits: int
    system_out_qubits: int
    ancilla_in_qubits: int
    traced_out_qubits: int


def stinespring_dilation(t: SuperOp, tol: float = TOL) -> Dilation:
    """Dilate a CPTP map to a unitary followed by a partial trace.

    The input ancilla has dimension (2^d_out)^2 and the traced-out
    environment dimension 2^d_in * 2^d_out, so the unitary is square.
    """
    kraus = kraus_decomposition(t, tol=tol)
    din, dout = t.dim_in, t.dim_out
    g1 = dout * dout
    g2 = din * dout
    dim = din * g1
    if dim != dout * g2:
        raise AssertionError("dilation dimensions are inconsistent")
    cols = []
    for i in range(din):
        w = np.zeros((dout, g2), dtype=complex)
        for k, kk in enumerate(kraus):
            w[:, k] = kk[:, i]
        cols.append(w.reshape(-1))
    basis, _, completion = gram_schmidt_extend(cols, dim)
    if len(basis) != din:
        raise NotCPError(float("nan"))
    u = np.zeros((dim, dim), dtype=complex)
    free = iter(completion)
    for col in range(dim):
        i, anc = divmod(col, g1)
        u[:, col] = cols[i] if anc == 0 else next(free)
    ancilla_qubits = 2 * t.d_out
    traced_qubits = t.d_in + t.d_out
    return Dilation(
        unitary=u,
        system_in_qubits=t.d_in,
        system_out_qubits=t.d_out,
        ancilla_in_qubits=ancilla_qubits,
        traced_out_qubits=traced_qubits,
    )


def apply_dilation(dil: Dilation, rho) -> np.ndarray:
    """Run rho (x) |0..0><0..0| through the dilation unitary and trace."""
    rho = as_cmatrix(rho)
    g1 = 1 << dil.ancilla_in_qubits
    anc = np.zeros((g1, g1), dtype=complex)
    anc[0, 0] = 1.0
    big = np.kron(rho, anc)
    out = dil.unitary @ big @ dagger(dil.unitary)
    dout = 1 << dil.system_out_qubits
    g2 = 1 << dil.traced_out_qubits
    return partial_trace(out, [dout, g2], [0])


# ---------------------------------------------------------------------------
# Tensor extensions of super-operators
# ---------------------------------------------------------------------------


def apply_extended(t: SuperOp, a: np.ndarray, left_dim: int, right_dim: int) -> np.ndarray:
    """Apply (I_left (x) T (x) I_right) to a matrix on the composite space."""
    a = as_cmatrix(a)
    din, dout = t.dim_in, t.dim_out
    n = left_dim * din * right_dim
    if a.shape != (n, n):
        raise ValueError("matrix dimension mismatch for extended application")
    rep4 = t.rep.reshape(dout, dout, din, din)  # (b, a, j, i)
    a6 = a.reshape(left_dim, din, right_dim, left_dim, din, right_dim)
    out = np.einsum("baji,lirmjs->larmbs", rep4, a6)
    m = left_dim * dout * right_dim
    return out.reshape(m, m)


def superop_tensor(t: SuperOp, r: SuperOp) -> SuperOp:
    """Tensor product channel T (x) R."""

    def fn(rho):
        x = apply_extended(r, rho, left_dim=t.dim_in, right_dim=1)
        return apply_extended(t, x, left_dim=1, right_dim=r.dim_out)

    return superop_from_map(fn, t.d_in + r.d_in, t.d_out + r.d_out)
