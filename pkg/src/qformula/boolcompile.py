"""Compilation of quantum formulas to fixed-point Boolean netlists.

The netlist computes the final 2x2 density matrix of a formula step by step
and outputs the acceptance probability as a W-bit two's-complement word with
mu fractional bits (W = mu + 8).  Gate constants are the mu-bit truncations of
the unitary entries, baked in as exact integers at scale 2^-mu.

Fixed-point semantics (mirrored by the test oracle, bit for bit):

* densities are stored as Hermitian pairs: diagonal entries keep only a real
  word, off-diagonal lower entries are the conjugates of the stored upper
  entries (imaginary part negated after any truncation);
* for a gate of arity >= 2 the input density is the tensor product of the
  child densities, each entry computed exactly and floor-truncated once to mu
  fractional bits;
* per gate, output entry (i,j) is sum_{c,d} K[i,j,c,d] * rho[c,d] with
  K[i,j,c,d] = sum_a V[(i,a),c] * conj(V[(j,a),d]) summed over the discarded
  output bits; K is exact at scale 2^-2mu, the sum is exact at 2^-3mu, and the
  result is floor-truncated to mu fractional bits and fitted to W bits.

Adders are ripple-carry and multipliers schoolbook, so the netlist size grows
like gate count times W^2; asymptotically faster multiplier circuits
(Schoenhage-Strassen style) would shave the quadratic factor but are out of
scope here.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .config import D_MAX
from .circuit import Circuit, NotFormulaError, computation_graph, is_formula, is_var, var_index
from .simulator import label_bit

OP_CONST0, OP_CONST1, OP_INPUT, OP_AND, OP_OR, OP_XOR, OP_NOT = range(7)
OP_NAMES = ["CONST0", "CONST1", "INPUT", "AND", "OR", "XOR", "NOT"]
OP_CODES = {name: code for code, name in enumerate(OP_NAMES)}
LOGIC_OPS = (OP_AND, OP_OR, OP_XOR, OP_NOT)


class SaturationError(ValueError):
    """Compile-time range analysis failure; suggests a wider word."""

    def __init__(self, needed: int, width: int):
        super().__init__(
            f"value range needs {needed} bits but the word is {width} bits wide; "
            f"increase the width by {needed - width} bits"
        )
        self.needed = needed
        self.width = width


@dataclass
class Netlist:
    ops: list[int]
    arg0: list[int]
    arg1: list[int]
    inputs: list[int]
    variables: list[int]
    outputs: list[int]
    mu: int
    width: int
    blocks: list[tuple[str, int, int]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.ops)


def signed_width(lo: int, hi: int) -> int:
    """Smallest two's-complement width representing every value in [lo, hi]."""
    w = 1
    while lo < -(1 << (w - 1)) or hi > (1 << (w - 1)) - 1:
        w += 1
    return w


class _Builder:
    def __init__(self):
        self.ops: list[int] = []
        self.arg0: list[int] = []
        self.arg1: list[int] = []
        self.c0 = self._raw(OP_CONST0)
        self.c1 = self._raw(OP_CONST1)

    def _raw(self, op: int, a: int = -1, b: int = -1) -> int:
        self.ops.append(op)
        self.arg0.append(a)
        self.arg1.append(b)
        return len(self.ops) - 1

    def new_input(self) -> int:
        return self._raw(OP_INPUT)

    def not_(self, a: int) -> int:
        if a == self.c0:
            return self.c1
        if a == self.c1:
            return self.c0
        if self.ops[a] == OP_NOT:
            return self.arg0[a]
        return self._raw(OP_NOT, a)

    def and_(self, a: int, b: int) -> int:
        if a == self.c0 or b == self.c0:
            return self.c0
        if a == self.c1:
            return b
        if b == self.c1:
            return a
        if a == b:
            return a
        return self._raw(OP_AND, a, b)

    def or_(self, a: int, b: int) -> int:
        if a == self.c1 or b == self.c1:
            return self.c1
        if a == self.c0:
            return b
        if b == self.c0:
            return a
        if a == b:
            return a
        return self._raw(OP_OR, a, b)

    def xor_(self, a: int, b: int) -> int:
        if a == self.c0:
            return b
        if b == self.c0:
            return a
        if a == self.c1:
            return self.not_(b)
        if b == self.c1:
            return self.not_(a)
        if a == b:
            return self.c0
        return self._raw(OP_XOR, a, b)

    def full_adder(self, a: int, b: int, c: int) -> tuple[int, int]:
        axb = self.xor_(a, b)
        s = self.xor_(axb, c)
        carry = self.or_(self.and_(a, b), self.and_(axb, c))
        return s, carry


@dataclass
class BitVec:
    """Two's-complement bit vector, LSB first, with an exact value interval.

    ``lo`` and ``hi`` bound the integer value at scale 2^-frac.
    """

    bits: list[int]
    frac: int
    lo: int
    hi: int

    @property
    def width(self) -> int:
        return len(self.bits)


def bv_const(b: _Builder, value: int, frac: int) -> BitVec:
    w = signed_width(value, value)
    word = value & ((1 << w) - 1)
    bits = [b.c1 if (word >> i) & 1 else b.c0 for i in range(w)]
    return BitVec(bits=bits, frac=frac, lo=value, hi=value)


def bv_from_bit(b: _Builder, bit: int, frac: int) -> BitVec:
    """The word bit * 2^frac at scale 2^-frac (sign bit zero)."""
    bits = [b.c0] * frac + [bit, b.c0]
    return BitVec(bits=bits, frac=frac, lo=0, hi=1 << frac)


def _ext_bit(x: BitVec, i: int) -> int:
    return x.bits[i] if i < len(x.bits) else x.bits[-1]


def bv_trim(x: BitVec) -> BitVec:
    """Drop redundant high bits; keeps the value (interval certified)."""
    w = signed_width(x.lo, x.hi)
    if w < len(x.bits):
        return BitVec(bits=x.bits[:w], frac=x.frac, lo=x.lo, hi=x.hi)
    return x


def _align(b: _Builder, x: BitVec, frac: int) -> BitVec:
    if x.frac == frac:
        return x
    if x.frac > frac:
        raise AssertionError("alignment never reduces precision")
    k = frac - x.frac
    return BitVec(
        bits=[b.c0] * k + x.bits, frac=frac, lo=x.lo << k, hi=x.hi << k
    )


def bv_add(b: _Builder, x: BitVec, y: BitVec) -> BitVec:
    frac = max(x.frac, y.frac)
    x = _align(b, x, frac)
    y = _align(b, y, frac)
    lo, hi = x.lo + y.lo, x.hi + y.hi
    w = signed_width(lo, hi)
    bits = []
    carry = b.c0
    for i in range(w):
        s, carry = b.full_adder(_ext_bit(x, i), _ext_bit(y, i), carry)
        bits.append(s)
    return BitVec(bits=bits, frac=frac, lo=lo, hi=hi)


def bv_neg(b: _Builder, x: BitVec) -> BitVec:
    lo, hi = -x.hi, -x.lo
    w = signed_width(lo, hi)
    bits = []
    carry = b.c1
    for i in range(w):
        s, carry = b.full_adder(b.not_(_ext_bit(x, i)), b.c0, carry)
        bits.append(s)
    return BitVec(bits=bits, frac=x.frac, lo=lo, hi=hi)


def bv_mul_const(b: _Builder, x: BitVec, k: int, k_frac: int) -> BitVec | None:
    """Exact product of a bit vector and a signed integer constant."""
    if k == 0:
        return None
    mag = abs(k)
    acc: BitVec | None = None
    i = 0
    while mag:
        if mag & 1:
            shifted = BitVec(
                bits=[b.c0] * i + x.bits,
                frac=x.frac + k_frac,
                lo=x.lo << i,
                hi=x.hi << i,
            )
            acc = shifted if acc is None else bv_add(b, acc, shifted)
        mag >>= 1
        i += 1
    if k < 0:
        acc = bv_neg(b, acc)
    return bv_trim(acc)


def bv_mul(b: _Builder, x: BitVec, y: BitVec) -> BitVec:
    """Exact signed product: schoolbook mod 2^(wx+wy) on sign-extended operands."""
    w = x.width + y.width
    cross = [x.lo * y.lo, x.lo * y.hi, x.hi * y.lo, x.hi * y.hi]
    lo, hi = min(cross), max(cross)

    def add_mod(bits_a: list[int], bits_b: list[int]) -> list[int]:
        out = []
        carry = b.c0
        for i in range(w):
            s, carry = b.full_adder(bits_a[i], bits_b[i], carry)
            out.append(s)
        return out

    result = None
    for i in range(w):
        yb = _ext_bit(y, i)
        if yb == b.c0:
            continue
        row = [b.c0] * i + [b.and_(_ext_bit(x, j), yb) for j in range(w - i)]
        result = row if result is None else add_mod(result, row)
    if result is None:
        result = [b.c0] * w
    out = BitVec(bits=result, frac=x.frac + y.frac, lo=lo, hi=hi)
    return bv_trim(out)


def bv_floor_shift(x: BitVec, k: int) -> BitVec:
    """Drop the k lowest bits (floor division by 2^k)."""
    if k == 0:
        return x
    bits = x.bits[k:]
    if not bits:
        bits = [x.bits[-1]]
    return BitVec(bits=bits, frac=x.frac - k, lo=x.lo >> k, hi=x.hi >> k)


def bv_fit(x: BitVec, width: int) -> BitVec:
    needed = signed_width(x.lo, x.hi)
    if needed > width:
        raise SaturationError(needed, width)
    if len(x.bits) >= width:
        bits = x.bits[:width]
    else:
        bits = x.bits + [x.bits[-1]] * (width - len(x.bits))
    return BitVec(bits=bits, frac=x.frac, lo=x.lo, hi=x.hi)


def bv_sum(b: _Builder, terms: list[BitVec], frac: int) -> BitVec:
    terms = [t for t in terms if t is not None]
    if not terms:
        return bv_const(b, 0, frac)
    while len(terms) > 1:
        nxt = [bv_add(b, terms[i], terms[i + 1]) for i in range(0, len(terms) - 1, 2)]
        if len(terms) % 2:
            nxt.append(terms[-1])
        terms = nxt
    return terms[0]


# ---------------------------------------------------------------------------
# Complex fixed-point helpers: an entry is (re, im), either part None if zero.
# ---------------------------------------------------------------------------

CEntry = tuple


def _conj(b: _Builder, e: CEntry) -> CEntry:
    re, im = e
    return (re, None if im is None else bv_neg(b, im))


def _cmul(b: _Builder, x: CEntry, y: CEntry) -> CEntry:
    xr, xi = x
    yr, yi = y

    def mul(p, q):
        if p is None or q is None:
            return None
        return bv_mul(b, p, q)

    def sub(p, q):
        if q is None:
            return p
        nq = bv_neg(b, q)
        return nq if p is None else bv_add(b, p, nq)

    def add(p, q):
        if p is None:
            return q
        if q is None:
            return p
        return bv_add(b, p, q)

    re = sub(mul(xr, yr), mul(xi, yi))
    im = add(mul(xr, yi), mul(xi, yr))
    return (re, im)


def _floor_entry(b: _Builder, e: CEntry, drop: int) -> CEntry:
    re, im = e
    return (
        None if re is None else bv_floor_shift(re, drop),
        None if im is None else bv_floor_shift(im, drop),
    )


# ---------------------------------------------------------------------------
# Gate constants
# ---------------------------------------------------------------------------


def truncated_int_matrix(u: np.ndarray, mu: int):
    """Entries of the mu-bit truncated unitary as exact integer pairs."""
    scale = 2.0**mu
    out = []
    for row in np.asarray(u, dtype=complex):
        out.append(
            [(int(np.trunc(z.real * scale)), int(np.trunc(z.imag * scale))) for z in row]
        )
    return out


def _insert_bit(rest: int, pos: int, bit: int, d: int) -> int:
    out = 0
    ri = 0
    for q in range(d):
        if q == pos:
            v = bit
        else:
            v = (rest >> (d - 2 - ri)) & 1
            ri += 1
        out = (out << 1) | v
    return out


def gate_constants(u: np.ndarray, mu: int, d: int, kept: int):
    """K[i][j][c][d] at scale 2^-2mu: the conjugation-plus-trace constants."""
    vint = truncated_int_matrix(u, mu)
    dim = 1 << d
    k = [[[[(0, 0)] * dim for _ in range(dim)] for _ in range(2)] for _ in range(2)]
    for i in (0, 1):
        for j in (0, 1):
            for c in range(dim):
                for dd in range(dim):
                    re_acc = 0
                    im_acc = 0
                    for a in range(1 << (d - 1)):
                        r1 = _insert_bit(a, kept, i, d)
                        r2 = _insert_bit(a, kept, j, d)
                        vr, vi = vint[r1][c]
                        wr, wi = vint[r2][dd]
                        re_acc += vr * wr + vi * wi
                        im_acc += vi * wr - vr * wi
                    k[i][j][c][dd] = (re_acc, im_acc)
    return k


# ---------------------------------------------------------------------------
# Compilation
# ---------------------------------------------------------------------------


def compile_formula(c: Circuit, mu: int) -> Netlist:
    """Compile a formula into a Boolean netlist for its acceptance probability."""
    if mu < 1:
        raise ValueError("mu must be at least 1")
    ok, witness = is_formula(c)
    if not ok:
        raise NotFormulaError(witness)
    for g in c.gates:
        if g.arity > D_MAX:
            raise ValueError(f"gate arity {g.arity} exceeds compile limit {D_MAX}")
    graph = computation_graph(c)
    width = mu + 8
    b = _Builder()
    variables = c.variables()
    input_ids = [b.new_input() for _ in variables]
    var_node = dict(zip(variables, input_ids))
    blocks: list[tuple[str, int, int]] = [("inputs", 0, len(b.ops))]

    def leaf_density(label: str) -> dict:
        ent: dict = {}
        if label in ("0", "1"):
            one = bv_const(b, 1 << mu, mu)
            bit = int(label)
            ent[(0, 0)] = (one if bit == 0 else None, None)
            ent[(1, 1)] = (one if bit == 1 else None, None)
            ent[(0, 1)] = (None, None)
        else:
            x = var_node[var_index(label)]
            ent[(0, 0)] = (bv_from_bit(b, b.not_(x), mu), None)
            ent[(1, 1)] = (bv_from_bit(b, x, mu), None)
            ent[(0, 1)] = (None, None)
        return ent

    def entry_of(ent: dict, r: int, col: int) -> CEntry:
        if r <= col:
            return ent[(r, col)]
        return _conj(b, ent[(col, r)])

    if graph.root is None:
        ent = leaf_density(c.inputs[c.output])
        p_word = ent[(1, 1)][0]
        if p_word is None:
            p_word = bv_const(b, 0, mu)
        word = bv_fit(p_word, width)
        outputs = list(word.bits)
        blocks.append(("output", blocks[-1][2], len(b.ops)))
        return Netlist(
            ops=b.ops,
            arg0=b.arg0,
            arg1=b.arg1,
            inputs=input_ids,
            variables=variables,
            outputs=outputs,
            mu=mu,
            width=width,
            blocks=blocks,
        )

    kept_out: dict[int, dict] = {}
    for pos in graph.nodes:
        start = len(b.ops)
        gate = c.gates[pos]
        d = gate.arity
        children = []
        for producer, wire in graph.sources[pos]:
            if producer is None:
                children.append(leaf_density(c.inputs[wire]))
            else:
                children.append(kept_out[producer])
        # Tensor product of the children, entry by entry, lazily.
        dim = 1 << d
        tensor_cache: dict = {}

        def rho_entry(r: int, col: int) -> CEntry:
            if r > col:
                got = rho_entry(col, r)
                key = ("conj", r, col)
                if key not in tensor_cache:
                    tensor_cache[key] = _conj(b, got)
                return tensor_cache[key]
            key = (r, col)
            if key in tensor_cache:
                return tensor_cache[key]
            if d == 1:
                val = entry_of(children[0], r, col)
            else:
                parts = []
                for q in range(d):
                    rb = (r >> (d - 1 - q)) & 1
                    cb = (col >> (d - 1 - q)) & 1
                    parts.append(entry_of(children[q], rb, cb))
                prod = parts[0]
                for p in parts[1:]:
                    prod = _cmul(b, prod, p)
                val = _floor_entry(b, prod, (d - 1) * mu)
                if r == col:
                    val = (val[0], None)  # diagonal of a Hermitian product
            tensor_cache[key] = val
            return val

        consumer, wire = graph.parent(pos)
        kept_wire = c.output if consumer is None else wire
        kept_slot = gate.targets.index(kept_wire)
        K = gate_constants(gate.unitary, mu, d, kept_slot)

        def out_entry(i: int, j: int, want_im: bool) -> CEntry:
            re_terms: list[BitVec] = []
            im_terms: list[BitVec] = []
            for cc in range(dim):
                for dd in range(dim):
                    kr, ki = K[i][j][cc][dd]
                    if kr == 0 and ki == 0:
                        continue
                    xr, xi = rho_entry(cc, dd)
                    if xr is not None:
                        t = bv_mul_const(b, xr, kr, 2 * mu)
                        if t is not None:
                            re_terms.append(t)
                        if want_im:
                            t = bv_mul_const(b, xr, ki, 2 * mu)
                            if t is not None:
                                im_terms.append(t)
                    if xi is not None:
                        t = bv_mul_const(b, xi, -ki, 2 * mu)
                        if t is not None:
                            re_terms.append(t)
                        if want_im:
                            t = bv_mul_const(b, xi, kr, 2 * mu)
                            if t is not None:
                                im_terms.append(t)
            re = bv_fit(bv_floor_shift(bv_sum(b, re_terms, 3 * mu), 2 * mu), width)
            im = None
            if want_im:
                im = bv_fit(bv_floor_shift(bv_sum(b, im_terms, 3 * mu), 2 * mu), width)
            return (re, im)

        ent = {
            (0, 0): out_entry(0, 0, want_im=False),
            (1, 1): out_entry(1, 1, want_im=False),
            (0, 1): out_entry(0, 1, want_im=True),
        }
        kept_out[pos] = ent
        blocks.append((f"gate{pos}", start, len(b.ops)))

    word = bv_fit(kept_out[graph.root][(1, 1)][0], width)
    outputs = list(word.bits)
    return Netlist(
        ops=b.ops,
        arg0=b.arg0,
        arg1=b.arg1,
        inputs=input_ids,
        variables=variables,
        outputs=outputs,
        mu=mu,
        width=width,
        blocks=blocks,
    )


# ---------------------------------------------------------------------------
# Evaluation and statistics
# ---------------------------------------------------------------------------


def _decode_word(bits_value: list[int], width: int, mu: int) -> tuple[int, float]:
    word = 0
    for i, v in enumerate(bits_value):
        word |= (v & 1) << i
    if word >= 1 << (width - 1):
        word -= 1 << width
    return word, word / float(1 << mu)


def eval_netlist(nl: Netlist, assignment) -> tuple[int, float]:
    """Topological evaluation; returns (signed word, decoded probability)."""
    bits = [int(x) for x in assignment]
    if len(bits) != len(nl.inputs):
        raise ValueError(
            f"assignment length {len(bits)} != input count {len(nl.inputs)}"
        )
    value = [0] * len(nl.ops)
    input_bit = dict(zip(nl.inputs, bits))
    ops, a0, a1 = nl.ops, nl.arg0, nl.arg1
    for idx in range(len(ops)):
        op = ops[idx]
        if op == OP_CONST0:
            value[idx] = 0
        elif op == OP_CONST1:
            value[idx] = 1
        elif op == OP_INPUT:
            value[idx] = input_bit[idx]
        elif op == OP_AND:
            value[idx] = value[a0[idx]] & value[a1[idx]]
        elif op == OP_OR:
            value[idx] = value[a0[idx]] | value[a1[idx]]
        elif op == OP_XOR:
            value[idx] = value[a0[idx]] ^ value[a1[idx]]
        else:
            value[idx] = 1 - value[a0[idx]]
    return _decode_word([value[o] for o in nl.outputs], nl.width, nl.mu)


def eval_netlist_bulk(nl: Netlist, assignments) -> list[tuple[int, float]]:
    """Evaluate many assignments at once with bit-parallel integer masks."""
    rows = [list(map(int, a)) for a in assignments]
    n = len(rows)
    if n == 0:
        return []
    full = (1 << n) - 1
    input_mask = {}
    for pos, node in enumerate(nl.inputs):
        m = 0
        for k, row in enumerate(rows):
            m |= (row[pos] & 1) << k
        input_mask[node] = m
    value = [0] * len(nl.ops)
    ops, a0, a1 = nl.ops, nl.arg0, nl.arg1
    for idx in range(len(ops)):
        op = ops[idx]
        if op == OP_CONST0:
            value[idx] = 0
        elif op == OP_CONST1:
            value[idx] = full
        elif op == OP_INPUT:
            value[idx] = input_mask[idx]
        elif op == OP_AND:
            value[idx] = value[a0[idx]] & value[a1[idx]]
        elif op == OP_OR:
            value[idx] = value[a0[idx]] | value[a1[idx]]
        elif op == OP_XOR:
            value[idx] = value[a0[idx]] ^ value[a1[idx]]
        else:
            value[idx] = full ^ value[a0[idx]]
    out = []
    for k in range(n):
        bits = [(value[o] >> k) & 1 for o in nl.outputs]
        out.append(_decode_word(bits, nl.width, nl.mu))
    return out


def netlist_stats(nl: Netlist) -> dict:
    """Exact size, depth and per-block node counts."""
    by_op = {name: 0 for name in OP_NAMES}
    for op in nl.ops:
        by_op[OP_NAMES[op]] += 1
    size = sum(by_op[OP_NAMES[op]] for op in LOGIC_OPS)
    depth = [0] * len(nl.ops)
    worst = 0
    for idx, op in enumerate(nl.ops):
        if op in (OP_CONST0, OP_CONST1, OP_INPUT):
            continue
        da = depth[nl.arg0[idx]]
        db = depth[nl.arg1[idx]] if op != OP_NOT else 0
        depth[idx] = 1 + (da if da >= db else db)
        if depth[idx] > worst:
            worst = depth[idx]
    breakdown = {}
    for label, start, end in nl.blocks:
        logic = sum(1 for i in range(start, end) if nl.ops[i] in LOGIC_OPS)
        breakdown[label] = {"nodes": end - start, "logic": logic}
    return {
        "size": size,
        "depth": worst,
        "by_op": by_op,
        "per_block": breakdown,
        "mu": nl.mu,
        "width": nl.width,
    }


# ---------------------------------------------------------------------------
# JSON codec
# ---------------------------------------------------------------------------


def netlist_to_dict(nl: Netlist) -> dict:
    gates = []
    for idx, op in enumerate(nl.ops):
        if op == OP_INPUT:
            continue
        args = []
        if op in (OP_AND, OP_OR, OP_XOR):
            args = [nl.arg0[idx], nl.arg1[idx]]
        elif op == OP_NOT:
            args = [nl.arg0[idx]]
        gates.append({"id": idx, "op": OP_NAMES[op], "args": args})
    stats = netlist_stats(nl)
    return {
        "inputs": list(nl.inputs),
        "gates": gates,
        "outputs": list(nl.outputs),
        "meta": {
            "mu": nl.mu,
            "W": nl.width,
            "size": stats["size"],
            "depth": stats["depth"],
            "variables": list(nl.variables),
        },
    }


def netlist_from_dict(doc: dict) -> Netlist:
    meta = doc["meta"]
    n = 0
    for g in doc["gates"]:
        n = max(n, g["id"] + 1)
    for i in doc["inputs"]:
        n = max(n, i + 1)
    ops = [OP_INPUT] * n
    arg0 = [-1] * n
    arg1 = [-1] * n
    input_set = set(doc["inputs"])
    for g in doc["gates"]:
        idx = g["id"]
        ops[idx] = OP_CODES[g["op"]]
        args = g["args"]
        if args:
            arg0[idx] = args[0]
            if len(args) > 1:
                arg1[idx] = args[1]
    for i in range(n):
        if i not in input_set and ops[i] == OP_INPUT and i not in (0, 1):
            raise ValueError(f"node {i} is neither an input nor a gate")
    return Netlist(
        ops=ops,
        arg0=arg0,
        arg1=arg1,
        inputs=list(doc["inputs"]),
        variables=list(meta.get("variables", [])),
        outputs=list(doc["outputs"]),
        mu=int(meta["mu"]),
        width=int(meta["W"]),
    )


def serialize_netlist(nl: Netlist) -> str:
    return json.dumps(netlist_to_dict(nl), sort_keys=True) + "\n"


def parse_netlist(text) -> Netlist:
    if isinstance(text, (str, bytes)):
        doc = json.loads(text)
    else:
        doc = text
    return netlist_from_dict(doc)
