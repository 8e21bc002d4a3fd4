"""Seeded random generators: Haar unitaries, densities, channels, formulas.

Random formulas are built bottom-up: every wire starts as a leaf carrying a
label, merging gates join two (or three) live subtrees and exactly one target
wire stays live, so the computation graph is a tree by construction.  Dead
gates acting on already-discarded wires can be sprinkled in afterwards; they
never reach the output.
"""

from __future__ import annotations

import numpy as np

from .circuit import Circuit, Gate, NAMED_GATES, named_gate


def as_rng(seed_or_rng) -> np.random.Generator:
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return np.random.default_rng(seed_or_rng)


def haar_unitary(dim: int, rng) -> np.ndarray:
    rng = as_rng(rng)
    z = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(z)
    phases = np.diag(r).copy()
    phases /= np.abs(phases)
    return q * phases


def random_density(dim: int, rng) -> np.ndarray:
    rng = as_rng(rng)
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    rho = g @ g.conj().T
    return rho / np.trace(rho)


def random_kraus_channel(d_in: int, d_out: int, n_kraus: int, rng):
    """Random CPTP map as a list of Kraus operators (exact sum to identity)."""
    rng = as_rng(rng)
    din, dout = 2**d_in, 2**d_out
    if dout * n_kraus < din:
        raise ValueError("need n_kraus * 2^d_out >= 2^d_in for an isometry")
    z = rng.standard_normal((dout * n_kraus, din)) + 1j * rng.standard_normal(
        (dout * n_kraus, din)
    )
    q, _ = np.linalg.qr(z)
    return [q[k * dout : (k + 1) * dout, :] for k in range(n_kraus)]


def random_formula(
    seed_or_rng,
    n_leaves: int = 6,
    n_vars: int = 3,
    one_qubit_gates: int = 2,
    p_named: float = 0.4,
    p_toffoli: float = 0.0,
    dead_gates: int = 0,
    haar_one_qubit: bool = True,
) -> Circuit:
    """Random formula on ``n_leaves`` wires with at most ``n_vars`` variables."""
    rng = as_rng(seed_or_rng)
    if n_leaves < 1:
        raise ValueError("need at least one leaf")
    labels = []
    for k in range(n_leaves):
        if k < n_vars:
            labels.append(f"x{k}")
        elif rng.random() < 0.6 and n_vars > 0:
            labels.append(f"x{int(rng.integers(n_vars))}")
        else:
            labels.append(str(int(rng.integers(2))))
    perm = rng.permutation(n_leaves)
    labels = [labels[i] for i in perm]

    gates: list[Gate] = []
    active = list(range(n_leaves))
    ones_left = one_qubit_gates
    while len(active) > 1 or ones_left > 0:
        if ones_left > 0 and (len(active) == 1 or rng.random() < 0.35):
            w = int(active[rng.integers(len(active))])
            if not haar_one_qubit or rng.random() < p_named:
                gates.append(named_gate("H" if rng.random() < 0.5 else "X", (w,)))
            else:
                gates.append(Gate((w,), haar_unitary(2, rng)))
            ones_left -= 1
            continue
        use_toffoli = len(active) > 2 and rng.random() < p_toffoli
        k = 3 if use_toffoli else 2
        picks = rng.choice(len(active), size=k, replace=False)
        wires = [active[int(i)] for i in picks]
        if use_toffoli:
            gates.append(named_gate("TOFFOLI", tuple(wires)))
        elif rng.random() < p_named:
            gates.append(named_gate("CNOT" if rng.random() < 0.5 else "SWAP", tuple(wires)))
        else:
            gates.append(Gate(tuple(wires), haar_unitary(4, rng)))
        keep = wires[int(rng.integers(k))]
        for w in wires:
            if w != keep:
                active.remove(w)
    output = active[0]

    discarded = [w for w in range(n_leaves) if w != output]
    for _ in range(dead_gates):
        if not discarded:
            break
        if len(discarded) >= 2 and rng.random() < 0.6:
            pair = rng.choice(len(discarded), size=2, replace=False)
            wires = (discarded[int(pair[0])], discarded[int(pair[1])])
            gates.append(Gate(wires, haar_unitary(4, rng)))
        else:
            w = discarded[int(rng.integers(len(discarded)))]
            gates.append(Gate((w,), haar_unitary(2, rng)))

    return Circuit(wires=n_leaves, inputs=labels, gates=gates, output=output)
