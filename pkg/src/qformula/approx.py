"""Gate truncation and error-bound machinery.

Truncating every gate entry to mu fractional bits gives a matrix that is
delta-close to the original with delta = sqrt(2) * 2^-mu.  Replacing each gate
conjugation by its truncated counterpart perturbs the final density matrix by
at most e^(eta(d, delta) * s) - 1 in trace norm, where eta(d, delta) =
2^(2d+1) * delta * (1 + 2^d * delta) and s is the gate count.  This module
evaluates those bounds, measures the actual deviations, and provides sampled
lower bounds on diamond norms (the upper bounds are analytic; sampling is
one-sided by design).
"""

from __future__ import annotations

import math

import numpy as np

from .circuit import Circuit, NotFormulaError, is_formula, computation_graph
from .linalg import as_cmatrix, op_norm, trace_norm
from .simulator import (
    SuperOp,
    apply_extended,
    assignment_map,
    tree_propagate,
)


def truncate_gate(u, mu: int) -> np.ndarray:
    """Truncate every real and imaginary part toward zero to mu fractional bits.

    The result is delta-close to the input with delta = sqrt(2) * 2^-mu; it is
    generally not unitary.
    """
    if mu < 1:
        raise ValueError("mu must be at least 1")
    u = as_cmatrix(u)
    scale = 2.0**mu
    return (np.trunc(u.real * scale) + 1j * np.trunc(u.imag * scale)) / scale


def delta_for_bits(mu: int) -> float:
    """Entrywise closeness achieved by mu-bit truncation of both parts."""
    return math.sqrt(2.0) * 2.0**-mu


def eta(d: int, delta: float) -> float:
    """Per-gate error functional 2^(2d+1) * delta * (1 + 2^d * delta)."""
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    return float(2 ** (2 * d + 1) * delta * (1 + 2**d * delta))


def circuit_error_bound(d: int, delta: float, s: int) -> float:
    """Accumulated trace-norm error bound e^(eta * s) - 1 for s gates."""
    if s < 0:
        raise ValueError("s must be nonnegative")
    return float(math.expm1(eta(d, delta) * s))


def verify_truncation(f: Circuit, mu: int) -> dict:
    """Exact vs truncated-gate run of a formula over all assignments.

    Returns measured maxima of the final-density trace distance and of
    |p - p~| together with the analytic bound; ``pass`` records whether both
    measurements respect the bound (a False result is not an error here).
    """
    ok, witness = is_formula(f)
    if not ok:
        raise NotFormulaError(witness)
    graph = computation_graph(f)
    s = len(graph.nodes)
    d = max((f.gates[g].arity for g in graph.nodes), default=1)
    delta = delta_for_bits(mu)
    bound = circuit_error_bound(d, delta, s)
    truncated = {g: truncate_gate(f.gates[g].unitary, mu) for g in graph.nodes}
    gate_index = {id(f.gates[g]): g for g in graph.nodes}
    matrix_of = lambda gate: truncated[gate_index[id(gate)]]
    variables = f.variables()
    n = len(variables)
    max_td = 0.0
    max_pd = 0.0
    for row in range(1 << n):
        amap = {variables[i]: (row >> (n - 1 - i)) & 1 for i in range(n)}
        rho = tree_propagate(f, graph, amap)
        rho_t = tree_propagate(f, graph, amap, matrix_of=matrix_of)
        max_td = max(max_td, trace_norm(rho - rho_t))
        max_pd = max(max_pd, abs(float(rho[1, 1].real) - float(rho_t[1, 1].real)))
    return {
        "s": s,
        "d": d,
        "delta": delta,
        "measured_trace_dist": max_td,
        "measured_p_dev": max_pd,
        "bound": bound,
        "pass": bool(max_td <= bound and max_pd <= bound),
    }


def ov_ow_bound(v, w) -> float:
    """Diamond-norm bound 2m ||V-W|| min(||V||, ||W||) + m ||V-W||^2."""
    v = as_cmatrix(v)
    w = as_cmatrix(w)
    if v.shape != w.shape or v.shape[0] != v.shape[1]:
        raise ValueError("ov_ow_bound needs two square matrices of equal size")
    m = v.shape[0]
    dvw = op_norm(v - w)
    return float(2 * m * dvw * min(op_norm(v), op_norm(w)) + m * dvw * dvw)


def _difference(t: SuperOp, r: SuperOp | None) -> SuperOp:
    if r is None:
        return t
    if (t.d_in, t.d_out) != (r.d_in, r.d_out):
        raise ValueError("super-operators must have matching dimensions")
    return SuperOp(d_in=t.d_in, d_out=t.d_out, rep=t.rep - r.rep)


def diamond_lower_bound(
    t: SuperOp, r: SuperOp | None = None, trials: int = 2000, seed: int = 0
) -> float:
    """Sampled lower bound on the diamond norm of T (or of T - R).

    Maximizes ||((T-R) (x) I) A||_Tr / ||A||_Tr over seeded candidates on the
    doubled space: computational basis projectors, the maximally entangled
    state, random pure states and random Hermitian matrices.  The maximum
    found is a certified lower bound; no upper estimate is attempted.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    diff = _difference(t, r)
    din = diff.dim_in
    dg = din
    n = din * dg
    rng = np.random.default_rng(seed)
    candidates = []
    for k in range(n):
        a = np.zeros((n, n), dtype=complex)
        a[k, k] = 1.0
        candidates.append(a)
    phi = np.zeros(n, dtype=complex)
    for i in range(din):
        phi[i * dg + i] = 1.0
    phi /= np.linalg.norm(phi)
    candidates.append(np.outer(phi, phi.conj()))
    for k in range(trials):
        if k % 2 == 0:
            psi = rng.standard_normal(n) + 1j * rng.standard_normal(n)
            psi /= np.linalg.norm(psi)
            candidates.append(np.outer(psi, psi.conj()))
        else:
            m = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
            candidates.append((m + m.conj().T) / 2)
    best = 0.0
    for a in candidates:
        na = trace_norm(a)
        if na < 1e-14:
            continue
        image = apply_extended(diff, a, 1, dg)
        best = max(best, trace_norm(image) / na)
    return float(best)


def star_lower_bound(t: SuperOp, trials: int = 500, seed: int = 0) -> float:
    """Sampled lower bound on the star norm sup ||T A||_Tr / ||A||_Tr.

    Candidates include density matrices (for a trace-preserving map with a
    positive image the ratio is exactly 1, witnessing the lower direction).
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    din = t.dim_in
    rng = np.random.default_rng(seed)
    candidates = [np.eye(din, dtype=complex) / din]
    for k in range(din):
        a = np.zeros((din, din), dtype=complex)
        a[k, k] = 1.0
        candidates.append(a)
    for k in range(trials):
        if k % 2 == 0:
            psi = rng.standard_normal(din) + 1j * rng.standard_normal(din)
            psi /= np.linalg.norm(psi)
            candidates.append(np.outer(psi, psi.conj()))
        else:
            m = rng.standard_normal((din, din)) + 1j * rng.standard_normal((din, din))
            candidates.append((m + m.conj().T) / 2)
    best = 0.0
    for a in candidates:
        na = trace_norm(a)
        if na < 1e-14:
            continue
        best = max(best, trace_norm(t.apply(a)) / na)
    return float(best)


def mu_paper(ell: int, eps: float) -> int:
    """Bit count ceil(log2(ell) - log2(eps)) from the headline size statement."""
    if ell < 1 or eps <= 0:
        raise ValueError("need ell >= 1 and eps > 0")
    return max(1, math.ceil(math.log2(ell) - math.log2(eps)))


def mu_for_error(d: int, s: int, eps: float) -> int:
    """Smallest mu whose truncation bound e^(eta*s)-1 stays below eps."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    mu = 1
    while mu < 128 and circuit_error_bound(d, delta_for_bits(mu), s) > eps:
        mu += 1
    return mu
