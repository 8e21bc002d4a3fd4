"""Dense complex linear algebra kernel.

Tensor products, partial traces, the three matrix norms used throughout the
package (entry norm, operator norm, trace norm) and Gram-Schmidt
orthonormalization with completion.  Everything operates on plain numpy
arrays with complex128 entries; all functions are pure.
"""

from __future__ import annotations

import numpy as np

from .config import RANK_TOL, TOL


def as_cmatrix(a) -> np.ndarray:
    """Coerce ``a`` to a finite complex matrix.

    Raises ValueError on NaN or Inf entries.
    """
    m = np.asarray(a, dtype=complex)
    if not np.all(np.isfinite(m.real)) or not np.all(np.isfinite(m.imag)):
        raise ValueError("matrix has non-finite entries")
    return m


def dagger(a) -> np.ndarray:
    """Conjugate transpose."""
    return np.conj(np.asarray(a, dtype=complex)).T


def kron(a, b) -> np.ndarray:
    """Tensor product: entry ((i1,i2),(j1,j2)) equals a[i1,j1] * b[i2,j2]."""
    return np.kron(as_cmatrix(a), as_cmatrix(b))


def kron_all(mats) -> np.ndarray:
    """Tensor product of a sequence of matrices, left factor most significant."""
    out = np.array([[1.0 + 0.0j]])
    for m in mats:
        out = np.kron(out, as_cmatrix(m))
    return out


def partial_trace(rho, factor_dims, keep) -> np.ndarray:
    """Trace out all tensor factors of ``rho`` not listed in ``keep``.

    Parameters
    ----------
    rho : square matrix on the product space of ``factor_dims``.
    factor_dims : dimensions of the tensor factors, in order.
    keep : indices (0-based) of the factors to keep; must be nonempty.

    The (u1, u2) entry of the result is the sum over the traced basis of the
    matching entries of ``rho``.
    """
    rho = as_cmatrix(rho)
    dims = [int(d) for d in factor_dims]
    keep = sorted(set(int(k) for k in keep))
    n = len(dims)
    total = 1
    for d in dims:
        total *= d
    if rho.shape != (total, total):
        raise ValueError(
            f"dimension mismatch: rho is {rho.shape}, factors give {total}"
        )
    if not keep:
        raise ValueError("keep must be nonempty")
    if keep[0] < 0 or keep[-1] >= n:
        raise ValueError(f"keep indices out of range for {n} factors")
    t = rho.reshape(dims + dims)
    row = list(range(n))
    col = [i + n if i in keep else i for i in range(n)]
    out = [i for i in keep] + [i + n for i in keep]
    red = np.einsum(t, row + col, out)
    d_keep = 1
    for i in keep:
        d_keep *= dims[i]
    return red.reshape(d_keep, d_keep)


def singular_values(a) -> np.ndarray:
    """Singular values of ``a`` in descending order."""
    return np.linalg.svd(as_cmatrix(a), compute_uv=False)


def m_norm(a) -> float:
    """Entry norm of a square m-by-m matrix: m * max |a_ij|."""
    m = as_cmatrix(a)
    if m.shape[0] != m.shape[1]:
        raise ValueError("m_norm requires a square matrix")
    return float(m.shape[0] * np.max(np.abs(m)))


def op_norm(a) -> float:
    """Operator norm: largest singular value."""
    sv = singular_values(a)
    return float(sv[0]) if sv.size else 0.0


def trace_norm(a) -> float:
    """Trace norm: sum of singular values."""
    return float(np.sum(singular_values(a)))


def norms(a) -> dict:
    """All three matrix norms of a square matrix as a dict."""
    m = as_cmatrix(a)
    if m.shape[0] != m.shape[1]:
        raise ValueError("norms requires a square matrix")
    sv = np.linalg.svd(m, compute_uv=False)
    return {
        "m_norm": float(m.shape[0] * np.max(np.abs(m))) if m.size else 0.0,
        "op_norm": float(sv[0]) if sv.size else 0.0,
        "trace_norm": float(np.sum(sv)),
    }


def trace_distance(a, b) -> float:
    """Trace norm of a - b."""
    return trace_norm(as_cmatrix(a) - as_cmatrix(b))


def unitarity_residual(u) -> float:
    """Operator-norm distance of U†U from the identity."""
    u = as_cmatrix(u)
    return op_norm(dagger(u) @ u - np.eye(u.shape[1]))


def check_state_vector(psi, tol: float = TOL) -> np.ndarray:
    """Validate that ``psi`` is a unit vector; returns it as a complex array."""
    v = np.asarray(psi, dtype=complex).reshape(-1)
    if not np.all(np.isfinite(v.real)) or not np.all(np.isfinite(v.imag)):
        raise ValueError("state vector has non-finite entries")
    nrm = np.linalg.norm(v)
    if abs(nrm - 1.0) > tol:
        raise ValueError(f"state vector norm {nrm} deviates from 1 beyond {tol}")
    return v


def check_density_matrix(rho, tol: float = TOL) -> np.ndarray:
    """Validate hermiticity, unit trace and positivity of ``rho``."""
    m = as_cmatrix(rho)
    if m.shape[0] != m.shape[1]:
        raise ValueError("density matrix must be square")
    if op_norm(m - dagger(m)) > tol:
        raise ValueError("density matrix is not Hermitian within tolerance")
    tr = np.trace(m)
    if abs(tr - 1.0) > tol:
        raise ValueError(f"density matrix trace {tr} deviates from 1")
    evals = np.linalg.eigvalsh((m + dagger(m)) / 2)
    if np.min(evals) < -tol:
        raise ValueError(f"density matrix has negative eigenvalue {np.min(evals)}")
    return m


def gram_schmidt_extend(vectors, ambient_dim: int, rank_tol: float = RANK_TOL):
    """Orthonormalize ``vectors`` and extend the result to a full basis.

    Returns ``(basis, coeffs, completion)``:

    * ``basis`` -- orthonormal vectors spanning the span of the inputs; zero
      or linearly dependent inputs contribute no basis element (drop decided
      by ``rank_tol``).
    * ``coeffs`` -- array of shape (len(vectors), len(basis)) with
      ``vectors[k] == sum_j coeffs[k, j] * basis[j]`` up to round-off.
    * ``completion`` -- orthonormal vectors extending ``basis`` to all of
      C^ambient_dim, orthogonalized from the standard basis in index order.
    """
    basis: list[np.ndarray] = []
    rows: list[list[complex]] = []
    for v in vectors:
        v = np.asarray(v, dtype=complex).reshape(-1)
        if v.shape[0] != ambient_dim:
            raise ValueError("vector dimension does not match ambient_dim")
        coeff = [complex(np.vdot(b, v)) for b in basis]
        r = v - sum((c * b for c, b in zip(coeff, basis)), np.zeros(ambient_dim, complex))
        # Second orthogonalization pass for numerical robustness.
        for j, b in enumerate(basis):
            c2 = complex(np.vdot(b, r))
            r = r - c2 * b
            coeff[j] += c2
        nr = float(np.linalg.norm(r))
        if nr > rank_tol * max(1.0, float(np.linalg.norm(v))):
            basis.append(r / nr)
            coeff.append(nr)
        rows.append(coeff)
    d = len(basis)
    coeffs = np.zeros((len(rows), d), dtype=complex)
    for k, row in enumerate(rows):
        coeffs[k, : len(row)] = row
    completion: list[np.ndarray] = []
    for k in range(ambient_dim):
        if d + len(completion) == ambient_dim:
            break
        e = np.zeros(ambient_dim, dtype=complex)
        e[k] = 1.0
        for _ in range(2):
            for b in basis:
                e = e - np.vdot(b, e) * b
            for b in completion:
                e = e - np.vdot(b, e) * b
        ne = float(np.linalg.norm(e))
        if ne > rank_tol:
            completion.append(e / ne)
    if d + len(completion) != ambient_dim:
        raise ValueError("failed to complete basis to ambient dimension")
    return basis, coeffs, completion
