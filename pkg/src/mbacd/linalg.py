"""Dense symmetric matrix primitives.

Everything here works on plain ``numpy`` arrays. Symmetric matrices are
validated (and exactly symmetrized) by :func:`as_symmetric`; positive diagonal
weights by :func:`as_weights`.
"""
import logging
from pathlib import Path

import numpy as np
from scipy import linalg as sla

log = logging.getLogger(__name__)

DENSE_LIMIT = 512
SYMMETRY_RTOL = 1e-12


def as_symmetric(A):
    """Return ``A`` as a float array symmetrized as ``(A + A.T) / 2``.

    Raises ``ValueError`` for non-square input, non-finite entries or an
    asymmetry larger than ``1e-12`` relative to the largest entry.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
        raise ValueError(f"expected a non-empty square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    scale = np.max(np.abs(A))
    if np.max(np.abs(A - A.T)) > SYMMETRY_RTOL * max(scale, 1.0):
        raise ValueError("matrix is not symmetric")
    return (A + A.T) / 2


def as_weights(d, n=None):
    d = np.asarray(d, dtype=float)
    if d.ndim != 1:
        raise ValueError("diagonal weights must be a vector")
    if n is not None and d.shape[0] != n:
        raise ValueError(f"expected {n} weights, got {d.shape[0]}")
    if not np.all(np.isfinite(d)) or np.any(d <= 0):
        raise ValueError("diagonal weights must be finite and positive")
    return d


def power_iteration(A, tol=1e-10, maxiter=None, v0=None):
    """Largest eigenpair of a symmetric PSD matrix by power iteration.

    Returns ``(eigval, eigvec, residual, iterations)`` where ``residual`` is
    ``||A v - eigval v|| / eigval`` at exit. Stops once that residual is at
    most ``tol`` (for symmetric ``A`` the Rayleigh quotient is then within
    ``tol * eigval`` of an eigenvalue), or after ``maxiter`` (default ``10 n``)
    iterations.
    """
    n = A.shape[0]
    maxiter = 10 * n if maxiter is None else maxiter
    v = np.ones(n) if v0 is None else np.asarray(v0, dtype=float).copy()
    # the all-ones start can be orthogonal to the top eigenvector
    v += np.linspace(0.0, 1e-3, n)
    v /= np.linalg.norm(v)
    Av = A @ v
    eigval = float(v @ Av)
    residual = np.inf
    it = 0
    for it in range(1, maxiter + 1):
        norm = np.linalg.norm(Av)
        if norm == 0.0:
            return 0.0, v, 0.0, it
        v = Av / norm
        Av = A @ v
        eigval = float(v @ Av)
        residual = np.linalg.norm(Av - eigval * v) / max(abs(eigval), np.finfo(float).tiny)
        if residual <= tol:
            break
    if residual > tol:
        log.warning("power iteration hit %d iterations, residual %.3e", maxiter, residual)
    return eigval, v, residual, it


def _gershgorin_lower(A):
    radius = np.sum(np.abs(A), axis=1) - np.abs(np.diag(A))
    return float(np.min(np.diag(A) - radius))


def lambda_max(A, tol=1e-10):
    """Largest eigenvalue of a symmetric matrix."""
    if not 0 < tol < 1:
        raise ValueError("tol must lie in (0, 1)")
    A = as_symmetric(A)
    n = A.shape[0]
    if n <= DENSE_LIMIT:
        return float(sla.eigvalsh(A, subset_by_index=[n - 1, n - 1])[0])
    shift = min(_gershgorin_lower(A), 0.0)
    val, *_ = power_iteration(A - shift * np.eye(n), tol=tol)
    return val + shift


def lambda_min(A, tol=1e-10):
    """Smallest eigenvalue of a symmetric matrix."""
    if not 0 < tol < 1:
        raise ValueError("tol must lie in (0, 1)")
    A = as_symmetric(A)
    n = A.shape[0]
    if n <= DENSE_LIMIT:
        return float(sla.eigvalsh(A, subset_by_index=[0, 0])[0])
    top = lambda_max(A, tol)
    val, *_ = power_iteration(top * np.eye(n) - A, tol=tol)
    return top - val


def hadamard(A, B):
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape != B.shape:
        raise ValueError(f"dimension mismatch: {A.shape} vs {B.shape}")
    return A * B


def diag_scale(d1, A, d2):
    """Return ``Diag(d1) @ A @ Diag(d2)`` without forming the diagonals."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    d1 = as_weights(d1, n)
    d2 = as_weights(d2, A.shape[1])
    # outer product first so symmetric inputs give bitwise-symmetric output
    return np.outer(d1, d2) * A


def read_matrix(path):
    """Read the text matrix format: a line with ``n`` then ``n`` rows of ``n`` numbers."""
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty matrix file")
    try:
        n = int(lines[0].strip())
    except ValueError:
        raise ValueError(f"{path}: first line must be the dimension n") from None
    if n < 1 or len(lines) != n + 1:
        raise ValueError(f"{path}: expected {n} matrix rows, found {len(lines) - 1}")
    rows = []
    for lineno, ln in enumerate(lines[1:], start=2):
        try:
            row = [float(tok) for tok in ln.split()]
        except ValueError:
            raise ValueError(f"{path}:{lineno}: non-numeric entry") from None
        if len(row) != n:
            raise ValueError(f"{path}:{lineno}: expected {n} entries, got {len(row)}")
        rows.append(row)
    return as_symmetric(np.array(rows))


def write_matrix(A, path):
    A = np.asarray(A, dtype=float)
    with open(path, "w") as fh:
        fh.write(f"{A.shape[0]}\n")
        for row in A:
            fh.write(" ".join(repr(float(x)) for x in row) + "\n")


def is_psd(A, rtol=1e-9):
    A = as_symmetric(A)
    scale = max(np.max(np.abs(A)), 1.0)
    return lambda_min(A) >= -rtol * scale


__all__ = [
    "as_symmetric",
    "as_weights",
    "diag_scale",
    "hadamard",
    "is_psd",
    "lambda_max",
    "lambda_min",
    "power_iteration",
    "read_matrix",
    "write_matrix",
]
