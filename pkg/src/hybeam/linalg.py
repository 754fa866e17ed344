"""Dense complex-matrix kernels used by every other module.

Matrices are plain complex128 ndarrays in numpy's default row-major layout.
``vec`` stacks columns (Fortran-order reshape), matching the convention that
makes ``vec(N P Q) = (Q^T kron N) vec(P)`` hold.  Callers treat matrices as
opaque values; nothing outside this module depends on memory order.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError, SingularMatrixError

# Relative ridge levels tried, in order, when a Hermitian solve fails.
RIDGE_LADDER = (0.0, 1e-12, 1e-10, 1e-8)

_RESIDUAL_TOL = 1e-8


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product a kron b."""
    return np.kron(np.asarray(a), np.asarray(b))


def vec(a: np.ndarray) -> np.ndarray:
    """Stack the columns of ``a`` into a single vector."""
    return np.asarray(a).reshape(-1, order="F")


def unvec(v: np.ndarray, rows: int) -> np.ndarray:
    """Inverse of :func:`vec`: reshape ``v`` into ``rows`` rows, column-major."""
    v = np.asarray(v).reshape(-1)
    if rows < 1 or v.size % rows != 0:
        raise DimensionError(
            f"vector of length {v.size} cannot be reshaped into {rows} rows"
        )
    return v.reshape(rows, -1, order="F")


def block_diag(blocks) -> np.ndarray:
    """Block-diagonal matrix with ``blocks`` on the diagonal, order preserved."""
    blocks = [np.atleast_2d(np.asarray(b)) for b in blocks]
    if not blocks:
        return np.zeros((0, 0), dtype=complex)
    dtype = np.result_type(*[b.dtype for b in blocks], np.complex128)
    rows = sum(b.shape[0] for b in blocks)
    cols = sum(b.shape[1] for b in blocks)
    out = np.zeros((rows, cols), dtype=dtype)
    r = c = 0
    for b in blocks:
        out[r : r + b.shape[0], c : c + b.shape[1]] = b
        r += b.shape[0]
        c += b.shape[1]
    return out


def hermitian_solve(a: np.ndarray, b: np.ndarray, ridge: float = 0.0) -> np.ndarray:
    """Solve (a + ridge*tr(a)/n * I) X = b for Hermitian ``a``.

    ``ridge`` is relative to the mean diagonal of ``a``; pass 0 for a plain
    solve.  Raises :class:`SingularMatrixError` when the regularized system
    still fails the relative residual check.
    """
    a = np.asarray(a, dtype=complex)
    b_arr = np.asarray(b, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {a.shape}")
    n = a.shape[0]
    scale = np.linalg.norm(a)
    if scale > 0 and np.linalg.norm(a - a.conj().T) > 1e-8 * scale:
        raise ValueError("matrix is not Hermitian within 1e-8 relative tolerance")
    if ridge < 0:
        raise ValueError("ridge must be non-negative")

    a_r = a
    if ridge > 0:
        a_r = a + (ridge * np.trace(a).real / n) * np.eye(n)
    try:
        x = np.linalg.solve(a_r, b_arr)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(str(exc)) from exc
    b_norm = np.linalg.norm(b_arr)
    resid = np.linalg.norm(a_r @ x - b_arr)
    if not np.all(np.isfinite(x)) or resid > _RESIDUAL_TOL * max(b_norm, 1e-300):
        raise SingularMatrixError(
            f"Hermitian solve residual {resid:.3e} exceeds tolerance (ridge={ridge})"
        )
    return x


def solve_psd(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """:func:`hermitian_solve` with the ridge escalated along RIDGE_LADDER."""
    err: Exception | None = None
    for ridge in RIDGE_LADDER:
        try:
            return hermitian_solve(a, b, ridge)
        except SingularMatrixError as exc:
            err = exc
    raise SingularMatrixError(
        f"solve failed at every ridge level {RIDGE_LADDER}: {err}"
    )
