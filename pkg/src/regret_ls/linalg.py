"""Dense complex linear algebra primitives shared by every other module.

Conventions
-----------
* Matrices are ``numpy.ndarray`` with dtype ``complex128`` and row-major
  (C-order) layout; vectors are one-dimensional arrays.
* ``col_stack`` vectorizes by stacking columns (Fortran order), so the
  identity ``(x^T kron I) col_stack(dH) == col_stack(dH @ x) == dH @ x``
  holds exactly for conformable ``dH`` and ``x``.
* JSON serialization of a complex m x n matrix is
  ``{"rows": m, "cols": n, "data": [[re, im], ...]}`` with ``data`` listing
  the entries in row-major order.  All modules share this format.

Only dense, desk-scale problems are in scope, so everything below delegates
the heavy lifting to LAPACK through numpy and adds the validation, the
thresholding rules, and the serialization contract that callers rely on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class SvdConvergenceError(RuntimeError):
    """Raised when the underlying SVD iteration fails to converge."""

    def __init__(self, message: str, iterations: int = -1):
        super().__init__(message)
        self.iterations = iterations


def complex_matrix(data, rows: int | None = None, cols: int | None = None) -> np.ndarray:
    """Build a validated complex matrix from user input.

    Parameters
    ----------
    data : array_like
        Anything ``numpy.asarray`` accepts; coerced to ``complex128``.
    rows, cols : int, optional
        Expected shape; a mismatch raises ``ValueError``.

    Returns
    -------
    numpy.ndarray
        A two-dimensional C-contiguous ``complex128`` array with all
        entries finite.
    """
    a = np.ascontiguousarray(np.asarray(data, dtype=np.complex128))
    if a.ndim == 1:
        a = a.reshape(1, -1) if rows == 1 else a.reshape(-1, 1)
    if a.ndim != 2:
        raise ValueError(f"expected a matrix, got array with ndim={a.ndim}")
    if rows is not None and a.shape[0] != rows:
        raise ValueError(f"expected {rows} rows, got {a.shape[0]}")
    if cols is not None and a.shape[1] != cols:
        raise ValueError(f"expected {cols} columns, got {a.shape[1]}")
    if not np.all(np.isfinite(a.view(np.float64))):
        raise ValueError("matrix entries must be finite")
    return a


def complex_vector(data, length: int | None = None) -> np.ndarray:
    """Build a validated one-dimensional complex vector."""
    v = np.ascontiguousarray(np.asarray(data, dtype=np.complex128)).reshape(-1)
    if length is not None and v.shape[0] != length:
        raise ValueError(f"expected length {length}, got {v.shape[0]}")
    if not np.all(np.isfinite(v.view(np.float64))):
        raise ValueError("vector entries must be finite")
    return v


@dataclass(frozen=True)
class SvdFactors:
    """Full SVD ``A = U @ diag(singular_values) @ V.conj().T`` (rectangular diag).

    ``U`` is m x m, ``V`` is n x n, ``singular_values`` has length min(m, n)
    in nonincreasing order.  ``rank_tolerance`` is the threshold below which
    singular values are treated as zero by consumers such as
    ``pseudo_inverse`` and ``numerical_rank``.
    """

    U: np.ndarray
    singular_values: np.ndarray
    V: np.ndarray
    rank_tolerance: float

    @property
    def shape(self) -> tuple[int, int]:
        return (self.U.shape[0], self.V.shape[0])

    def reconstruct(self) -> np.ndarray:
        m, n = self.shape
        sigma = np.zeros((m, n))
        k = len(self.singular_values)
        sigma[:k, :k] = np.diag(self.singular_values)
        return self.U @ sigma @ self.V.conj().T


def default_rank_tolerance(shape: tuple[int, int], sigma_max: float) -> float:
    """Conventional rank threshold max(m, n) * eps * sigma_max."""
    return max(shape) * np.finfo(np.float64).eps * sigma_max


def svd(a) -> SvdFactors:
    """Full singular value decomposition of a complex matrix.

    Deterministic for a given input.  Raises ``SvdConvergenceError`` if the
    LAPACK iteration does not converge (rare; carries the iteration cap).
    """
    a = complex_matrix(a)
    try:
        u, s, vh = np.linalg.svd(a, full_matrices=True)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - hard to trigger
        raise SvdConvergenceError(str(exc)) from exc
    sigma_max = float(s[0]) if s.size else 0.0
    tol = default_rank_tolerance(a.shape, sigma_max)
    return SvdFactors(U=u, singular_values=s, V=vh.conj().T, rank_tolerance=tol)


def numerical_rank(a, tol: float | None = None) -> int:
    """Number of singular values above ``tol`` (default tolerance rule)."""
    f = a if isinstance(a, SvdFactors) else svd(a)
    s = f.singular_values
    if tol is None:
        tol = f.rank_tolerance
    return int(np.count_nonzero(s > tol))


def pseudo_inverse(a, tol: float | None = None) -> np.ndarray:
    """Moore-Penrose pseudo-inverse with singular values below ``tol`` zeroed.

    ``tol`` defaults to ``max(m, n) * eps * sigma_max``.  Rank deficiency is
    handled by thresholding; callers that require full rank must check via
    ``numerical_rank``.
    """
    f = a if isinstance(a, SvdFactors) else svd(a)
    if tol is None:
        tol = f.rank_tolerance
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    s = f.singular_values
    inv = np.where(s > tol, 1.0 / np.where(s > tol, s, 1.0), 0.0)
    k = len(s)
    return f.V[:, :k] @ (inv[:, None] * f.U[:, :k].conj().T)


def spectral_norm(a) -> float:
    """Largest singular value; zero for an empty matrix."""
    a = np.asarray(a, dtype=np.complex128)
    if a.size == 0:
        return 0.0
    if a.ndim == 1:
        return float(np.linalg.norm(a))
    return float(np.linalg.norm(a, 2))


def projection_perp(h, tol: float | None = None) -> np.ndarray:
    """Orthogonal projector onto the complement of the column space.

    For an m x n matrix ``h`` with m >= n returns ``I - h @ pinv(h)``,
    Hermitian and idempotent, annihilating ``range(h)``.
    """
    h = complex_matrix(h)
    m, n = h.shape
    if m < n:
        raise ValueError(f"projection_perp requires m >= n, got {m} < {n}")
    p = np.eye(m, dtype=np.complex128) - h @ pseudo_inverse(h, tol)
    # round off the anti-Hermitian noise so P == P^H holds to machine precision
    return 0.5 * (p + p.conj().T)


def kron(a, b) -> np.ndarray:
    """Kronecker product."""
    return np.kron(np.asarray(a, dtype=np.complex128), np.asarray(b, dtype=np.complex128))


def col_stack(a) -> np.ndarray:
    """Vectorize by stacking columns: 2x2 [[1,3],[2,4]] -> (1, 2, 3, 4)."""
    a = np.asarray(a, dtype=np.complex128)
    if a.ndim != 2:
        raise ValueError("col_stack expects a matrix")
    return a.reshape(-1, order="F").copy()


def col_unstack(v, m: int, n: int) -> np.ndarray:
    """Inverse of ``col_stack``: reshape a length m*n vector to m x n."""
    v = np.asarray(v, dtype=np.complex128).reshape(-1)
    if v.size != m * n:
        raise ValueError(f"cannot unstack length-{v.size} vector to {m}x{n}")
    return np.ascontiguousarray(v.reshape((m, n), order="F"))


def matrix_to_json(a) -> dict:
    """Serialize to the shared ``{"rows", "cols", "data"}`` JSON object."""
    a = np.asarray(a, dtype=np.complex128)
    vec = a.ndim == 1
    if vec:
        a = a.reshape(-1, 1)
    return {
        "rows": int(a.shape[0]),
        "cols": int(a.shape[1]),
        "data": [[float(z.real), float(z.imag)] for z in a.reshape(-1)],
    }


def matrix_from_json(obj: dict) -> np.ndarray:
    """Parse the shared JSON matrix object; validates shape and finiteness."""
    try:
        rows, cols, data = int(obj["rows"]), int(obj["cols"]), obj["data"]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed matrix object: {exc}") from exc
    if rows < 0 or cols < 0:
        raise ValueError("matrix dimensions must be nonnegative")
    if len(data) != rows * cols:
        raise ValueError(f"expected {rows * cols} entries, got {len(data)}")
    flat = np.array([complex(re, im) for re, im in data], dtype=np.complex128)
    return complex_matrix(flat.reshape(rows, cols))


def vector_from_json(obj: dict) -> np.ndarray:
    """Parse a JSON matrix object that must be a column or row vector."""
    a = matrix_from_json(obj)
    if 1 not in a.shape and a.size != 0:
        raise ValueError(f"expected a vector, got shape {a.shape}")
    return a.reshape(-1)
