"""Eigenvalue machinery for compiled clock Hamiltonians.

The dense path is a self-contained Hermitian solver: Householder reduction
to real symmetric tridiagonal form followed by implicit-shift QL iteration
(the QL inner loop is numba-compiled when available, with a pure-Python
fallback).  Real symmetric input is detected and solved in real arithmetic,
which all the circuit-family Hamiltonians permit.  The iterative path is a
deflated-restart Lanczos iteration with full reorthogonalization for the
lowest eigenvalues of large sparse PSD matrices.

Kernel bookkeeping: eigenvalues below ``kernel_tol`` count as kernel;
``lambda_min_nonzero`` is the first eigenvalue above it.  The gap extraction
refuses to answer (AmbiguousKernelEdge) when an eigenvalue sits within a
factor 10 of the threshold, since the kernel/gap split is then noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

try:
    from numba import njit as _njit
except ImportError:  # pragma: no cover - numba is a declared dependency
    _njit = None

_EPS = float(np.finfo(np.float64).eps)
KERNEL_REL_TOL = 1e-10
DENSE_LIMIT_DEFAULT = 10_000


class DimensionTooLarge(RuntimeError):
    """Dense diagonalization refused above the configured dimension."""


class NoConvergence(RuntimeError):
    """Iteration budget exhausted; carries the iteration count."""

    def __init__(self, message: str, iterations: int):
        super().__init__(f"{message} (after {iterations} iterations)")
        self.iterations = iterations


class AmbiguousKernelEdge(RuntimeError):
    """An eigenvalue sits at the kernel threshold; the gap is untrustworthy."""


# --------------------------------------------------------------------------
# dense path: Householder tridiagonalization + implicit-shift QL


def _tridiag_dense_py(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # full-matrix Householder sweep; one scratch buffer fuses the rank-2 update
    n = a.shape[0]
    sub = np.zeros(n - 1, dtype=a.dtype)
    buf = np.empty((n - 1, n - 1), dtype=a.dtype)
    for k in range(n - 2):
        x = a[k + 1 :, k]
        nx = np.linalg.norm(x)
        if nx == 0.0:
            continue
        x0 = x[0]
        phase = x0 / abs(x0) if abs(x0) != 0.0 else 1.0
        alpha = -phase * nx
        v = x.copy()
        v[0] -= alpha
        nv = np.linalg.norm(v)
        if nv == 0.0:
            sub[k] = alpha
            continue
        v /= nv
        block = a[k + 1 :, k + 1 :]
        w = 2.0 * (block @ v)
        w -= np.vdot(v, w) * v
        m = n - k - 1
        t = buf[:m, :m]
        np.multiply(v[:, None], w.conj()[None, :], out=t)
        t += np.multiply(w[:, None], v.conj()[None, :])
        block -= t
        sub[k] = alpha
    sub[n - 2] = a[n - 1, n - 2]
    return np.diag(a).real.copy(), np.abs(sub)


def _tridiag_lower_real_py(a):
    """Real symmetric Householder sweep touching only the lower triangle.

    The Householder vector of step k is stored in column k below the
    diagonal, so no extra matrix storage is needed; ``a`` is destroyed.
    """
    n = a.shape[0]
    e = np.zeros(n - 1)
    w = np.zeros(n)
    for k in range(n - 2):
        nx2 = 0.0
        for i in range(k + 1, n):
            nx2 += a[i, k] * a[i, k]
        nx = np.sqrt(nx2)
        if nx == 0.0:
            continue
        alpha = -nx if a[k + 1, k] >= 0.0 else nx
        a[k + 1, k] -= alpha
        nv2 = 0.0
        for i in range(k + 1, n):
            nv2 += a[i, k] * a[i, k]
        nv = np.sqrt(nv2)
        if nv == 0.0:
            e[k] = alpha
            continue
        for i in range(k + 1, n):
            a[i, k] /= nv
        for i in range(k + 1, n):
            w[i] = 0.0
        for i in range(k + 1, n):
            vi = a[i, k]
            s = a[i, i] * vi
            for j in range(k + 1, i):
                s += a[i, j] * a[j, k]
                w[j] += a[i, j] * vi
            w[i] += s
        for i in range(k + 1, n):
            w[i] *= 2.0
        dot = 0.0
        for i in range(k + 1, n):
            dot += a[i, k] * w[i]
        for i in range(k + 1, n):
            w[i] -= dot * a[i, k]
        for i in range(k + 1, n):
            vi = a[i, k]
            wi = w[i]
            for j in range(k + 1, i + 1):
                a[i, j] -= vi * w[j] + wi * a[j, k]
        e[k] = alpha
    e[n - 2] = a[n - 1, n - 2]
    d = np.zeros(n)
    for i in range(n):
        d[i] = a[i, i]
    return d, np.abs(e)


def householder_tridiagonal(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Reduce a Hermitian (or real symmetric) matrix to tridiagonal form.

    Returns (d, e): the real diagonal and the real non-negative subdiagonal
    of a unitarily similar matrix.  Complex subdiagonals are made real by a
    diagonal phase similarity, which leaves the spectrum untouched.  ``a``
    is destroyed.
    """
    n = a.shape[0]
    if n == 1:
        return np.array([a[0, 0].real]), np.zeros(0)
    if not np.iscomplexobj(a) and _tridiag_lower_real is not _tridiag_lower_real_py:
        return _tridiag_lower_real(np.ascontiguousarray(a, dtype=np.float64))
    return _tridiag_dense_py(a)


def _tql_values_py(d, e0):
    """Eigenvalues of a real symmetric tridiagonal matrix by implicit QL."""
    n = d.size
    d = d.copy()
    e = np.zeros(n)
    e[: n - 1] = e0
    for l in range(n):
        iters = 0
        while True:
            m = l
            while m < n - 1:
                if abs(e[m]) <= _EPS * (abs(d[m]) + abs(d[m + 1])):
                    break
                m += 1
            if m == l:
                break
            iters += 1
            if iters > 50:
                raise RuntimeError("tridiagonal QL failed to converge")
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = np.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + (r if g >= 0.0 else -r))
            s = 1.0
            c = 1.0
            p = 0.0
            underflow = False
            for i in range(m - 1, l - 1, -1):
                f = s * e[i]
                b = c * e[i]
                r = np.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    underflow = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
            if not underflow:
                d[l] -= p
                e[l] = g
                e[m] = 0.0
    return np.sort(d)


def _tql_vectors_py(d, e0):
    """Eigenvalues and eigenvectors of a real symmetric tridiagonal matrix."""
    n = d.size
    d = d.copy()
    e = np.zeros(n)
    e[: n - 1] = e0
    z = np.eye(n)
    for l in range(n):
        iters = 0
        while True:
            m = l
            while m < n - 1:
                if abs(e[m]) <= _EPS * (abs(d[m]) + abs(d[m + 1])):
                    break
                m += 1
            if m == l:
                break
            iters += 1
            if iters > 50:
                raise RuntimeError("tridiagonal QL failed to converge")
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = np.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + (r if g >= 0.0 else -r))
            s = 1.0
            c = 1.0
            p = 0.0
            underflow = False
            for i in range(m - 1, l - 1, -1):
                f = s * e[i]
                b = c * e[i]
                r = np.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    underflow = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                for kk in range(n):
                    f = z[kk, i + 1]
                    z[kk, i + 1] = s * z[kk, i] + c * f
                    z[kk, i] = c * z[kk, i] - s * f
            if not underflow:
                d[l] -= p
                e[l] = g
                e[m] = 0.0
    order = np.argsort(d)
    return d[order], z[:, order]


if _njit is not None:
    _tql_values = _njit(cache=True)(_tql_values_py)
    _tql_vectors = _njit(cache=True)(_tql_vectors_py)
    _tridiag_lower_real = _njit(cache=True)(_tridiag_lower_real_py)
else:  # pragma: no cover
    _tql_values = _tql_values_py
    _tql_vectors = _tql_vectors_py
    _tridiag_lower_real = _tridiag_lower_real_py


def dense_eigenvalues(matrix: np.ndarray) -> np.ndarray:
    """All eigenvalues of a Hermitian matrix, ascending."""
    a = np.asarray(matrix)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if np.iscomplexobj(a):
        # real symmetric input is common here; solve it in real arithmetic
        a = a.real.astype(np.float64, copy=True) if not a.imag.any() else a.astype(complex)
    else:
        a = a.astype(np.float64, copy=True)
    d, e = householder_tridiagonal(a)
    return _tql_values(d, e)


# --------------------------------------------------------------------------
# iterative path: deflated-restart Lanczos with full reorthogonalization


def _is_real_sparse(a: sp.spmatrix) -> bool:
    return not (np.iscomplexobj(a.data) and np.abs(a.data.imag).max(initial=0.0) > 0.0)


def lanczos_lowest(
    a: sp.spmatrix,
    k: int,
    conv_tol: float = 1e-12,
    restart_len: int | None = None,
    max_restarts: int = 200,
    seed: int = 7,
    multiplicity: bool = False,
) -> np.ndarray:
    """The k lowest eigenvalues of a Hermitian sparse matrix, ascending.

    Lanczos recurrence with full (twice-repeated) reorthogonalization against
    the current basis and all previously converged Ritz vectors; after each
    cycle the converged ascending prefix of Ritz pairs is locked and the
    iteration restarts from a blend of the unconverged low Ritz vectors.  The
    start vector is seeded, so results are deterministic.

    A Krylov space built from one vector meets each eigenvalue once; copies
    of a degenerate eigenvalue only reappear through deflation restarts.  By
    default the iteration therefore stops as soon as k values are locked,
    counting a degenerate kernel once (the cheap gap-finding mode).  With
    ``multiplicity=True`` restarts continue until no deflated Ritz value
    converges below the current k-th smallest locked value, which recovers
    the true lowest k with multiplicity at the cost of roughly one restart
    per degenerate copy.
    """
    a = a.tocsc()
    dim = a.shape[0]
    if not 1 <= k <= dim:
        raise ValueError(f"k={k} outside 1..{dim}")
    real = _is_real_sparse(a)
    if real:
        a = a.real.astype(np.float64)
    dtype = np.float64 if real else np.complex128
    m = restart_len if restart_len is not None else min(dim, max(120, k + 40))
    rng = np.random.default_rng(seed)

    def fresh_vector():
        v = rng.standard_normal(dim)
        if not real:
            v = v + 1j * rng.standard_normal(dim)
        return v.astype(dtype)

    locked_vals: list[float] = []
    locked_vecs: list[np.ndarray] = []
    start = fresh_vector()
    total_iters = 0
    probe_pending = False
    for _cycle in range(max_restarts):
        lock_mat = np.stack(locked_vecs, axis=1) if locked_vecs else None
        v = start.astype(dtype)
        for _ in range(2):
            if lock_mat is not None:
                v -= lock_mat @ (lock_mat.conj().T @ v)
        nv = np.linalg.norm(v)
        if nv < 1e-12:
            start = fresh_vector()
            continue
        v = v / nv
        basis = np.empty((dim, m), dtype=dtype)
        alphas = np.zeros(m)
        betas = np.zeros(m)
        v_prev = None
        j = 0
        breakdown = False
        while j < m:
            basis[:, j] = v
            w = a @ v
            alphas[j] = np.vdot(v, w).real
            w = w - alphas[j] * v
            if v_prev is not None:
                w = w - betas[j - 1] * v_prev
            for _ in range(2):
                w -= basis[:, : j + 1] @ (basis[:, : j + 1].conj().T @ w)
                if lock_mat is not None:
                    w -= lock_mat @ (lock_mat.conj().T @ w)
            betas[j] = np.linalg.norm(w)
            total_iters += 1
            scale = max(np.max(np.abs(alphas[: j + 1])), np.max(betas[: j + 1]), 1.0)
            if betas[j] <= 1e-14 * scale:
                breakdown = True
                j += 1
                break
            v_prev = v
            v = w / betas[j]
            j += 1
        used = j
        theta, s_mat = _tql_vectors(alphas[:used], betas[: used - 1])
        beta_last = 0.0 if breakdown else betas[used - 1]
        residuals = beta_last * np.abs(s_mat[used - 1, :])
        scale = max(float(np.max(np.abs(theta))), 1.0)
        tol_abs = conv_tol * scale
        margin = 10.0 * tol_abs
        min_converged_this_cycle = None
        i = 0
        while i < used and residuals[i] <= tol_abs:
            if min_converged_this_cycle is None:
                min_converged_this_cycle = float(theta[i])
            if len(locked_vals) >= k and not multiplicity:
                break
            if multiplicity and len(locked_vals) >= k:
                kth = np.sort(np.array(locked_vals))[k - 1]
                if theta[i] >= kth - margin:
                    break
            y = basis[:, :used] @ s_mat[:, i]
            if lock_mat is not None:
                for _ in range(2):
                    y -= lock_mat @ (lock_mat.conj().T @ y)
            ny = np.linalg.norm(y)
            if ny < 1e-10:
                break
            locked_vals.append(float(theta[i]))
            locked_vecs.append(y / ny)
            lock_mat = np.stack(locked_vecs, axis=1)
            i += 1
        if len(locked_vals) >= k:
            if not multiplicity:
                return np.sort(np.array(locked_vals))[:k]
            kth = np.sort(np.array(locked_vals))[k - 1]
            # stability probe: a fresh random start overlaps any remaining
            # eigenvector, so a cycle whose whole Ritz set (converged or not)
            # sits at or above the k-th locked value proves nothing smaller
            # is left in the deflated space
            probing = _cycle > 0 and bool(probe_pending)
            if (
                probing
                and min_converged_this_cycle is not None
                and min_converged_this_cycle >= kth - margin
                and float(theta[0]) >= kth - margin
            ):
                return np.sort(np.array(locked_vals))[:k]
            probe_pending = True
            start = fresh_vector()
        elif i < used and not breakdown:
            # blend the remaining low Ritz vectors so all of them keep refining
            probe_pending = False
            take = min(used - i, max(k - len(locked_vals), 1))
            start = basis[:, :used] @ s_mat[:, i : i + take].sum(axis=1)
        else:
            # invariant subspace exhausted; continue in the deflated complement
            probe_pending = False
            start = fresh_vector()
    raise NoConvergence(f"Lanczos locked {len(locked_vals)} of {k} eigenvalues", total_iters)


# --------------------------------------------------------------------------
# reports


@dataclass
class SpectralReport:
    """Sorted eigenvalues with the kernel/gap split at ``kernel_tol``."""

    eigenvalues: list[float]
    kernel_dim: int
    lambda_min_nonzero: float | None
    kernel_tol: float
    method: str

    def to_json_dict(self) -> dict:
        return {
            "eigenvalues": list(self.eigenvalues),
            "kernel_dim": self.kernel_dim,
            "lambda_min_nonzero": self.lambda_min_nonzero,
            "kernel_tol": self.kernel_tol,
            "method": self.method,
        }


def _total_matrix(h) -> sp.spmatrix:
    total = getattr(h, "total", h)
    if sp.issparse(total):
        return total.tocsc()
    return sp.csc_matrix(total)


def norm_bound(h) -> float:
    """Hermitian infinity norm, an upper bound on the spectral norm."""
    m = _total_matrix(h)
    return float(np.abs(m).sum(axis=1).max()) if m.nnz else 0.0


def eigen_spectrum(
    h,
    method: str = "dense",
    k: int | None = None,
    kernel_tol: float | None = None,
    kernel_rel_tol: float = KERNEL_REL_TOL,
    dense_limit: int = DENSE_LIMIT_DEFAULT,
    seed: int = 7,
) -> SpectralReport:
    """Diagonalize a ClockHamiltonian (or raw Hermitian matrix).

    ``dense`` computes the full spectrum (refused above ``dense_limit``);
    ``iterative`` computes the k lowest eigenvalues (default k = 12).  The
    kernel threshold defaults to ``kernel_rel_tol`` times the spectral norm
    (dense: the largest computed |eigenvalue|; iterative: the infinity-norm
    bound).
    """
    mat = _total_matrix(h)
    dim = mat.shape[0]
    if method == "dense":
        if dim > dense_limit:
            raise DimensionTooLarge(f"dimension {dim} exceeds the dense limit {dense_limit}")
        values = dense_eigenvalues(mat.toarray())
        scale = float(np.max(np.abs(values))) if values.size else 0.0
    elif method == "iterative":
        k = 12 if k is None else int(k)
        values = lanczos_lowest(mat, min(k, dim), seed=seed)
        scale = norm_bound(mat)
    else:
        raise ValueError(f"unknown method {method!r}")
    if kernel_tol is None:
        kernel_tol = kernel_rel_tol * max(scale, 1e-300)
    kernel_dim = int(np.sum(values < kernel_tol))
    lam = float(values[kernel_dim]) if kernel_dim < values.size else None
    return SpectralReport(
        eigenvalues=[float(x) for x in values],
        kernel_dim=kernel_dim,
        lambda_min_nonzero=lam,
        kernel_tol=float(kernel_tol),
        method=method,
    )


def smallest_nonzero(report: SpectralReport) -> float:
    """The spectral gap above the kernel, refusing threshold-straddling data.

    Raises AmbiguousKernelEdge when any computed eigenvalue has magnitude
    within [kernel_tol/10, kernel_tol*10]: the kernel/gap classification
    would then flip under a factor-10 change of the threshold.
    """
    if report.lambda_min_nonzero is None:
        raise ValueError("every computed eigenvalue is below the kernel threshold")
    lo, hi = report.kernel_tol / 10.0, report.kernel_tol * 10.0
    for lam in report.eigenvalues:
        if lo <= abs(lam) <= hi:
            raise AmbiguousKernelEdge(
                f"eigenvalue {lam:.6e} lies within a factor 10 of the kernel "
                f"threshold {report.kernel_tol:.6e}"
            )
    return report.lambda_min_nonzero


def verify_kernel(h, v: np.ndarray) -> float:
    """Relative kernel residual |H v| / |v|."""
    v = np.asarray(v).ravel()
    nv = np.linalg.norm(v)
    if nv == 0.0:
        raise ValueError("zero vector")
    return float(np.linalg.norm(_total_matrix(h) @ v) / nv)
