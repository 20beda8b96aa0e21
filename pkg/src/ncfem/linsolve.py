"""Symmetric sparse solves and small dense eigen-audits."""

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ContractViolation, IterationLimitError, NumericalDegeneracyError, SingularityError


@dataclass(frozen=True)
class SolveResult:
    x: np.ndarray
    residual: float
    iterations: int
    method: str


def as_sparse(a):
    """CSR copy with sorted, duplicate-free column indices."""
    m = sp.csr_matrix(a, dtype=float)
    m.sum_duplicates()
    m.sort_indices()
    return m


def check_symmetric(a, tol=1e-12):
    a = as_sparse(a)
    if a.shape[0] != a.shape[1]:
        raise ContractViolation("matrix must be square")
    scale = spla.norm(a)
    if scale and spla.norm(a - a.T) > tol * scale:
        raise ContractViolation("matrix is not symmetric")
    return a


def _jacobi_scale(a):
    d = np.abs(a.diagonal())
    d[d == 0] = 1.0
    return 1.0 / np.sqrt(d)


def _relres(a, x, b):
    nb = np.linalg.norm(b)
    return np.linalg.norm(a @ x - b) / (nb if nb > 0 else 1.0)


def solve_sym_indef(a, b, tol=1e-10, maxit=None, method="minres"):
    """Solve a symmetric (possibly indefinite) system to relative residual ``tol``.

    ``method`` is "minres" (Jacobi-preconditioned MINRES, restarted from the
    current iterate while the true residual is above ``tol``) or "direct"
    (sparse LU of the symmetrically scaled matrix plus iterative refinement).
    The returned residual is always recomputed from the unscaled system.
    """
    a = check_symmetric(a)
    b = np.asarray(b, float)
    if not np.all(np.isfinite(b)):
        raise ContractViolation("right-hand side is not finite")
    if not np.any(b):
        return SolveResult(np.zeros_like(b), 0.0, 0, method)
    d = _jacobi_scale(a)
    dm = sp.diags(d)
    scaled = as_sparse(dm @ a @ dm)
    rhs = d * b
    maxit = maxit or 10 * a.shape[0]

    if method == "direct":
        lu = spla.splu(scaled.tocsc(), permc_spec="COLAMD")
        y = lu.solve(rhs)
        its = 1
        res = _relres(a, d * y, b)
        while res > tol * 1e-2 and its < 6:
            y = y + lu.solve(rhs - scaled @ y)
            its += 1
            new = _relres(a, d * y, b)
            if new >= res:
                res = new
                break
            res = new
        x = d * y
    elif method == "minres":
        count = [0]
        y = np.zeros_like(rhs)
        res = np.inf
        for _ in range(5):
            left = maxit - count[0]
            if left <= 0:
                break
            y, _info = spla.minres(scaled, rhs, x0=y, rtol=tol * 1e-2, maxiter=left,
                                   callback=lambda _xk: count.__setitem__(0, count[0] + 1))
            res = _relres(a, d * y, b)
            if res <= tol:
                break
        x = d * y
        its = count[0]
    else:
        raise ContractViolation(f"unknown method {method!r}")
    if not res <= tol:
        raise IterationLimitError(f"{method}: relative residual {res:.3e} above {tol:.1e}", res, its)
    return SolveResult(x, float(res), its, method)


def dense_solve(a, b):
    a = np.asarray(a, float)
    with warnings.catch_warnings():
        # singularity is judged below against a relative threshold
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(a, check_finite=True)
    diag = np.abs(np.diag(lu))
    if diag.min() <= a.shape[0] * np.finfo(float).eps * diag.max():
        raise SingularityError("matrix is singular to working precision")
    return sla.lu_solve((lu, piv), b)


def dense_eigs_smallest(a, m=None, rtol=1e-8):
    """Smallest eigenvalue of the symmetric pencil (a, m), confirmed by shifted inverse iteration."""
    a = np.asarray(a, float)
    m = np.eye(len(a)) if m is None else np.asarray(m, float)
    w = sla.eigh(a, m, eigvals_only=True)
    lam = w[0]
    scale = max(abs(w[0]), abs(w[-1]), np.finfo(float).tiny)
    sep = (w[1] - w[0]) if len(w) > 1 else scale
    shift = lam - max(0.1 * sep, 1e-6 * scale)
    lu = sla.lu_factor(a - shift * m)
    x = np.random.default_rng(0).standard_normal(len(a))
    mu = np.nan
    for _ in range(200):
        x = sla.lu_solve(lu, m @ x)
        x /= np.sqrt(x @ m @ x)
        new = x @ a @ x
        if abs(new - mu) <= 1e-14 * scale:
            mu = new
            break
        mu = new
    if abs(mu - lam) > rtol * scale:
        raise NumericalDegeneracyError(f"eigen cross-check failed: {lam} vs {mu}")
    return float(lam)


def smallest_singular_value(b):
    s = np.linalg.svd(np.asarray(b, float), compute_uv=False)
    return float(s[-1]) if len(s) else 0.0


def inf_sup_constant(b, x_norm, q_norm, constraint=None):
    """Discrete inf-sup constant of ``b`` (rows: pressure, columns: velocity).

    Square root of the smallest eigenvalue of ``(B X^-1 B^T, Q)``, restricted to
    ``constraint . q = 0`` when a constraint row is given.
    """
    lu = spla.splu(sp.csc_matrix(x_norm))
    bd = sp.csr_matrix(b)
    schur = np.asarray(bd @ lu.solve(bd.T.toarray()))
    schur = (schur + schur.T) / 2
    q = np.asarray(sp.csr_matrix(q_norm).toarray())
    if constraint is not None:
        z = sla.null_space(np.atleast_2d(np.asarray(constraint, float)))
        schur, q = z.T @ schur @ z, z.T @ q @ z
    return float(np.sqrt(max(dense_eigs_smallest(schur, q), 0.0)))
