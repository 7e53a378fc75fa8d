"""Linear solvers: preconditioned CG for sparse SPD systems and a reusable
dense LU with partial pivoting for the interpolation saddle-point matrix."""

import warnings

import numpy as np
import scipy.linalg

from .errors import ConvergenceError, SingularMatrixError


def cg_solve(a, b, tol=1e-10, maxit=None, precond="jacobi"):
    """Solve a @ x = b for symmetric positive definite a.

    Runs conjugate gradients from a zero start until the relative residual
    drops below tol. `a` may be any object supporting `a @ v` and
    `a.diagonal()` (scipy sparse matrices and dense arrays both do).
    Raises ConvergenceError carrying the final relative residual if maxit
    (default 10n + 50) is exceeded.
    """
    b = np.asarray(b, dtype=np.float64)
    n = b.shape[0]
    if maxit is None:
        maxit = 10 * n + 50
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n)
    if precond == "jacobi":
        d = np.asarray(a.diagonal(), dtype=np.float64)
        if (d <= 0).any():
            raise ValueError("jacobi preconditioner needs a positive diagonal")
        inv_d = 1.0 / d
        apply_m = lambda r: inv_d * r
    elif precond in (None, "none"):
        apply_m = lambda r: r
    else:
        raise ValueError(f"unknown preconditioner {precond!r}")

    x = np.zeros(n)
    r = b.copy()
    z = apply_m(r)
    p = z.copy()
    rz = float(r @ z)
    for _ in range(maxit):
        q = a @ p
        alpha = rz / float(p @ q)
        x += alpha * p
        r -= alpha * q
        rel = np.linalg.norm(r) / bnorm
        if rel <= tol:
            return x
        if not np.isfinite(rel):
            # NaN never compares true; bail out instead of spinning to maxit
            break
        z = apply_m(r)
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    err = ConvergenceError(
        f"cg did not reach tolerance {tol:g} in {maxit} iterations "
        f"(relative residual {rel:.3e})"
    )
    err.residual = rel
    raise err


class DenseLU:
    """LU factorization with partial pivoting, reusable across right-hand
    sides. Refuses factorizations whose smallest pivot falls below
    1e-14 times the largest entry of the matrix."""

    def __init__(self, a):
        a = np.asarray(a, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("matrix must be square")
        if not np.isfinite(a).all():
            raise ValueError("matrix entries must be finite")
        amax = np.abs(a).max()
        if amax == 0.0:
            raise SingularMatrixError("matrix is identically zero")
        with warnings.catch_warnings():
            # the pivot check below is the singularity report; scipy's
            # advisory warning would just duplicate it on stderr
            warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
            self._lu, self._piv = scipy.linalg.lu_factor(a)
        pivots = np.abs(np.diagonal(self._lu))
        if pivots.min() < 1e-14 * amax:
            raise SingularMatrixError(
                f"pivot {pivots.min():.3e} below 1e-14 * max entry {amax:.3e}"
            )
        self.shape = a.shape

    def solve(self, b):
        return scipy.linalg.lu_solve((self._lu, self._piv), b)


def lu_factor(a):
    return DenseLU(a)


def lu_solve(a, b):
    """One-shot dense solve with partial pivoting."""
    return DenseLU(a).solve(b)
