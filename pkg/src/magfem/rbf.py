"""Polyharmonic-spline interpolation with exact derivative evaluation.

Kernels: Phi_1 = r^2 log r, Phi_2 = r^3, Phi_3 = r^5, augmented with a
polynomial part of degree m-1 (m = 2, 2, 3 respectively). Centers are
affinely normalized to [-1,1]^2 before the saddle-point system is built;
raw meter-scale coordinates make the quintic system numerically singular.
The fitted interpolant stores the transform and undoes it on evaluation.
"""

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .errors import FitError, SingularMatrixError
from .linalg import DenseLU

POLY_DEGREE = {1: 2, 2: 2, 3: 3}  # kernel order -> m (poly part has deg < m)

# evaluation farther than this outside the normalized center box is refused
_DOMAIN_MARGIN = 0.25

# GEMM work buffers stay around this many f64 entries per chunk
_CHUNK_ENTRIES = 4_000_000


def kernel(k, r):
    """Radial kernel Phi_k(r), vectorized, with Phi_1(0) = 0."""
    r = np.asarray(r, dtype=np.float64)
    if k == 1:
        safe = np.where(r > 0, r, 1.0)
        return np.where(r > 0, r * r * np.log(safe), 0.0)
    if k == 2:
        return r**3
    if k == 3:
        return r**5
    raise ValueError(f"kernel order must be 1, 2 or 3, got {k}")


def kernel_d1(k, r):
    """First radial derivative dPhi/dr (limit value 0 at r = 0 for k=1)."""
    r = np.asarray(r, dtype=np.float64)
    if k == 1:
        safe = np.where(r > 0, r, 1.0)
        return np.where(r > 0, r * (2.0 * np.log(safe) + 1.0), 0.0)
    if k == 2:
        return 3.0 * r * r
    if k == 3:
        return 5.0 * r**4
    raise ValueError(f"kernel order must be 1, 2 or 3, got {k}")


def kernel_d2(k, r):
    """Second radial derivative; for k=1 it diverges to -inf at r = 0."""
    r = np.asarray(r, dtype=np.float64)
    if k == 1:
        with np.errstate(divide="ignore"):
            return 2.0 * np.log(r) + 3.0
    if k == 2:
        return 6.0 * r
    if k == 3:
        return 20.0 * r**3
    raise ValueError(f"kernel order must be 1, 2 or 3, got {k}")


def _poly_block(pts, m):
    """Monomial values, shape (npts, 3) for m=2 or (npts, 6) for m=3."""
    x, y = pts[:, 0], pts[:, 1]
    cols = [np.ones_like(x), x, y]
    if m == 3:
        cols += [x * x, x * y, y * y]
    return np.stack(cols, axis=1)


@dataclass(frozen=True)
class RbfInterpolant:
    """Fitted polyharmonic spline; immutable, safe to share."""

    kernel_order: int
    centers: np.ndarray  # normalized coordinates, shape (N, 2)
    alpha: np.ndarray
    poly_coeffs: np.ndarray  # over the normalized monomial basis
    shift: np.ndarray
    scale: np.ndarray

    def _normalize(self, points):
        points = np.asarray(points, dtype=np.float64)
        if points.ndim != 2 or points.shape[1] != 2:
            raise ValueError("points must have shape (npts, 2)")
        xn = (points - self.shift) / self.scale
        if np.abs(xn).max() > 1.0 + _DOMAIN_MARGIN:
            worst = points[np.abs(xn).max(axis=1).argmax()]
            raise ValueError(
                f"point {tuple(worst)} lies outside the fitted domain"
            )
        return xn

    def _chunks(self, npts):
        step = max(1, _CHUNK_ENTRIES // max(1, self.centers.shape[0]))
        for lo in range(0, npts, step):
            yield lo, min(npts, lo + step)

    def eval(self, points):
        xn = self._normalize(points)
        k, c = self.kernel_order, self.centers
        out = _poly_block(xn, POLY_DEGREE[k]) @ self.poly_coeffs
        for lo, hi in self._chunks(xn.shape[0]):
            out[lo:hi] += kernel(k, cdist(xn[lo:hi], c)) @ self.alpha
        return out

    def eval_grad(self, points):
        """Gradient in physical coordinates, shape (npts, 2)."""
        xn = self._normalize(points)
        k, c, m = self.kernel_order, self.centers, POLY_DEGREE[self.kernel_order]
        p = self.poly_coeffs
        g = np.empty_like(xn)
        g[:, 0] = p[1]
        g[:, 1] = p[2]
        if m == 3:
            g[:, 0] += 2.0 * p[3] * xn[:, 0] + p[4] * xn[:, 1]
            g[:, 1] += p[4] * xn[:, 0] + 2.0 * p[5] * xn[:, 1]
        for lo, hi in self._chunks(xn.shape[0]):
            r = cdist(xn[lo:hi], c)
            # w = alpha * Phi'(r)/r; the radial factor times the offset
            # x - c sums via two matmuls
            w = self.alpha * _d1_over_r(k, r)
            g[lo:hi, 0] += w.sum(axis=1) * xn[lo:hi, 0] - w @ c[:, 0]
            g[lo:hi, 1] += w.sum(axis=1) * xn[lo:hi, 1] - w @ c[:, 1]
        return g / self.scale

    def eval_hess(self, points):
        """Hessian in physical coordinates, shape (npts, 2, 2).

        The thin-plate kernel (k=1) has log-singular second derivatives at
        its centers, so evaluation there is refused.
        """
        xn = self._normalize(points)
        k, c, m = self.kernel_order, self.centers, POLY_DEGREE[self.kernel_order]
        n = xn.shape[0]
        h = np.zeros((n, 2, 2))
        if m == 3:
            p = self.poly_coeffs
            h[:, 0, 0] = 2.0 * p[3]
            h[:, 0, 1] = h[:, 1, 0] = p[4]
            h[:, 1, 1] = 2.0 * p[5]
        cx, cy = c[:, 0], c[:, 1]
        for lo, hi in self._chunks(n):
            r = cdist(xn[lo:hi], c)
            if k == 1 and r.min() < 1e-12:
                raise ValueError(
                    "second derivatives of the k=1 kernel are singular at "
                    "the interpolation centers"
                )
            wa = self.alpha * _hess_aniso(k, r)  # weight of (x-c) (x) (x-c)
            wb = self.alpha * _d1_over_r(k, r)  # weight of the identity
            x, y = xn[lo:hi, 0], xn[lo:hi, 1]
            s0 = wa.sum(axis=1)
            s1x, s1y = wa @ cx, wa @ cy
            h[lo:hi, 0, 0] += x * x * s0 - 2 * x * s1x + wa @ (cx * cx)
            h[lo:hi, 1, 1] += y * y * s0 - 2 * y * s1y + wa @ (cy * cy)
            hxy = x * y * s0 - x * s1y - y * s1x + wa @ (cx * cy)
            h[lo:hi, 0, 1] += hxy
            h[lo:hi, 1, 0] += hxy
            trace = wb.sum(axis=1)
            h[lo:hi, 0, 0] += trace
            h[lo:hi, 1, 1] += trace
        return h / (self.scale[:, None] * self.scale[None, :])


def _d1_over_r(k, r):
    """Phi'(r)/r with the correct 0 limit where defined."""
    if k == 1:
        safe = np.where(r > 0, r, 1.0)
        return np.where(r > 0, 2.0 * np.log(safe) + 1.0, 0.0)
    if k == 2:
        return 3.0 * r
    return 5.0 * r**3


def _hess_aniso(k, r):
    """(Phi'' - Phi'/r) / r^2: the coefficient of (x-c)(x)(x-c)."""
    if k == 1:
        safe = np.where(r > 0, r, 1.0)
        return np.where(r > 0, 2.0 / (safe * safe), 0.0)
    if k == 2:
        safe = np.where(r > 0, r, 1.0)
        return np.where(r > 0, 3.0 / safe, 0.0)
    return 15.0 * r


class PolyharmonicFitter:
    """Factorization of the interpolation saddle-point system for a fixed
    center set, reusable across many data vectors."""

    def __init__(self, k, centers, normalize=True):
        if k not in POLY_DEGREE:
            raise FitError(f"kernel order must be 1, 2 or 3, got {k}")
        centers = np.asarray(centers, dtype=np.float64)
        if centers.ndim != 2 or centers.shape[1] != 2:
            raise FitError("centers must have shape (N, 2)")
        if np.unique(centers, axis=0).shape[0] != centers.shape[0]:
            raise FitError("centers must be pairwise distinct")
        self.kernel_order = k
        if normalize:
            lo, hi = centers.min(axis=0), centers.max(axis=0)
            self.shift = 0.5 * (lo + hi)
            self.scale = np.maximum(0.5 * (hi - lo), 1e-30)
        else:
            self.shift = np.zeros(2)
            self.scale = np.ones(2)
        self._centers = (centers - self.shift) / self.scale
        m = POLY_DEGREE[k]
        p = _poly_block(self._centers, m)
        if np.linalg.matrix_rank(p) < p.shape[1]:
            raise FitError(
                "polynomial basis is rank-deficient on these centers "
                "(collinear or conic-degenerate configuration)"
            )
        n, q = centers.shape[0], p.shape[1]
        mat = np.zeros((n + q, n + q))
        mat[:n, :n] = kernel(k, cdist(self._centers, self._centers))
        mat[:n, n:] = p
        mat[n:, :n] = p.T
        try:
            self._lu = DenseLU(mat)
        except SingularMatrixError as exc:
            raise FitError(f"saddle-point system is singular: {exc}") from exc
        self._n = n

    def fit(self, values):
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (self._n,):
            raise FitError("need exactly one value per center")
        rhs = np.concatenate([values, np.zeros(self._lu.shape[0] - self._n)])
        sol = self._lu.solve(rhs)
        return RbfInterpolant(
            self.kernel_order,
            self._centers,
            sol[: self._n],
            sol[self._n :],
            self.shift,
            self.scale,
        )


def fit(k, centers, values, normalize=True):
    """One-shot interpolation of scattered data."""
    return PolyharmonicFitter(k, centers, normalize=normalize).fit(values)
