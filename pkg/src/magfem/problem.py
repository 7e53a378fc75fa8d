"""Magnetostatic boundary-value problems and their Newton solve.

The scalar potential convention: u is the z-component of the vector
potential, r = grad(u), and the reluctivity may differ per mesh region.
"""

from dataclasses import dataclass

import numpy as np

from .assembly import (
    DofMap,
    FeSolution,
    assemble_load,
    assemble_stiffness,
    assemble_vector_flux,
    make_system,
    solve_dirichlet,
)
from .errors import ConvergenceError
from .material import newton_source, nu_l_tensor


@dataclass
class NewtonInfo:
    """Iteration record: residuals[0] is the initial residual norm."""

    iterations: int
    residuals: np.ndarray
    converged: bool
    damped_steps: int = 0


class MagnetostaticProblem:
    """Mesh + material map + source + Dirichlet data.

    `model` is a single reluctivity model or a dict keyed by region tag;
    `source` is a scalar, a dict keyed by region tag, or a callable
    (points, elements) -> values. Dirichlet data follows DofMap rules.
    """

    def __init__(self, mesh, model, source=0.0, dirichlet=0.0, quad_degree=2):
        self.mesh = mesh
        self.quad_degree = quad_degree
        self.dirichlet = dirichlet
        self.dofmap = DofMap(mesh, dirichlet)
        if isinstance(model, dict):
            self._groups = []
            covered = np.zeros(mesh.num_triangles, dtype=bool)
            for tag, m in model.items():
                idx = np.nonzero(mesh.tri_region == tag)[0]
                self._groups.append((idx, m))
                covered[idx] = True
            if not covered.all():
                missing = np.unique(mesh.tri_region[~covered])
                raise ValueError(f"no material for region tags {missing.tolist()}")
        else:
            self._groups = [(np.arange(mesh.num_triangles), model)]
        self._group_id = np.empty(mesh.num_triangles, dtype=np.int64)
        for i, (idx, _) in enumerate(self._groups):
            self._group_id[idx] = i
        if isinstance(source, dict):
            j_elem = np.zeros(mesh.num_triangles)
            for tag, val in source.items():
                j_elem[mesh.tri_region == tag] = val
            self.source = lambda x, elems: j_elem[elems]
        else:
            self.source = source
        self._load = None
        self._k_linear = None

    @property
    def is_linear(self):
        return all(m.is_linear for _, m in self._groups)

    def region_model(self, region_tag):
        """Material model governing one region tag."""
        for idx, model in self._groups:
            if (self.mesh.tri_region[idx] == region_tag).any():
                return model
        raise ValueError(f"mesh has no triangles in region {region_tag}")

    def load_vector(self):
        if self._load is None:
            self._load = assemble_load(self.dofmap, self.source, self.quad_degree)
        return self._load

    def tensor_elementwise(self, grads):
        """Newton tensor per element, frozen at the gradient field grads."""
        t = np.empty((self.mesh.num_triangles, 2, 2))
        for idx, m in self._groups:
            t[idx] = nu_l_tensor(m, grads[idx])
        return t

    def flux_elementwise(self, grads):
        """Physical flux nu(|r|) r per element."""
        f = np.empty((self.mesh.num_triangles, 2))
        for idx, m in self._groups:
            s = np.linalg.norm(grads[idx], axis=-1)
            f[idx] = m.nu(s)[:, None] * grads[idx]
        return f

    def flux_pointwise(self, grads, elems):
        """Physical flux at arbitrary points; elems names the element each
        point lies in, which selects the material model."""
        out = np.empty_like(grads)
        gid = self._group_id[elems]
        for i, (_, m) in enumerate(self._groups):
            mask = gid == i
            if mask.any():
                s = np.linalg.norm(grads[mask], axis=-1)
                out[mask] = m.nu(s)[:, None] * grads[mask]
        return out

    def stiffness(self, grads=None):
        """Assembled Newton matrix; grads=None freezes at r = 0, which for
        all-linear materials is the exact operator (cached in that case, so
        correction solves pay only for a new right-hand side)."""
        if grads is None:
            if self.is_linear and self._k_linear is not None:
                return self._k_linear
            grads = np.zeros((self.mesh.num_triangles, 2))
        t = self.tensor_elementwise(grads)
        k = assemble_stiffness(self.dofmap, lambda x, e: t[e], self.quad_degree)
        if self.is_linear and self._k_linear is None:
            self._k_linear = k
        return k

    def residual(self, coeffs):
        """Interior nonlinear residual (j, phi_i) - (nu(|r|) r, grad phi_i)."""
        g = FeSolution(self.dofmap, coeffs).element_gradients()
        f = self.flux_elementwise(g)
        vec = assemble_vector_flux(self.dofmap, lambda x, e: f[e], self.quad_degree)
        return (self.load_vector() - vec)[self.dofmap.interior]

    def solve(self, newton_tol=1e-10, newton_maxit=50, cg_tol=None, cg_maxit=None):
        """Newton iteration (one exact step for linear materials).

        Undamped steps with a fallback to successive halving whenever the
        residual norm would increase. Returns (FeSolution, NewtonInfo);
        raises ConvergenceError if newton_maxit is exhausted.
        """
        if cg_tol is None:
            cg_tol = 0.01 * newton_tol
        dm = self.dofmap
        u = dm.full_vector(np.zeros(dm.num_interior))
        r0 = np.linalg.norm(self.residual(u))
        residuals = [r0]
        if r0 == 0.0:
            return FeSolution(dm, u), NewtonInfo(0, np.array(residuals), True)
        damped = 0
        for it in range(1, newton_maxit + 1):
            g = FeSolution(dm, u).element_gradients()
            k = self.stiffness(None if self.is_linear else g)
            rhs = self.load_vector().copy()
            for idx, m in self._groups:
                _, w = newton_source(m, g[idx], None)
                if np.abs(w).max() > 0:
                    w_elem = np.zeros((self.mesh.num_triangles, 2))
                    w_elem[idx] = w
                    rhs += assemble_vector_flux(
                        self.dofmap, lambda x, e: w_elem[e], self.quad_degree
                    )
            sys = make_system(k, rhs, dm)
            candidate = solve_dirichlet(sys, tol=cg_tol, maxit=cg_maxit).coeffs
            rnorm = np.linalg.norm(self.residual(candidate))
            step = candidate - u
            lam = 1.0
            # a non-finite residual (overflowing material law) counts as worse
            while (not np.isfinite(rnorm) or rnorm > residuals[-1]) and lam > 1e-3:
                lam *= 0.5
                damped += 1
                candidate = u + lam * step
                rnorm = np.linalg.norm(self.residual(candidate))
            if not np.isfinite(rnorm):
                err = ConvergenceError(
                    f"newton residual became non-finite at step {it}"
                )
                err.residuals = np.array(residuals)
                raise err
            u = candidate
            residuals.append(rnorm)
            if rnorm <= newton_tol * r0:
                # keep Dirichlet data bit-exact after damping arithmetic
                u[dm.constrained] = dm.values
                return FeSolution(dm, u), NewtonInfo(
                    it, np.array(residuals), True, damped
                )
        err = ConvergenceError(
            f"newton did not reach tolerance {newton_tol:g} in {newton_maxit} "
            f"iterations (relative residual {residuals[-1] / r0:.3e})"
        )
        err.residuals = np.array(residuals)
        raise err
