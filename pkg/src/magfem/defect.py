"""Defect correction: solve for the FE-space error of a smooth
reconstruction and fold it back into an improved reconstruction.

The correction lives in the homogeneous-Dirichlet FE space (the base
solution already carries the boundary data), and its linear system reuses
the problem's stiffness operator: only the right-hand side is new.
"""

from dataclasses import dataclass

import numpy as np

from .assembly import (
    DofMap,
    FeSolution,
    assemble_corrected_rhs,
    assemble_stiffness,
    make_system,
    solve_dirichlet,
)
from .mesh import extract_submesh
from .rbf import PolyharmonicFitter, RbfInterpolant


@dataclass(frozen=True)
class CorrectedSolution:
    """Base FE solution, accumulated correction, and the reconstruction of
    their sum."""

    base: FeSolution
    correction: FeSolution
    reconstruction: RbfInterpolant
    rounds: int

    @property
    def corrected_coeffs(self):
        return self.base.coeffs + self.correction.coeffs

    @property
    def mesh(self):
        return self.base.mesh

    def eval(self, points):
        return self.reconstruction.eval(points)

    def eval_grad(self, points):
        return self.reconstruction.eval_grad(points)


def repeat_correct(problem, u_h, k, rounds, quad_degree=4, cg_tol=1e-12):
    """Iterated correction: each round re-fits the reconstruction of the
    current corrected iterate and solves for a fresh FE-space update.

    The kernel system is factorized once and shared by all rounds (the
    matrix depends only on the centers and k). No order gain beyond the
    first round is expected, only constant-factor improvement.
    """
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    mesh = problem.mesh
    fitter = PolyharmonicFitter(k, mesh.nodes)
    dm0 = DofMap(mesh, 0.0)
    if problem.is_linear:
        stiff = problem.stiffness()
        tensor = problem.tensor_elementwise(np.zeros((mesh.num_triangles, 2)))
    else:
        # freeze the Newton tensor at the converged gradient field
        g = u_h.element_gradients()
        stiff = problem.stiffness(g)
        tensor = problem.tensor_elementwise(g)
    tensor_field = lambda x, e: tensor[e]
    total = np.zeros(mesh.num_nodes)
    for _ in range(rounds):
        recon = fitter.fit(u_h.coeffs + total)
        rhs = assemble_corrected_rhs(
            dm0, recon, tensor_field, problem.source, quad_degree
        )
        e = solve_dirichlet(make_system(stiff, rhs, dm0), tol=cg_tol)
        total += e.coeffs
    final = fitter.fit(u_h.coeffs + total)
    return CorrectedSolution(u_h, FeSolution(dm0, total), final, rounds)


def primal_correct(problem, u_h, k, quad_degree=4, cg_tol=1e-12):
    """Single global correction pass."""
    return repeat_correct(problem, u_h, k, 1, quad_degree, cg_tol)


def local_correct(problem, u_h, region_tag, k, rounds=1, quad_degree=4,
                  cg_tol=1e-12):
    """Correction restricted to the submesh of one region.

    Requires a source-free region with a constant (linear) reluctivity.
    The correction takes homogeneous Dirichlet data on the entire submesh
    boundary, including parts shared with the outer boundary; nothing
    outside the submesh is read except the nodal values sitting on it.
    """
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    sub, smap = extract_submesh(problem.mesh, region_tag)
    model = problem.region_model(region_tag)
    if not model.is_linear:
        raise ValueError(
            f"local correction needs a linear material in region {region_tag}"
        )
    _check_source_free(problem, sub, smap, region_tag)
    u0 = u_h.coeffs[smap.node_parent]
    fitter = PolyharmonicFitter(k, sub.nodes)
    dm0 = DofMap(sub, 0.0)
    stiff = assemble_stiffness(dm0, model.nu0, problem.quad_degree)
    total = np.zeros(sub.num_nodes)
    for _ in range(rounds):
        recon = fitter.fit(u0 + total)
        rhs = assemble_corrected_rhs(dm0, recon, model.nu0, 0.0, quad_degree)
        e = solve_dirichlet(make_system(stiff, rhs, dm0), tol=cg_tol)
        total += e.coeffs
    final = fitter.fit(u0 + total)
    base_dm = DofMap(sub, u0)
    return CorrectedSolution(
        FeSolution(base_dm, u0), FeSolution(dm0, total), final, rounds
    )


def _check_source_free(problem, sub, smap, region_tag):
    from .assembly import gauss_rule

    j = problem.source
    if not callable(j):
        if float(j) != 0.0:
            raise ValueError(
                f"source current must vanish in region {region_tag}"
            )
        return
    bary, _ = gauss_rule(2)
    pts3 = sub.tri_coords()
    for lam in bary:
        x = np.einsum("i,mid->md", lam, pts3)
        vals = np.asarray(j(x, smap.tri_parent))
        if np.abs(vals).max() > 0:
            raise ValueError(
                f"source current must vanish in region {region_tag}"
            )
