"""P1 finite-element assembly on triangular meshes.

Field callables receive (points, elements): physical quadrature points of
shape (M, 2) together with the index of the triangle each point lies in,
so closures can look up region tags or per-element iterate gradients.
Scalars and constant 2x2 arrays are accepted wherever a field is expected.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .linalg import cg_solve
from .mesh import INTERIOR

# Symmetric Gauss rules on the reference triangle (0,0)-(1,0)-(0,1), stored
# as barycentric coordinate groups; weights are normalized to sum to 1 and
# scaled by the reference area 1/2 on expansion.
_RULE_GROUPS = {
    1: [((1 / 3, 1 / 3, 1 / 3), 1.0)],
    2: [((0.5, 0.5, 0.0), 1 / 3)],
    4: [
        ((0.108103018168070, 0.445948490915965, 0.445948490915965), 0.223381589678011),
        ((0.816847572980459, 0.091576213509771, 0.091576213509771), 0.109951743655322),
    ],
    6: [
        ((0.501426509658179, 0.249286745170910, 0.249286745170910), 0.116786275726379),
        ((0.873821971016996, 0.063089014491502, 0.063089014491502), 0.050844906370207),
        ((0.053145049844816, 0.310352451033785, 0.636502499121399), 0.082851075618374),
    ],
}


def gauss_rule(degree):
    """Points (barycentric, shape (n, 3)) and weights (sum 1/2) exact for
    polynomials up to the given degree. Supported degrees: 1, 2, 4, 6."""
    if degree not in _RULE_GROUPS:
        raise ValueError(f"unsupported quadrature degree {degree} (use 1, 2, 4 or 6)")
    pts, wts = [], []
    for lam, w in _RULE_GROUPS[degree]:
        seen = set()
        for perm in (
            (0, 1, 2), (1, 2, 0), (2, 0, 1), (0, 2, 1), (2, 1, 0), (1, 0, 2),
        ):
            p = (lam[perm[0]], lam[perm[1]], lam[perm[2]])
            if p not in seen:
                seen.add(p)
                pts.append(p)
                wts.append(w)
    return np.array(pts), 0.5 * np.array(wts)


def _p1_geometry(mesh):
    """Per-element basis gradients (M, 3, 2), areas (M,), corner coords."""
    cached = mesh._cache.get("p1_geometry")
    if cached is not None:
        return cached
    pts = mesh.tri_coords()  # (M, 3, 2)
    area = mesh.signed_areas()
    det = 2.0 * area
    grads = np.empty((mesh.num_triangles, 3, 2))
    for i in range(3):
        a, b = pts[:, (i + 1) % 3], pts[:, (i + 2) % 3]
        grads[:, i, 0] = (a[:, 1] - b[:, 1]) / det
        grads[:, i, 1] = (b[:, 0] - a[:, 0]) / det
    result = (grads, area, pts)
    mesh._cache["p1_geometry"] = result
    return result


def _as_tensor_field(t):
    if callable(t):
        return t
    t = np.asarray(t, dtype=np.float64)
    if t.ndim == 0:
        t = float(t) * np.eye(2)
    if t.shape != (2, 2):
        raise ValueError("constant tensor must be scalar or 2x2")
    return lambda x, elems: np.broadcast_to(t, (x.shape[0], 2, 2))


def _as_scalar_field(f):
    if callable(f):
        return f
    val = float(f)
    return lambda x, elems: np.full(x.shape[0], val)


class DofMap:
    """Interior/constrained split of the mesh nodes.

    Nodes whose flag differs from INTERIOR are constrained to Dirichlet
    data; `dirichlet` may be a scalar, a callable over point arrays, or a
    full per-node vector.
    """

    def __init__(self, mesh, dirichlet=0.0):
        self.mesh = mesh
        flags = mesh.node_flags
        self.interior = np.nonzero(flags == INTERIOR)[0]
        self.constrained = np.nonzero(flags != INTERIOR)[0]
        if callable(dirichlet):
            vals = np.asarray(dirichlet(mesh.nodes[self.constrained]), dtype=np.float64)
            if vals.shape != (self.constrained.size,):
                raise ValueError("dirichlet callable must return one value per node")
        else:
            arr = np.asarray(dirichlet, dtype=np.float64)
            if arr.ndim == 0:
                vals = np.full(self.constrained.size, float(arr))
            elif arr.shape == (mesh.num_nodes,):
                vals = arr[self.constrained].copy()
            else:
                raise ValueError("dirichlet must be scalar, callable or per-node vector")
        self.values = vals
        self.reduced_index = np.full(mesh.num_nodes, -1, dtype=np.int64)
        self.reduced_index[self.interior] = np.arange(self.interior.size)

    @property
    def num_interior(self):
        return self.interior.size

    def full_vector(self, interior_values):
        """Expand interior dof values to a per-node vector with the
        prescribed data filled in bit-exactly."""
        out = np.zeros(self.mesh.num_nodes)
        out[self.interior] = interior_values
        out[self.constrained] = self.values
        return out


@dataclass(frozen=True)
class FeSolution:
    """Nodal P1 field tied to its dof map."""

    dofmap: DofMap
    coeffs: np.ndarray

    @property
    def mesh(self):
        return self.dofmap.mesh

    def element_gradients(self):
        grads, _, _ = _p1_geometry(self.mesh)
        return np.einsum("mi,mid->md", self.coeffs[self.mesh.triangles], grads)

    def _locate(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        elems = self.mesh.locate(points)
        if (elems < 0).any():
            bad = points[elems < 0][0]
            raise ValueError(f"point {tuple(bad)} lies outside the mesh")
        return points, elems

    def eval(self, points):
        points, elems = self._locate(points)
        grads, _, pts = _p1_geometry(self.mesh)
        d = points - pts[elems, 0]
        lam = np.einsum("pid,pd->pi", grads[elems], d)
        lam[:, 0] += 1.0
        return np.einsum("pi,pi->p", self.coeffs[self.mesh.triangles[elems]], lam)

    def eval_grad(self, points):
        """Piecewise-constant gradient; a point on an element boundary
        resolves to an arbitrary adjacent element."""
        points, elems = self._locate(points)
        return self.element_gradients()[elems]


@dataclass(frozen=True)
class SparseSystem:
    """Reduced interior system K x = b."""

    matrix: sp.csr_matrix
    rhs: np.ndarray
    dofmap: DofMap


def assemble_stiffness(dofmap, tensor_field, quad_degree=2):
    """Full-size Galerkin matrix of (T grad u, grad v) over all nodes.

    Dirichlet coupling columns stay in place; make_system folds them into
    the right-hand side.
    """
    mesh = dofmap.mesh
    tensor_field = _as_tensor_field(tensor_field)
    grads, area, pts = _p1_geometry(mesh)
    elems = np.arange(mesh.num_triangles)
    bary, w = gauss_rule(quad_degree)
    tbar = np.zeros((mesh.num_triangles, 2, 2))
    for lam, wq in zip(bary, w):
        x = np.einsum("i,mid->md", lam, pts)
        tbar += wq * tensor_field(x, elems)
    ke = 2.0 * area[:, None, None] * np.einsum("mid,mde,mje->mij", grads, tbar, grads)
    tris = mesh.triangles
    rows = np.repeat(tris, 3, axis=1).ravel()
    cols = np.tile(tris, (1, 3)).ravel()
    n = mesh.num_nodes
    return sp.coo_matrix((ke.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def assemble_load(dofmap, j, quad_degree=2):
    """Vector of (j, phi_i) over all nodes."""
    mesh = dofmap.mesh
    j = _as_scalar_field(j)
    grads, area, pts = _p1_geometry(mesh)
    elems = np.arange(mesh.num_triangles)
    bary, w = gauss_rule(quad_degree)
    acc = np.zeros((mesh.num_triangles, 3))
    for lam, wq in zip(bary, w):
        x = np.einsum("i,mid->md", lam, pts)
        acc += (wq * np.asarray(j(x, elems)))[:, None] * lam
    acc *= 2.0 * area[:, None]
    out = np.zeros(mesh.num_nodes)
    np.add.at(out, mesh.triangles.ravel(), acc.ravel())
    return out


def assemble_vector_flux(dofmap, w_field, quad_degree=2):
    """Vector of (w, grad phi_i) over all nodes, for vector fields w."""
    mesh = dofmap.mesh
    grads, area, pts = _p1_geometry(mesh)
    elems = np.arange(mesh.num_triangles)
    bary, w = gauss_rule(quad_degree)
    acc = np.zeros((mesh.num_triangles, 3))
    for lam, wq in zip(bary, w):
        x = np.einsum("i,mid->md", lam, pts)
        wv = np.asarray(w_field(x, elems))
        acc += wq * np.einsum("md,mid->mi", wv, grads)
    acc *= 2.0 * area[:, None]
    out = np.zeros(mesh.num_nodes)
    np.add.at(out, mesh.triangles.ravel(), acc.ravel())
    return out


def assemble_corrected_rhs(dofmap, recon, tensor_field, j, quad_degree=4):
    """Right-hand side (j, v) - (T grad recon, grad v) of the correction
    problem, evaluated with a quadrature matching the reconstruction order."""
    tensor_field = _as_tensor_field(tensor_field)

    def flux(x, elems):
        g = recon.eval_grad(x)
        return np.einsum("pde,pe->pd", tensor_field(x, elems), g)

    load = assemble_load(dofmap, j, quad_degree)
    return load - assemble_vector_flux(dofmap, flux, quad_degree)


def make_system(matrix, load, dofmap):
    """Reduce a full-size matrix/vector pair to the interior dofs, lifting
    inhomogeneous Dirichlet data into the right-hand side."""
    idx = dofmap.interior
    reduced = matrix[idx][:, idx]
    rhs = np.asarray(load, dtype=np.float64)[idx]
    if dofmap.constrained.size and np.abs(dofmap.values).max() > 0:
        rhs = rhs - matrix[idx][:, dofmap.constrained] @ dofmap.values
    return SparseSystem(reduced, rhs, dofmap)


def solve_dirichlet(system, tol=1e-10, maxit=None):
    """CG solve of the reduced system, expanded back to a nodal field."""
    dofmap = system.dofmap
    if dofmap.num_interior == 0:
        return FeSolution(dofmap, dofmap.full_vector(np.empty(0)))
    x = cg_solve(system.matrix, system.rhs, tol=tol, maxit=maxit)
    return FeSolution(dofmap, dofmap.full_vector(x))


def _element_values(sol, lam):
    return np.einsum("mi,i->m", sol.coeffs[sol.mesh.triangles], lam)


def l2_error(sol, exact, quad_degree=6):
    """L2 distance between a P1 field and a callable exact solution."""
    grads, area, pts = _p1_geometry(sol.mesh)
    bary, w = gauss_rule(quad_degree)
    acc = np.zeros(sol.mesh.num_triangles)
    for lam, wq in zip(bary, w):
        x = np.einsum("i,mid->md", lam, pts)
        diff = _element_values(sol, lam) - np.asarray(exact(x))
        acc += wq * diff * diff
    return float(np.sqrt(np.sum(2.0 * area * acc)))


def h1_seminorm_error(sol, exact_grad, quad_degree=6):
    grads, area, pts = _p1_geometry(sol.mesh)
    g_h = sol.element_gradients()
    bary, w = gauss_rule(quad_degree)
    acc = np.zeros(sol.mesh.num_triangles)
    for lam, wq in zip(bary, w):
        x = np.einsum("i,mid->md", lam, pts)
        diff = g_h - np.asarray(exact_grad(x))
        acc += wq * np.einsum("md,md->m", diff, diff)
    return float(np.sqrt(np.sum(2.0 * area * acc)))


def l2_norm(sol):
    # u_h^2 is quadratic, so the degree-2 rule is exact
    _, area, _ = _p1_geometry(sol.mesh)
    bary, w = gauss_rule(2)
    acc = np.zeros(sol.mesh.num_triangles)
    for lam, wq in zip(bary, w):
        acc += wq * _element_values(sol, lam) ** 2
    return float(np.sqrt(np.sum(2.0 * area * acc)))


def h1_norm(sol):
    _, area, _ = _p1_geometry(sol.mesh)
    g = sol.element_gradients()
    semi2 = float(np.sum(area * np.einsum("md,md->m", g, g)))
    return float(np.sqrt(l2_norm(sol) ** 2 + semi2))
