"""Shared fixtures-in-spirit: harmonic test fields and quadrature-based
error measures used across several test modules."""

import numpy as np

from magfem.assembly import gauss_rule
from magfem.material import LinearReluctivity
from magfem.mesh import structured_square_mesh
from magfem.problem import MagnetostaticProblem


def u3(p):
    x, y = p[:, 0], p[:, 1]
    return x**3 - 3 * x * y**2


def grad_u3(p):
    x, y = p[:, 0], p[:, 1]
    return np.stack([3 * x**2 - 3 * y**2, -6 * x * y], axis=1)


def u4(p):
    x, y = p[:, 0], p[:, 1]
    return x**4 - 6 * x**2 * y**2 + y**4


def grad_u4(p):
    x, y = p[:, 0], p[:, 1]
    return np.stack([4 * x**3 - 12 * x * y**2, -12 * x**2 * y + 4 * y**3], axis=1)


EXACT = {3: u3, 4: u4}
EXACT_GRAD = {3: grad_u3, 4: grad_u4}


def multipole_problem(n, m=3, region_fn=None):
    """Boundary-driven harmonic problem whose exact solution is the
    degree-m multipole field; source-free with unit reluctivity."""
    mesh = structured_square_mesh(n, region_fn=region_fn) if np.isscalar(n) else n
    exact = EXACT[m]
    prob = MagnetostaticProblem(
        mesh, LinearReluctivity(1.0), source=0.0, dirichlet=exact
    )
    return prob, exact


def l2_callable_error(fn, mesh, exact, quad_degree=4):
    """L2 norm of fn - exact over the mesh, both (P,2) -> (P,) callables."""
    bary, w = gauss_rule(quad_degree)
    pts3 = mesh.tri_coords()
    area = mesh.signed_areas()
    acc = np.zeros(mesh.num_triangles)
    for lam, wq in zip(bary, w):
        x = np.einsum("i,mid->md", lam, pts3)
        d = np.asarray(fn(x)) - np.asarray(exact(x))
        acc += wq * d * d
    return float(np.sqrt(np.sum(2.0 * area * acc)))
