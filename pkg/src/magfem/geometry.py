"""Mesh generators for the two benchmark configurations.

aligned_disk_square_mesh triangulates a square with the reference circle of
the multipole coefficients resolved as an interior polyline, so piecewise
quantities defined by the circle never straddle an element.  c_magnet_mesh
builds a C-shaped dipole magnet with an asymmetric pole pair; the companion
c_magnet_problem wires up materials and coil currents.
"""

import numpy as np

from .material import LinearReluctivity
from .mesh import OUTER_BOUNDARY, TriMesh
from .problem import MagnetostaticProblem

# region tags of the magnet model
AIR = 1
IRON = 2
COIL_POS = 3
COIL_NEG = 4
GAP_BOX = 5

VACUUM_NU = 1.0 / (4.0e-7 * np.pi)

# magnet layout, all breakpoints on a 0.01 grid
CMAGNET_EXTENT = 0.32
CMAGNET_GAP_BOX = (0.22, 0.15, 0.26, 0.17)
_IRON_BOXES = (
    (0.02, 0.02, 0.08, 0.30),  # back limb
    (0.08, 0.24, 0.25, 0.30),  # top limb
    (0.08, 0.02, 0.28, 0.08),  # bottom limb
    (0.22, 0.18, 0.25, 0.24),  # upper pole
    (0.22, 0.08, 0.28, 0.14),  # lower pole, wider face
)
_COIL_POS_BOX = (0.18, 0.18, 0.22, 0.24)
_COIL_NEG_BOX = (0.25, 0.18, 0.29, 0.24)


def _band(tris, inner, outer, parity):
    """Append two triangles per quad between two cyclic rings of equal
    length, alternating the diagonal for isotropy."""
    q = len(inner)
    for j in range(q):
        j1 = (j + 1) % q
        a, a1, b, b1 = inner[j], inner[j1], outer[j], outer[j1]
        if (parity + j) % 2:
            tris.append((a, b, a1))
            tris.append((a1, b, b1))
        else:
            tris.append((a, b, b1))
            tris.append((a, b1, a1))


def aligned_disk_square_mesh(n, r0=0.2, half_width=1.0):
    """Mesh [-hw, hw]^2 with the circle r = r0 as an interior polyline.

    O-grid construction: a Cartesian core square of half-width 0.6 r0 sits
    inside the disk, an annulus blends its perimeter to the circle (8n nodes
    around), and geometrically graded rings blend the circle to the outer
    square, with radial steps matched to the local angular width so node
    spacing stays near-uniform (the dense interpolation fits downstream
    punish clustered centers).  Disk triangles carry region tag 2, the rest
    tag 1; boundary edges are tagged 1.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if not 0.0 < r0 < half_width:
        raise ValueError("need 0 < r0 < half_width")
    q = 8 * n
    side = q // 4
    s = 0.6 * r0
    ell = 2.0 * np.pi * r0 / q

    xs = np.linspace(-s, s, side + 1)
    gx, gy = np.meshgrid(xs, xs, indexing="ij")
    nodes = [np.stack([gx.ravel(), gy.ravel()], axis=1)]

    def vid(i, j):
        return i * (side + 1) + j

    tris = []
    for i in range(side):
        for j in range(side):
            v00, v10 = vid(i, j), vid(i + 1, j)
            v01, v11 = vid(i, j + 1), vid(i + 1, j + 1)
            if (i + j) % 2:
                tris.append((v00, v10, v01))
                tris.append((v10, v11, v01))
            else:
                tris.append((v00, v10, v11))
                tris.append((v00, v11, v01))

    # core perimeter walked counterclockwise from the east side midpoint,
    # so rays hit the axes and the diagonals exactly
    h2 = side // 2
    walk = (
        [vid(side, j) for j in range(h2, side + 1)]
        + [vid(i, side) for i in range(side - 1, -1, -1)]
        + [vid(0, j) for j in range(side - 1, -1, -1)]
        + [vid(i, 0) for i in range(1, side + 1)]
        + [vid(side, j) for j in range(1, h2)]
    )
    core = nodes[0][walk]
    ray = core / np.hypot(core[:, 0], core[:, 1])[:, None]

    t = np.maximum(np.abs(ray[:, 0]), np.abs(ray[:, 1]))
    square = half_width * ray / t[:, None]
    dist = np.hypot(square[:, 0], square[:, 1])

    rings = [list(walk)]
    nid = nodes[0].shape[0]

    def add_ring(pts):
        nonlocal nid
        nodes.append(pts)
        rings.append(list(range(nid, nid + q)))
        nid += q

    gap = r0 - np.hypot(core[:, 0], core[:, 1]).mean()
    t_in = max(1, int(round(gap / ell)))
    for k in range(1, t_in + 1):
        tau = k / t_in
        add_ring((1.0 - tau) * core + tau * r0 * ray)

    p = max(2, int(round(q / (2.0 * np.pi) * np.log(dist.mean() / r0))))
    for k in range(1, p + 1):
        rho = r0 * (dist / r0) ** (k / p)
        add_ring(rho[:, None] * ray)

    for b, (inner, outer) in enumerate(zip(rings[:-1], rings[1:])):
        _band(tris, inner, outer, b)

    nodes = np.concatenate(nodes, axis=0)
    tris = np.asarray(tris, dtype=np.int64)

    last = np.asarray(rings[-1])
    bedges = np.stack(
        [last, np.roll(last, -1), np.ones(q, dtype=np.int64)], axis=1
    )

    cent = nodes[tris].mean(axis=1)
    region = np.where(np.hypot(cent[:, 0], cent[:, 1]) < r0, 2, 1).astype(np.int64)

    flags = np.zeros(nodes.shape[0], dtype=np.uint8)
    flags[last] = OUTER_BOUNDARY
    return TriMesh(nodes, tris, region, bedges, flags)


def _in_box(c, box):
    x0, y0, x1, y1 = box
    return (c[:, 0] > x0) & (c[:, 0] < x1) & (c[:, 1] > y0) & (c[:, 1] < y1)


def cmagnet_region(points):
    """Region tag for points inside the magnet domain (vectorized)."""
    c = np.asarray(points, dtype=np.float64)
    tag = np.full(c.shape[0], AIR, dtype=np.int64)
    for box in _IRON_BOXES:
        tag[_in_box(c, box)] = IRON
    tag[_in_box(c, _COIL_POS_BOX)] = COIL_POS
    tag[_in_box(c, _COIL_NEG_BOX)] = COIL_NEG
    tag[_in_box(c, CMAGNET_GAP_BOX)] = GAP_BOX
    return tag


def c_magnet_mesh(base=0.01, gap_refine=3):
    """Rectilinear triangulation of the magnet domain [0, L]^2.

    base is the cell size and must divide 0.01 so that every material
    boundary falls on grid lines; each cell is split along the same
    diagonal.  Region tags follow cmagnet_region at the cell centroids.
    gap_refine pre-refines the field-quality box: the energy-driven
    adaptive loop concentrates on the iron corners and would leave the
    (smooth) gap field at base resolution otherwise.
    """
    steps = 0.01 / base
    if abs(steps - round(steps)) > 1e-9:
        raise ValueError("base must divide 0.01 so region boundaries stay on grid lines")
    n = int(round(CMAGNET_EXTENT / base))
    xs = np.linspace(0.0, CMAGNET_EXTENT, n + 1)
    gx, gy = np.meshgrid(xs, xs, indexing="ij")
    nodes = np.stack([gx.ravel(), gy.ravel()], axis=1)

    def vid(i, j):
        return i * (n + 1) + j

    tris = []
    for i in range(n):
        for j in range(n):
            v00, v10 = vid(i, j), vid(i + 1, j)
            v01, v11 = vid(i, j + 1), vid(i + 1, j + 1)
            tris.append((v00, v10, v11))
            tris.append((v00, v11, v01))
    tris = np.asarray(tris, dtype=np.int64)
    region = cmagnet_region(nodes[tris].mean(axis=1))

    idx = np.arange(n)
    south = np.stack([vid(idx, 0), vid(idx + 1, 0)], axis=1)
    east = np.stack([vid(n, idx), vid(n, idx + 1)], axis=1)
    north = np.stack([vid(n - idx, n), vid(n - idx - 1, n)], axis=1)
    west = np.stack([vid(0, n - idx), vid(0, n - idx - 1)], axis=1)
    loop = np.concatenate([south, east, north, west], axis=0)
    bedges = np.concatenate(
        [loop, np.ones((loop.shape[0], 1), dtype=np.int64)], axis=1
    )

    flags = np.zeros(nodes.shape[0], dtype=np.uint8)
    flags[bedges[:, :2].ravel()] = OUTER_BOUNDARY
    mesh = TriMesh(nodes, tris, region, bedges, flags)
    from .mesh import adaptive_refine

    # refine a margin around the box too: the local correction reads its
    # boundary data from the global solution, so the surroundings (pole
    # faces) must not stay coarse
    x0, y0, x1, y1 = CMAGNET_GAP_BOX
    pad = 0.02
    for _ in range(gap_refine):
        c = mesh.centroids()
        marked = np.nonzero(
            (c[:, 0] > x0 - pad) & (c[:, 0] < x1 + pad)
            & (c[:, 1] > y0 - pad) & (c[:, 1] < y1 + pad)
        )[0]
        mesh = adaptive_refine(mesh, marked)
    return mesh


def c_magnet_problem(mesh=None, base=0.01, current=2600.0, mu_r=1000.0):
    """Magnet boundary-value problem: linear iron, fixed total coil current.

    The two coil cross-sections carry +/- current/area so the net driven
    flux loops around the upper pole and crosses the gap.  u = 0 on the
    outer boundary.
    """
    if mesh is None:
        mesh = c_magnet_mesh(base)
    air = LinearReluctivity(VACUUM_NU)
    iron = LinearReluctivity(VACUUM_NU / mu_r)
    materials = {AIR: air, IRON: iron, COIL_POS: air, COIL_NEG: air, GAP_BOX: air}
    x0, y0, x1, y1 = _COIL_POS_BOX
    j = current / ((x1 - x0) * (y1 - y0))
    return MagnetostaticProblem(mesh, materials, source={COIL_POS: j, COIL_NEG: -j})
