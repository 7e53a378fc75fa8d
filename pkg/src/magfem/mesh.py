"""Conforming triangle meshes: construction, Gmsh I/O, refinement, submeshes.

Meshes are immutable after construction. Node flags distinguish interior
nodes, nodes on the outer boundary, and nodes on an extracted submesh
boundary; solvers constrain every non-interior node.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import MeshError, MshParseError

INTERIOR = 0
OUTER_BOUNDARY = 1
SUBMESH_BOUNDARY = 2


def _as_readonly(a, dtype, shape_tail):
    a = np.ascontiguousarray(a, dtype=dtype)
    if a.ndim != 1 + len(shape_tail) or a.shape[1:] != shape_tail:
        raise MeshError(f"bad array shape {a.shape}, expected (*, {shape_tail})")
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SubmeshMap:
    """Index maps from an extracted submesh back to its parent mesh."""

    node_parent: np.ndarray  # (N_sub,) parent node index per local node
    tri_parent: np.ndarray   # (M_sub,) parent triangle index per local triangle


@dataclass(frozen=True)
class TriMesh:
    """Conforming triangulation with region tags and tagged boundary edges.

    nodes          (N, 2) float64 coordinates
    triangles      (M, 3) node indices, counterclockwise
    tri_region     (M,)   integer region tag per triangle
    boundary_edges (B, 3) rows (n0, n1, tag); exactly the edges with a
                   single adjacent triangle
    node_flags     (N,)   INTERIOR / OUTER_BOUNDARY / SUBMESH_BOUNDARY
    green_pairs    (G, 5) rows (child_a, child_b, p0, p1, p2) recording
                   bisected closure triangles so adaptive refinement can
                   restore the parent (p0, p1, p2) before refining further
    """

    nodes: np.ndarray
    triangles: np.ndarray
    tri_region: np.ndarray
    boundary_edges: np.ndarray
    node_flags: np.ndarray
    green_pairs: np.ndarray = field(default_factory=lambda: np.empty((0, 5), dtype=np.int64))

    def __post_init__(self):
        object.__setattr__(self, "nodes", _as_readonly(self.nodes, np.float64, (2,)))
        object.__setattr__(self, "triangles", _as_readonly(self.triangles, np.int64, (3,)))
        tr = np.ascontiguousarray(self.tri_region, dtype=np.int64)
        tr.setflags(write=False)
        object.__setattr__(self, "tri_region", tr)
        object.__setattr__(self, "boundary_edges", _as_readonly(self.boundary_edges, np.int64, (3,)))
        nf = np.ascontiguousarray(self.node_flags, dtype=np.uint8)
        nf.setflags(write=False)
        object.__setattr__(self, "node_flags", nf)
        object.__setattr__(self, "green_pairs", _as_readonly(self.green_pairs, np.int64, (5,)))
        object.__setattr__(self, "_cache", {})
        self._validate()

    # -- basic queries ----------------------------------------------------

    @property
    def num_nodes(self):
        return self.nodes.shape[0]

    @property
    def num_triangles(self):
        return self.triangles.shape[0]

    def tri_coords(self):
        """Vertex coordinates per triangle, shape (M, 3, 2)."""
        return self.nodes[self.triangles]

    def signed_areas(self):
        p = self.tri_coords()
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def centroids(self):
        return self.tri_coords().mean(axis=1)

    def edges(self):
        """Unique undirected edges (E, 2), each row sorted, plus per-triangle
        edge indices (M, 3) and adjacent triangles (E, 2) with -1 padding."""
        key = "edges"
        if key not in self._cache:
            self._cache[key] = _edge_structure(self.triangles)
        return self._cache[key]

    def locate(self, points):
        """Triangle index containing each point (-1 outside the mesh)."""
        if "finder" not in self._cache:
            from matplotlib.tri import Triangulation

            tri = Triangulation(self.nodes[:, 0], self.nodes[:, 1], self.triangles)
            self._cache["finder"] = tri.get_trifinder()
        points = np.asarray(points, dtype=np.float64)
        return self._cache["finder"](points[:, 0], points[:, 1])

    # -- validation --------------------------------------------------------

    def _validate(self):
        n, m = self.num_nodes, self.num_triangles
        if n < 3 or m < 1:
            raise MeshError("mesh needs at least 3 nodes and 1 triangle")
        if self.tri_region.shape != (m,):
            raise MeshError("tri_region length does not match triangle count")
        if self.node_flags.shape != (n,):
            raise MeshError("node_flags length does not match node count")
        if self.triangles.min() < 0 or self.triangles.max() >= n:
            raise MeshError("triangle references a node out of range")
        if self.boundary_edges.size and (
            self.boundary_edges[:, :2].min() < 0 or self.boundary_edges[:, :2].max() >= n
        ):
            raise MeshError("boundary edge references a node out of range")

        areas = self.signed_areas()
        bad = np.nonzero(areas <= 0.0)[0]
        if bad.size:
            raise MeshError(
                f"triangle {bad[0]} has non-positive area {areas[bad[0]]:.3e} "
                "(inverted or degenerate)"
            )

        used = np.zeros(n, dtype=bool)
        used[self.triangles.ravel()] = True
        if not used.all():
            raise MeshError(f"node {int(np.nonzero(~used)[0][0])} belongs to no triangle")

        edges, _, edge_tris = self.edges()
        count = (edge_tris >= 0).sum(axis=1)
        if count.max() > 2:
            e = int(np.nonzero(count > 2)[0][0])
            raise MeshError(f"edge {tuple(edges[e])} shared by more than two triangles")

        single = edges[count == 1]
        declared = _sorted_pairs(self.boundary_edges[:, :2]) if self.boundary_edges.size else np.empty((0, 2), dtype=np.int64)
        if single.shape[0] != declared.shape[0] or not np.array_equal(
            _lex_sorted(single), _lex_sorted(declared)
        ):
            raise MeshError(
                f"boundary_edges ({declared.shape[0]}) do not match the "
                f"{single.shape[0]} single-triangle edges of the triangulation"
            )
        if self.boundary_edges.size:
            flags = self.node_flags[self.boundary_edges[:, :2].ravel()]
            if (flags == INTERIOR).any():
                raise MeshError("boundary edge endpoint flagged interior")


def _sorted_pairs(pairs):
    pairs = np.asarray(pairs, dtype=np.int64)
    return np.sort(pairs, axis=1)


def _lex_sorted(pairs):
    if pairs.size == 0:
        return pairs.reshape(0, 2)
    order = np.lexsort((pairs[:, 1], pairs[:, 0]))
    return pairs[order]


def _edge_structure(triangles):
    """Unique edges, per-triangle edge ids, and edge-to-triangle adjacency."""
    m = triangles.shape[0]
    raw = np.concatenate(
        [triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]], axis=0
    )
    raw = np.sort(raw, axis=1)
    edges, inverse = np.unique(raw, axis=0, return_inverse=True)
    tri_edge = inverse.reshape(3, m).T
    edge_tris = np.full((edges.shape[0], 2), -1, dtype=np.int64)
    tri_ids = np.tile(np.arange(m, dtype=np.int64), 3)
    # first slot, then second slot for duplicates; order of np.unique is stable
    order = np.argsort(inverse, kind="stable")
    sorted_edges = inverse[order]
    sorted_tris = tri_ids[order]
    first = np.ones(sorted_edges.shape[0], dtype=bool)
    first[1:] = sorted_edges[1:] != sorted_edges[:-1]
    edge_tris[sorted_edges[first], 0] = sorted_tris[first]
    second = ~first
    edge_tris[sorted_edges[second], 1] = sorted_tris[second]
    return edges, tri_edge, edge_tris


def _derive_flags(num_nodes, boundary_edges, base=None, flag=OUTER_BOUNDARY):
    flags = np.zeros(num_nodes, dtype=np.uint8) if base is None else base.copy()
    if boundary_edges.size:
        flags[boundary_edges[:, :2].ravel()] = np.maximum(
            flags[boundary_edges[:, :2].ravel()], flag
        )
    return flags


def mesh_size(mesh):
    """Maximum element diameter (longest edge over all triangles)."""
    p = mesh.tri_coords()
    e = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 1], p[:, 0] - p[:, 2]], axis=1)
    return float(np.sqrt((e ** 2).sum(axis=2)).max())


# -- generators -------------------------------------------------------------


def structured_square_mesh(n, bounds=(-1.0, -1.0, 1.0, 1.0), region_fn=None):
    """Structured triangulation of a rectangle, n cells per side.

    Every cell is split along its lower-left to upper-right diagonal, giving
    (n+1)^2 nodes and 2 n^2 triangles. ``region_fn`` maps cell centroids
    (M, 2) to integer region tags; the default tags everything 1.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    x0, y0, x1, y1 = map(float, bounds)
    if x1 <= x0 or y1 <= y0:
        raise ValueError(f"empty bounds {bounds}")
    xs = np.linspace(x0, x1, n + 1)
    ys = np.linspace(y0, y1, n + 1)
    xg, yg = np.meshgrid(xs, ys)
    nodes = np.column_stack([xg.ravel(), yg.ravel()])

    i, j = np.meshgrid(np.arange(n), np.arange(n))
    a = (j * (n + 1) + i).ravel()
    b = a + 1
    c = b + (n + 1)
    d = a + (n + 1)
    tris = np.concatenate(
        [np.column_stack([a, b, c]), np.column_stack([a, c, d])], axis=0
    )

    k = np.arange(n)
    bottom = np.column_stack([k, k + 1])
    right = np.column_stack([k * (n + 1) + n, (k + 1) * (n + 1) + n])
    top = np.column_stack([n * (n + 1) + k, n * (n + 1) + k + 1])
    left = np.column_stack([k * (n + 1), (k + 1) * (n + 1)])
    be = np.concatenate([bottom, right, top, left], axis=0)
    boundary = np.column_stack([be, np.ones(be.shape[0], dtype=np.int64)])

    region = np.ones(tris.shape[0], dtype=np.int64)
    if region_fn is not None:
        cent = nodes[tris].mean(axis=1)
        region = np.asarray(region_fn(cent), dtype=np.int64)

    flags = _derive_flags(nodes.shape[0], boundary)
    return TriMesh(nodes, tris, region, boundary, flags)


# -- refinement --------------------------------------------------------------


def _midpoint_key(nodes, a, b):
    mid = 0.5 * (nodes[a] + nodes[b])
    return mid, list(map(bytes, mid.astype(np.float64)))


def uniform_refine(mesh):
    """Red refinement of every triangle; the mesh size halves exactly.

    Region tags are inherited by all four children, boundary edges are split
    in two with their tag kept. Closure bookkeeping is dropped: the result
    is an all-red conforming mesh.
    """
    edges, tri_edge, _ = mesh.edges()
    n = mesh.num_nodes
    mid = 0.5 * (mesh.nodes[edges[:, 0]] + mesh.nodes[edges[:, 1]])
    nodes = np.concatenate([mesh.nodes, mid], axis=0)

    t = mesh.triangles
    m01 = n + tri_edge[:, 0]
    m12 = n + tri_edge[:, 1]
    m20 = n + tri_edge[:, 2]
    tris = np.concatenate(
        [
            np.column_stack([t[:, 0], m01, m20]),
            np.column_stack([t[:, 1], m12, m01]),
            np.column_stack([t[:, 2], m20, m12]),
            np.column_stack([m01, m12, m20]),
        ],
        axis=0,
    )
    region = np.tile(mesh.tri_region, 4)

    # boundary edges: locate each in the unique edge list to find its midpoint
    be = mesh.boundary_edges
    eidx = _find_edges(edges, be[:, :2])
    bm = n + eidx
    boundary = np.concatenate(
        [
            np.column_stack([be[:, 0], bm, be[:, 2]]),
            np.column_stack([bm, be[:, 1], be[:, 2]]),
        ],
        axis=0,
    )

    flags = np.concatenate([mesh.node_flags, np.zeros(mid.shape[0], dtype=np.uint8)])
    new_flags = _midpoint_flags(mesh, edges, eidx)
    flags[n + eidx] = new_flags
    return TriMesh(nodes, tris, region, boundary, flags)


def _midpoint_flags(mesh, edges, boundary_eidx):
    """Flags for midpoints of the given boundary edges."""
    f = np.maximum(
        mesh.node_flags[edges[boundary_eidx, 0]], mesh.node_flags[edges[boundary_eidx, 1]]
    )
    return f


def _find_edges(edges, pairs):
    """Index of each (sorted) pair in the lexicographically unique edge list."""
    pairs = np.sort(np.asarray(pairs, dtype=np.int64), axis=1)
    nmax = int(edges.max()) + 1
    keys = edges[:, 0] * nmax + edges[:, 1]
    want = pairs[:, 0] * nmax + pairs[:, 1]
    pos = np.searchsorted(keys, want)
    if pos.size:
        ok = (pos < keys.size) & (keys[np.minimum(pos, keys.size - 1)] == want)
        if not ok.all():
            raise MeshError("edge lookup failed: pair not present in mesh")
    return pos


def adaptive_refine(mesh, marked):
    """Red refinement of marked triangles with green (bisection) closure.

    Any green pair recorded on the input mesh is first collapsed back to its
    red parent (marks transfer to the parent), so bisections never stack and
    the minimum angle stays bounded over repeated calls. A single closure
    pass cannot fix neighbors that end up two levels apart, so passes repeat
    until the triangulation is conforming. New green pairs are recorded for
    the next call.
    """
    marked = np.asarray(marked)
    if marked.dtype != bool:
        flag = np.zeros(mesh.num_triangles, dtype=bool)
        flag[marked.astype(np.int64)] = True
        marked = flag
    if marked.shape != (mesh.num_triangles,):
        raise ValueError("marked has wrong length")

    state = (
        mesh.nodes.copy(),
        mesh.triangles,
        mesh.tri_region,
        mesh.boundary_edges,
        mesh.green_pairs,
    )
    for _ in range(64):
        state, conforming = _refine_pass(state, marked)
        if conforming:
            break
        marked = np.zeros(state[1].shape[0], dtype=bool)
    else:  # level differences are finite, so this is unreachable
        raise MeshError("green closure did not reach a conforming mesh")

    nodes, tris, region, boundary, greens = state
    flags = np.zeros(nodes.shape[0], dtype=np.uint8)
    flags[: mesh.node_flags.shape[0]] = mesh.node_flags
    if boundary.size:
        ends = boundary[:, :2]
        f = np.maximum(flags[ends[:, 0]], flags[ends[:, 1]])
        # a new midpoint inherits the stronger flag of its edge's endpoints
        np.maximum.at(flags, ends.ravel(), np.repeat(f, 2))
    return TriMesh(nodes, tris, region, boundary, flags, greens)


def _refine_pass(state, marked):
    """One collapse / red / green pass over raw mesh arrays."""
    nodes, tris, region, boundary_edges, green_pairs = state

    # collapse recorded green pairs to their parents
    if green_pairs.size:
        gp = green_pairs
        drop = np.zeros(tris.shape[0], dtype=bool)
        drop[gp[:, 0]] = True
        drop[gp[:, 1]] = True
        keep = ~drop
        parent_marked = marked[gp[:, 0]] | marked[gp[:, 1]]
        tris = np.concatenate([tris[keep], gp[:, 2:5]], axis=0)
        region = np.concatenate([region[keep], region[gp[:, 0]]])
        marked = np.concatenate([marked[keep], parent_marked])

    # node lookup by exact coordinates (midpoints are always computed as the
    # exact float mean of their endpoints, so byte equality is reliable)
    lookup = {nodes[i].tobytes(): i for i in range(nodes.shape[0])}

    edges, tri_edge, edge_tris = _edge_structure(tris)
    mid_exists = np.array(
        [(0.5 * (nodes[e0] + nodes[e1])).tobytes() in lookup for e0, e1 in edges],
        dtype=bool,
    )

    # propagate: a triangle with >= 2 split edges turns red, and so does one
    # whose single split edge carries a second-level midpoint (a bisection
    # there would leave the deeper hanging node unresolved forever)
    red = marked.copy()
    while True:
        edge_split = mid_exists.copy()
        adj_red = np.zeros(edges.shape[0], dtype=bool)
        valid0 = edge_tris[:, 0] >= 0
        adj_red[valid0] |= red[edge_tris[valid0, 0]]
        valid1 = edge_tris[:, 1] >= 0
        adj_red[valid1] |= red[edge_tris[valid1, 1]]
        edge_split |= adj_red
        split_count = edge_split[tri_edge].sum(axis=1)
        grow = (~red) & (split_count >= 2)
        if grow.any():
            red |= grow
            continue
        force = []
        for k in np.nonzero((~red) & (split_count == 1))[0]:
            loc = int(np.nonzero(edge_split[tri_edge[k]])[0][0])
            a, b = edges[tri_edge[k, loc]]
            apex = tris[k, (loc + 2) % 3]
            mc = 0.5 * (nodes[a] + nodes[b])
            deep = (0.5 * (mc + nodes[apex])).tobytes() in lookup
            if mc.tobytes() in lookup:
                deep = deep or any(
                    (0.5 * (nodes[p] + mc)).tobytes() in lookup for p in (a, b)
                )
            if deep:
                force.append(k)
        if not force:
            break
        red[np.asarray(force, dtype=np.int64)] = True

    # create midpoint nodes for every split edge
    split_eids = np.nonzero(edge_split)[0]
    mid_id = np.full(edges.shape[0], -1, dtype=np.int64)
    new_coords = []
    for e in split_eids:
        a, b = edges[e]
        coord = 0.5 * (nodes[a] + nodes[b])
        key = coord.tobytes()
        idx = lookup.get(key)
        if idx is None:
            idx = nodes.shape[0] + len(new_coords)
            lookup[key] = idx
            new_coords.append(coord)
        mid_id[e] = idx
    if new_coords:
        nodes = np.concatenate([nodes, np.array(new_coords)], axis=0)

    out_tris = []
    out_region = []
    green_rows = []
    t_mid = mid_id[tri_edge]  # (M, 3): midpoint of edges (01, 12, 20) or -1
    for k in range(tris.shape[0]):
        v0, v1, v2 = tris[k]
        m01, m12, m20 = t_mid[k]
        if red[k]:
            out_tris += [(v0, m01, m20), (v1, m12, m01), (v2, m20, m12), (m01, m12, m20)]
            out_region += [region[k]] * 4
            continue
        have = [m >= 0 for m in (m01, m12, m20)]
        nsplit = sum(have)
        if nsplit == 0:
            out_tris.append((v0, v1, v2))
            out_region.append(region[k])
        elif nsplit == 1:
            if have[0]:
                a, b, apex, m = v0, v1, v2, m01
            elif have[1]:
                a, b, apex, m = v1, v2, v0, m12
            else:
                a, b, apex, m = v2, v0, v1, m20
            i = len(out_tris)
            out_tris += [(a, m, apex), (m, b, apex)]
            out_region += [region[k]] * 2
            green_rows.append((i, i + 1, v0, v1, v2))
        else:  # cannot happen after propagation
            raise MeshError("closure propagation left a triangle with 2 split edges")

    out_tris = np.array(out_tris, dtype=np.int64)
    out_region = np.array(out_region, dtype=np.int64)
    greens = (
        np.array(green_rows, dtype=np.int64)
        if green_rows
        else np.empty((0, 5), dtype=np.int64)
    )

    # boundary edges: split where a midpoint node exists
    be_rows = []
    for a, b, tag in boundary_edges:
        key = (0.5 * (nodes[a] + nodes[b])).tobytes()
        m = lookup.get(key)
        if m is None:
            be_rows.append((a, b, tag))
        else:
            be_rows += [(a, m, tag), (m, b, tag)]
    boundary = np.array(be_rows, dtype=np.int64)

    # conforming iff every single-adjacency edge is a declared boundary edge
    out_edges, _, out_adj = _edge_structure(out_tris)
    single = out_edges[(out_adj >= 0).sum(axis=1) == 1]
    declared = _lex_sorted(_sorted_pairs(boundary[:, :2]))
    conforming = single.shape[0] == declared.shape[0] and np.array_equal(
        _lex_sorted(single), declared
    )
    return (nodes, out_tris, out_region, boundary, greens), conforming


# -- submesh extraction -------------------------------------------------------


def extract_submesh(mesh, region_tag):
    """Triangles of one region as a standalone mesh, plus index maps.

    Coordinates are copied bit-exactly. Nodes on the submesh boundary keep
    their outer-boundary flag where they had one and are flagged
    SUBMESH_BOUNDARY otherwise; boundary edges inherit the parent tag where
    they lie on the parent boundary and get tag 0 on interface parts.
    """
    sel = np.nonzero(mesh.tri_region == region_tag)[0]
    if sel.size == 0:
        raise MeshError(f"no triangles carry region tag {region_tag}")
    tris = mesh.triangles[sel]
    used = np.unique(tris.ravel())
    remap = np.full(mesh.num_nodes, -1, dtype=np.int64)
    remap[used] = np.arange(used.size)
    local_tris = remap[tris]
    nodes = mesh.nodes[used]

    edges, _, edge_tris = _edge_structure(local_tris)
    single = (edge_tris >= 0).sum(axis=1) == 1
    bedges = edges[single]

    parent_tags = {}
    for a, b, tag in mesh.boundary_edges:
        parent_tags[(min(a, b), max(a, b))] = tag
    rows = []
    for a, b in bedges:
        pa, pb = used[a], used[b]
        tag = parent_tags.get((min(pa, pb), max(pa, pb)), 0)
        rows.append((a, b, tag))
    boundary = np.array(rows, dtype=np.int64) if rows else np.empty((0, 3), dtype=np.int64)

    flags = np.zeros(used.size, dtype=np.uint8)
    on_b = np.unique(bedges.ravel()) if bedges.size else np.empty(0, dtype=np.int64)
    parent_flags = mesh.node_flags[used[on_b]]
    flags[on_b] = np.where(parent_flags == INTERIOR, SUBMESH_BOUNDARY, parent_flags)

    sub = TriMesh(nodes, local_tris, mesh.tri_region[sel], boundary, flags)
    return sub, SubmeshMap(node_parent=used, tri_parent=sel)


# -- Gmsh ASCII 2.2 I/O -------------------------------------------------------


def load_msh(path):
    """Read a Gmsh ASCII v2.2 file (triangles and physical tags).

    Line elements become boundary-edge tags where they lie on the mesh
    boundary; interior line elements are ignored. Unsupported element types
    raise MshParseError with the line number.
    """
    with open(path) as f:
        lines = f.read().splitlines()

    def fail(ln, msg):
        raise MshParseError(f"{path}:{ln + 1}: {msg}")

    i = 0
    nodes = None
    node_ids = None
    tris = []
    tri_tags = []
    line_elems = []
    while i < len(lines):
        tok = lines[i].strip()
        if tok == "$MeshFormat":
            parts = lines[i + 1].split()
            if not parts or not parts[0].startswith("2."):
                fail(i + 1, f"unsupported msh version {parts[:1]}, need ASCII 2.x")
            if len(parts) > 1 and parts[1] != "0":
                fail(i + 1, "binary msh files are not supported")
            i += 3
        elif tok == "$Nodes":
            try:
                count = int(lines[i + 1])
            except ValueError:
                fail(i + 1, "bad node count")
            nodes = np.empty((count, 2))
            node_ids = {}
            for k in range(count):
                parts = lines[i + 2 + k].split()
                if len(parts) < 4:
                    fail(i + 2 + k, "node line needs 'id x y z'")
                node_ids[int(parts[0])] = k
                nodes[k] = float(parts[1]), float(parts[2])
            i += 2 + count
            if lines[i].strip() != "$EndNodes":
                fail(i, "missing $EndNodes")
            i += 1
        elif tok == "$Elements":
            try:
                count = int(lines[i + 1])
            except ValueError:
                fail(i + 1, "bad element count")
            for k in range(count):
                ln = i + 2 + k
                parts = lines[ln].split()
                if len(parts) < 3:
                    fail(ln, "element line too short")
                etype = int(parts[1])
                ntags = int(parts[2])
                tags = [int(x) for x in parts[3 : 3 + ntags]]
                conn = [int(x) for x in parts[3 + ntags :]]
                phys = tags[0] if tags else 0
                if etype == 2:
                    if len(conn) != 3:
                        fail(ln, "triangle needs 3 nodes")
                    tris.append(conn)
                    tri_tags.append(phys)
                elif etype == 1:
                    if len(conn) != 2:
                        fail(ln, "line needs 2 nodes")
                    line_elems.append((conn[0], conn[1], phys))
                elif etype == 15:
                    continue  # point elements carry no mesh content here
                else:
                    fail(ln, f"unsupported element type {etype} (need 2D triangles)")
            i += 2 + count
            if lines[i].strip() != "$EndElements":
                fail(i, "missing $EndElements")
            i += 1
        elif tok.startswith("$"):
            # skip unknown sections ($PhysicalNames etc.)
            end = "$End" + tok[1:]
            j = i + 1
            while j < len(lines) and lines[j].strip() != end:
                j += 1
            if j >= len(lines):
                fail(i, f"unterminated section {tok}")
            i = j + 1
        elif tok == "":
            i += 1
        else:
            fail(i, f"unexpected content {tok!r}")

    if nodes is None:
        raise MshParseError(f"{path}: no $Nodes section")
    if not tris:
        raise MshParseError(f"{path}: no triangles")

    def map_ids(conn, ln_hint=""):
        try:
            return [node_ids[c] for c in conn]
        except KeyError as e:
            raise MshParseError(f"{path}: element references unknown node {e}") from None

    tris = np.array([map_ids(c) for c in tris], dtype=np.int64)
    region = np.array(tri_tags, dtype=np.int64)

    edges, _, edge_tris = _edge_structure(tris)
    single = (edge_tris >= 0).sum(axis=1) == 1
    bset = {}
    for a, b in edges[single]:
        bset[(int(a), int(b))] = 0
    for n0, n1, tag in line_elems:
        a, b = sorted((node_ids.get(n0, -1), node_ids.get(n1, -1)))
        if (a, b) in bset:
            bset[(a, b)] = tag
    boundary = np.array([(a, b, t) for (a, b), t in sorted(bset.items())], dtype=np.int64)
    if boundary.size == 0:
        boundary = np.empty((0, 3), dtype=np.int64)
    flags = _derive_flags(nodes.shape[0], boundary)
    return TriMesh(nodes, tris, region, boundary, flags)


def save_msh(mesh, path):
    """Write Gmsh ASCII v2.2: triangles with their region tag as physical
    tag, boundary edges as line elements."""
    with open(path, "w") as f:
        f.write("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n")
        f.write(f"$Nodes\n{mesh.num_nodes}\n")
        for i, (x, y) in enumerate(mesh.nodes, start=1):
            f.write(f"{i} {float(x)!r} {float(y)!r} 0\n")
        f.write("$EndNodes\n")
        total = mesh.num_triangles + mesh.boundary_edges.shape[0]
        f.write(f"$Elements\n{total}\n")
        eid = 1
        for (a, b, tag) in mesh.boundary_edges:
            f.write(f"{eid} 1 2 {tag} {tag} {a + 1} {b + 1}\n")
            eid += 1
        for k in range(mesh.num_triangles):
            v = mesh.triangles[k] + 1
            t = mesh.tri_region[k]
            f.write(f"{eid} 2 2 {t} {t} {v[0]} {v[1]} {v[2]}\n")
            eid += 1
        f.write("$EndElements\n")


def save_txt(mesh, path):
    """Minimal plain-text dump (counts, coordinates, triangles with region)."""
    with open(path, "w") as f:
        f.write(f"{mesh.num_nodes} {mesh.num_triangles}\n")
        for x, y in mesh.nodes:
            f.write(f"{float(x)!r} {float(y)!r}\n")
        for k in range(mesh.num_triangles):
            v = mesh.triangles[k]
            f.write(f"{v[0]} {v[1]} {v[2]} {mesh.tri_region[k]}\n")


def load_txt(path):
    """Read the plain-text dump; boundary edges are derived (tag 1)."""
    with open(path) as f:
        first = f.readline().split()
        n, m = int(first[0]), int(first[1])
        nodes = np.array([[float(v) for v in f.readline().split()] for _ in range(n)])
        rows = [[int(v) for v in f.readline().split()] for _ in range(m)]
    rows = np.array(rows, dtype=np.int64)
    tris, region = rows[:, :3], rows[:, 3]
    edges, _, edge_tris = _edge_structure(tris)
    single = (edge_tris >= 0).sum(axis=1) == 1
    boundary = np.column_stack(
        [edges[single], np.ones(int(single.sum()), dtype=np.int64)]
    )
    flags = _derive_flags(n, boundary)
    return TriMesh(nodes, tris, region, boundary, flags)
