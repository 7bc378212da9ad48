# -*- coding: utf-8 -*-
"""Conforming triangle meshes with subdomain/boundary tags and bisection.

Conventions
-----------
* Cells are counterclockwise vertex triples.
* Local edge i of a cell is the edge opposite local vertex i, i.e. it
  connects local vertices (i+1)%3 and (i+2)%3.
* `refinement_edge[c]` is the local index of the newest-vertex bisection
  edge of cell c.  On generated meshes it is initialized to the longest
  edge; bisection maintains it by the newest-vertex rule.
* Subdomain tags: 0 marks free flow, 1 marks a porous region (any
  nonnegative integers are accepted).  Boundary tags: 1 is the no-slip
  (essential) part, 2 the natural do-nothing part.
"""

import numpy as np

BOUNDARY_DIRICHLET = 1
BOUNDARY_NATURAL = 2


class MeshError(ValueError):
    """Invalid mesh data."""


class TopologyError(MeshError):
    """Non-manifold connectivity (an edge shared by more than two cells)."""


class AlignmentError(MeshError):
    """Requested subdomain interface does not align with the mesh lattice."""


class FacetTable:
    """Edge table derived from cell connectivity.

    Attributes
    ----------
    vertices : ndarray, (ne, 2)
        Vertex pair of each facet, sorted ascending.
    cells : ndarray, (ne, 2)
        Adjacent cell indices, lower index first; -1 marks no second cell.
    local_edge : ndarray, (ne, 2)
        Local edge index of the facet within each adjacent cell (-1 unused).
    lengths : ndarray, (ne,)
    normals : ndarray, (ne, 2)
        Unit normal pointing out of cells[:, 0] (outward on the boundary).
    boundary_tag : ndarray, (ne,)
        0 for interior facets, otherwise the boundary tag.
    cell_to_facets : ndarray, (nc, 3)
        Facet index of each local edge of each cell.
    """

    def __init__(self, vertices_xy, cells):
        nc = cells.shape[0]
        local = cells[:, [[1, 2], [2, 0], [0, 1]]].reshape(-1, 2)
        pairs = np.sort(local, axis=1)
        facets, inverse = np.unique(pairs, axis=0, return_inverse=True)
        ne = facets.shape[0]
        counts = np.bincount(inverse, minlength=ne)
        if np.any(counts > 2):
            bad = int(np.argmax(counts))
            raise TopologyError(
                "edge %s shared by %d cells" % (tuple(facets[bad]), counts[bad])
            )
        order = np.argsort(inverse, kind="stable")
        adj_cells = np.full((ne, 2), -1, dtype=np.int64)
        adj_local = np.full((ne, 2), -1, dtype=np.int64)
        fids = inverse[order]
        # stable sort keeps flat (cell-major) order within a facet group, so
        # the first occurrence belongs to the lower-indexed cell
        is_second = np.r_[False, fids[1:] == fids[:-1]]
        slot = is_second.astype(np.int64)
        adj_cells[fids, slot] = order // 3
        adj_local[fids, slot] = order % 3
        tang = vertices_xy[facets[:, 1]] - vertices_xy[facets[:, 0]]
        lengths = np.linalg.norm(tang, axis=1)
        # outward normal of the first adjacent cell: its local edge runs
        # counterclockwise, so rotate the directed edge by -90 degrees
        c0 = adj_cells[:, 0]
        l0 = adj_local[:, 0]
        start = cells[c0, (l0 + 1) % 3]
        end = cells[c0, (l0 + 2) % 3]
        direct = vertices_xy[end] - vertices_xy[start]
        normals = np.column_stack([direct[:, 1], -direct[:, 0]])
        normals /= lengths[:, None]
        self.vertices = facets
        self.cells = adj_cells
        self.local_edge = adj_local
        self.lengths = lengths
        self.normals = normals
        self.boundary_tag = np.zeros(ne, dtype=np.int64)
        self.cell_to_facets = inverse.reshape(nc, 3)

    @property
    def n(self):
        return self.vertices.shape[0]

    @property
    def interior_mask(self):
        return self.cells[:, 1] >= 0

    @property
    def boundary_mask(self):
        return self.cells[:, 1] < 0


class Mesh:
    """Immutable conforming triangulation with tags and bisection genealogy.

    Parameters
    ----------
    vertices : (nv, 2) float array
    cells : (nc, 3) int array, counterclockwise
    cell_subdomain : (nc,) int array, optional (default all 0)
    boundary_tags : dict {(vmin, vmax): tag}, optional
        Tags for boundary facets; untagged boundary facets default to the
        essential tag 1.
    refinement_edge : (nc,) int array, optional
        Defaults to the longest edge of each cell.
    parent_cell : (nc,) int array, optional
        Genealogy: index of the originating cell in the previous mesh
        (-1 for generator-created meshes).
    vertex_parents : (nv, 2) int array, optional
        For bisection-created vertices, the endpoint indices of the split
        edge; (-1, -1) for original vertices.
    """

    def __init__(
        self,
        vertices,
        cells,
        cell_subdomain=None,
        boundary_tags=None,
        refinement_edge=None,
        parent_cell=None,
        vertex_parents=None,
        validate=True,
    ):
        self.vertices = np.ascontiguousarray(vertices, dtype=float)
        self.cells = np.ascontiguousarray(cells, dtype=np.int64)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 2:
            raise MeshError("vertices must be an (nv, 2) array")
        if self.cells.ndim != 2 or self.cells.shape[1] != 3:
            raise MeshError("cells must be an (nc, 3) array")
        nc = self.cells.shape[0]
        nv = self.vertices.shape[0]
        if cell_subdomain is None:
            cell_subdomain = np.zeros(nc, dtype=np.int64)
        self.cell_subdomain = np.ascontiguousarray(cell_subdomain, dtype=np.int64)
        if self.cell_subdomain.shape != (nc,):
            raise MeshError("cell_subdomain must have one tag per cell")

        v = self.vertices
        t = self.cells
        d1 = v[t[:, 1]] - v[t[:, 0]]
        d2 = v[t[:, 2]] - v[t[:, 0]]
        signed = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
        if validate and np.any(signed <= 0.0):
            bad = int(np.argmin(signed))
            raise MeshError(
                "cell %d has non-positive signed area %.3e" % (bad, signed[bad])
            )
        self.areas = signed
        self.facets = FacetTable(v, t)

        if boundary_tags is None:
            boundary_tags = {}
        tags = self.facets.boundary_tag
        bmask = self.facets.boundary_mask
        tags[bmask] = BOUNDARY_DIRICHLET
        if boundary_tags:
            keys = {tuple(p): i for i, p in enumerate(map(tuple, self.facets.vertices))}
            for pair, tag in boundary_tags.items():
                a, b = int(min(pair)), int(max(pair))
                idx = keys.get((a, b))
                if idx is None:
                    raise MeshError("tagged edge %s not present in mesh" % ((a, b),))
                if not bmask[idx]:
                    raise MeshError("tagged edge %s is interior" % ((a, b),))
                tags[idx] = int(tag)

        if refinement_edge is None:
            edge_len = self.facets.lengths[self.facets.cell_to_facets]
            refinement_edge = np.argmax(edge_len, axis=1)
        self.refinement_edge = np.ascontiguousarray(refinement_edge, dtype=np.int64)
        if self.refinement_edge.shape != (nc,):
            raise MeshError("refinement_edge must have one entry per cell")

        if parent_cell is None:
            parent_cell = np.full(nc, -1, dtype=np.int64)
        self.parent_cell = np.ascontiguousarray(parent_cell, dtype=np.int64)
        if vertex_parents is None:
            vertex_parents = np.full((nv, 2), -1, dtype=np.int64)
        self.vertex_parents = np.ascontiguousarray(vertex_parents, dtype=np.int64)

    @property
    def num_vertices(self):
        return self.vertices.shape[0]

    @property
    def num_cells(self):
        return self.cells.shape[0]

    def cell_vertices(self):
        """Coordinates per cell, shape (nc, 3, 2)."""
        return self.vertices[self.cells]

    def cell_centroids(self):
        return self.vertices[self.cells].mean(axis=1)

    def cell_diameters(self):
        """h_T, the longest edge of each cell."""
        return self.facets.lengths[self.facets.cell_to_facets].max(axis=1)

    def min_angle(self):
        """Smallest interior angle over all cells, in radians."""
        v = self.cell_vertices()
        angles = []
        for i in range(3):
            a = v[:, (i + 1) % 3] - v[:, i]
            b = v[:, (i + 2) % 3] - v[:, i]
            cosang = np.einsum("cd,cd->c", a, b) / (
                np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1)
            )
            angles.append(np.arccos(np.clip(cosang, -1.0, 1.0)))
        return float(np.min(angles))

    def boundary_tag_dict(self):
        """Boundary tags keyed by sorted vertex pair (for rebuilds)."""
        f = self.facets
        out = {}
        for i in np.flatnonzero(f.boundary_mask):
            out[tuple(f.vertices[i])] = int(f.boundary_tag[i])
        return out

    def has_natural_boundary(self):
        f = self.facets
        return bool(np.any(f.boundary_tag[f.boundary_mask] == BOUNDARY_NATURAL))


def facet_table(mesh):
    """Facet adjacency, lengths h_e, and unit normals of a mesh."""
    return mesh.facets


def generate_unit_square(n, subdomain_box=None):
    """Structured triangulation of (0,1)^2 with 2*n^2 cells.

    Every grid square is split along its lower-left to upper-right
    diagonal.  If `subdomain_box` = (x0, y0, x1, y1) is given, cells whose
    centroid lies inside it are tagged 1 (porous); the box corners must lie
    on lattice lines of the n x n grid.  All boundary facets carry the
    essential tag 1.
    """
    if n < 1:
        raise MeshError("n must be >= 1, got %d" % n)
    n = int(n)
    xs = np.linspace(0.0, 1.0, n + 1)
    xv, yv = np.meshgrid(xs, xs, indexing="xy")
    vertices = np.column_stack([xv.ravel(), yv.ravel()])

    def vid(i, j):
        return j * (n + 1) + i

    cells = np.empty((2 * n * n, 3), dtype=np.int64)
    k = 0
    for j in range(n):
        for i in range(n):
            a = vid(i, j)
            b = vid(i + 1, j)
            c = vid(i + 1, j + 1)
            d = vid(i, j + 1)
            cells[k] = (a, b, c)
            cells[k + 1] = (a, c, d)
            k += 2

    subdomain = np.zeros(cells.shape[0], dtype=np.int64)
    if subdomain_box is not None:
        x0, y0, x1, y1 = map(float, subdomain_box)
        if not (0.0 <= x0 < x1 <= 1.0 and 0.0 <= y0 < y1 <= 1.0):
            raise MeshError("subdomain_box must be a nonempty box inside (0,1)^2")
        for val, nm in ((x0, "x0"), (y0, "y0"), (x1, "x1"), (y1, "y1")):
            if abs(val * n - round(val * n)) > 1e-9:
                raise AlignmentError(
                    "box corner %s=%g is not on the n=%d lattice" % (nm, val, n)
                )
        cent = vertices[cells].mean(axis=1)
        inside = (
            (cent[:, 0] > x0) & (cent[:, 0] < x1) & (cent[:, 1] > y0) & (cent[:, 1] < y1)
        )
        subdomain[inside] = 1
    return Mesh(vertices, cells, cell_subdomain=subdomain)


def _box_segments(box):
    x0, y0, x1, y1 = box
    return (
        (x0, y0, x1, y0),
        (x1, y0, x1, y1),
        (x1, y1, x0, y1),
        (x0, y1, x0, y0),
    )


def _star_centroid_smooth(points, n_fixed, iterations):
    """Area-weighted star-centroid smoothing of the free points.

    Moves every free point toward the area-weighted centroid of its
    triangle star, retriangulating each sweep.  Converges to a nearly
    isotropic, GMSH-quality point distribution.
    """
    from scipy.spatial import Delaunay

    pts = points.copy()
    for _ in range(iterations):
        simp = Delaunay(pts).simplices
        d1 = pts[simp[:, 1]] - pts[simp[:, 0]]
        d2 = pts[simp[:, 2]] - pts[simp[:, 0]]
        area = 0.5 * np.abs(d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
        cent = pts[simp].mean(axis=1)
        num = np.zeros_like(pts)
        den = np.zeros(len(pts))
        for k in range(3):
            np.add.at(num, simp[:, k], area[:, None] * cent)
            np.add.at(den, simp[:, k], area)
        moved = num / den[:, None]
        pts[n_fixed:] = moved[n_fixed:]
    return pts


_QUALITY_CACHE = {}

# single global calibration of the interior point spacing relative to the
# boundary spacing 1/n; fixed once for all resolutions and parameter sets
QUALITY_SPACING_FACTOR = 0.93


def generate_unit_square_quality(
    n,
    subdomain_box=None,
    spacing_factor=QUALITY_SPACING_FACTOR,
    smoothing_iterations=80,
):
    """Unstructured quality triangulation of (0,1)^2 with mesh size 1/n.

    Boundary edges (and the edges of `subdomain_box`, which need not be
    lattice-aligned) are divided at spacing 1/n and kept fixed; the
    interior is filled with a smoothed near-hexagonal point set and
    triangulated by Delaunay.  The box interface is exactly facet-aligned
    for any n.  Deterministic: no randomness is involved.
    """
    key = (int(n), tuple(map(float, subdomain_box)) if subdomain_box else None,
           float(spacing_factor), int(smoothing_iterations))
    cached = _QUALITY_CACHE.get(key)
    if cached is not None:
        return cached
    if n < 2:
        raise MeshError("quality mesh requires n >= 2, got %d" % n)
    from scipy.spatial import Delaunay

    n = int(n)
    h = 1.0 / n
    hi = spacing_factor * h
    fixed = []
    side = np.linspace(0.0, 1.0, n + 1)
    for t in side:
        fixed += [(t, 0.0), (t, 1.0)]
    for t in side[1:-1]:
        fixed += [(0.0, t), (1.0, t)]
    segments = []
    if subdomain_box is not None:
        x0, y0, x1, y1 = map(float, subdomain_box)
        if not (0.0 < x0 < x1 < 1.0 and 0.0 < y0 < y1 < 1.0):
            raise MeshError("subdomain_box must be strictly inside (0,1)^2")
        for ax, ay, bx, by in _box_segments((x0, y0, x1, y1)):
            m = max(1, round(np.hypot(bx - ax, by - ay) * n))
            ts = np.linspace(0.0, 1.0, m + 1)
            pts = np.column_stack([ax + ts * (bx - ax), ay + ts * (by - ay)])
            segments.append(pts)
            fixed += [tuple(p) for p in pts[1:]]
    fixed = np.array(sorted(set(fixed)))
    n_fixed = len(fixed)

    rows = []
    rowh = hi * np.sqrt(3.0) / 2.0
    j = 1
    while j * rowh < 1.0 - 0.3 * hi:
        y = j * rowh
        off = 0.25 * hi + (0.5 * hi if j % 2 else 0.0)
        xs = np.arange(off, 1.0 - 0.3 * hi + 1e-12, hi)
        xs = xs[xs > 0.3 * hi]
        rows.append(np.column_stack([xs, np.full(xs.size, y)]))
        j += 1
    interior = np.vstack(rows)
    # keep clearance from every constrained line so Delaunay preserves them
    dist = np.minimum.reduce(
        [interior[:, 0], 1.0 - interior[:, 0], interior[:, 1], 1.0 - interior[:, 1]]
    )
    if subdomain_box is not None:
        for ax, ay, bx, by in _box_segments((x0, y0, x1, y1)):
            if ax == bx:
                near = (interior[:, 1] >= min(ay, by) - 0.3 * h) & (
                    interior[:, 1] <= max(ay, by) + 0.3 * h
                )
                dist = np.where(
                    near, np.minimum(dist, np.abs(interior[:, 0] - ax)), dist
                )
            else:
                near = (interior[:, 0] >= min(ax, bx) - 0.3 * h) & (
                    interior[:, 0] <= max(ax, bx) + 0.3 * h
                )
                dist = np.where(
                    near, np.minimum(dist, np.abs(interior[:, 1] - ay)), dist
                )
    interior = interior[dist > 0.5 * h]

    points = _star_centroid_smooth(
        np.vstack([fixed, interior]), n_fixed, smoothing_iterations
    )
    cells = Delaunay(points).simplices.copy()
    d1 = points[cells[:, 1]] - points[cells[:, 0]]
    d2 = points[cells[:, 2]] - points[cells[:, 0]]
    flip = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0] < 0.0
    cells[flip] = cells[flip][:, [0, 2, 1]]

    subdomain = np.zeros(len(cells), dtype=np.int64)
    if subdomain_box is not None:
        cent = points[cells].mean(axis=1)
        subdomain[
            (cent[:, 0] > x0) & (cent[:, 0] < x1) & (cent[:, 1] > y0) & (cent[:, 1] < y1)
        ] = 1
    mesh = Mesh(points, cells, cell_subdomain=subdomain)

    if subdomain_box is not None:
        present = set(map(tuple, mesh.facets.vertices.tolist()))
        lookup = {tuple(np.round(p, 12)): i for i, p in enumerate(points)}
        for seg in segments:
            ids = [lookup.get(tuple(np.round(p, 12))) for p in seg]
            for a, b in zip(ids[:-1], ids[1:]):
                if a is None or b is None or (min(a, b), max(a, b)) not in present:
                    raise MeshError(
                        "triangulation failed to include a subdomain interface edge"
                    )
    if len(_QUALITY_CACHE) > 32:
        _QUALITY_CACHE.clear()
    _QUALITY_CACHE[key] = mesh
    return mesh


_LSHAPE_SQUARES = ("lower_left", "upper_left", "upper_right")


def generate_lshape(n, layout=None, variant="full_dirichlet", gamma2_segments=None):
    """Conforming triangulation of (0,1)^2 minus the lower-right quadrant.

    Parameters
    ----------
    n : even int
        Lattice resolution of the full unit square (h = 1/n); n must be
        even so the re-entrant corner (0.5, 0.5) is a lattice point.
    layout : mapping, optional
        Subdomain tag per unit sub-square, keys 'lower_left', 'upper_left',
        'upper_right' (missing keys default to 0).
    variant : str
        'full_dirichlet' tags the whole boundary essential; 'mixed' reads
        `gamma2_segments` for the natural part.
    gamma2_segments : list of (x0, y0, x1, y1), optional
        Straight boundary segments to tag as do-nothing; a boundary facet
        is tagged when both endpoints lie on one segment.
    """
    n = int(n)
    if n < 2 or n % 2 != 0:
        raise MeshError("lshape requires even n >= 2, got %d" % n)
    if variant not in ("full_dirichlet", "mixed"):
        raise MeshError("unknown lshape variant %r" % (variant,))
    square = generate_unit_square(n)
    cent = square.cell_centroids()
    keep = ~((cent[:, 0] > 0.5) & (cent[:, 1] < 0.5))
    cells_kept = square.cells[keep]
    used = np.unique(cells_kept)
    remap = np.full(square.num_vertices, -1, dtype=np.int64)
    remap[used] = np.arange(used.size)
    vertices = square.vertices[used]
    cells = remap[cells_kept]

    cent = vertices[cells].mean(axis=1)
    subdomain = np.zeros(cells.shape[0], dtype=np.int64)
    layout = dict(layout or {})
    unknown = set(layout) - set(_LSHAPE_SQUARES)
    if unknown:
        raise MeshError("unknown lshape sub-squares: %s" % sorted(unknown))
    masks = {
        "lower_left": (cent[:, 0] < 0.5) & (cent[:, 1] < 0.5),
        "upper_left": (cent[:, 0] < 0.5) & (cent[:, 1] > 0.5),
        "upper_right": (cent[:, 0] > 0.5) & (cent[:, 1] > 0.5),
    }
    for name, tag in layout.items():
        subdomain[masks[name]] = int(tag)

    mesh = Mesh(vertices, cells, cell_subdomain=subdomain)
    if variant == "mixed" and gamma2_segments:
        tags = {}
        f = mesh.facets
        for i in np.flatnonzero(f.boundary_mask):
            a, b = f.vertices[i]
            pa, pb = mesh.vertices[a], mesh.vertices[b]
            for seg in gamma2_segments:
                if _on_segment(pa, seg) and _on_segment(pb, seg):
                    tags[(int(a), int(b))] = BOUNDARY_NATURAL
                    break
        if tags:
            mesh = Mesh(
                mesh.vertices,
                mesh.cells,
                cell_subdomain=mesh.cell_subdomain,
                boundary_tags=tags,
                refinement_edge=mesh.refinement_edge,
            )
    return mesh


def _on_segment(p, seg, tol=1e-12):
    x0, y0, x1, y1 = map(float, seg)
    a = np.array([x0, y0])
    d = np.array([x1 - x0, y1 - y0])
    length = np.linalg.norm(d)
    if length < tol:
        return False
    r = p - a
    cross = d[0] * r[1] - d[1] * r[0]
    if abs(cross) > tol * length:
        return False
    t = np.dot(r, d) / (length * length)
    return -tol <= t <= 1.0 + tol


def refine_bisect(mesh, marked):
    """Newest-vertex bisection of the marked cells with conformity closure.

    Every marked cell is bisected at least once; neighbors are bisected as
    needed so the result has no hanging nodes.  Children inherit subdomain
    tags, split boundary facets inherit boundary tags, and the genealogy
    fields (`parent_cell`, `vertex_parents`) record the construction.
    """
    marked = np.asarray(sorted(set(int(c) for c in marked)), dtype=np.int64)
    if marked.size and (marked.min() < 0 or marked.max() >= mesh.num_cells):
        raise MeshError("marked cell index out of range")
    if marked.size == 0:
        return Mesh(
            mesh.vertices,
            mesh.cells,
            cell_subdomain=mesh.cell_subdomain,
            boundary_tags=mesh.boundary_tag_dict(),
            refinement_edge=mesh.refinement_edge,
            parent_cell=np.arange(mesh.num_cells),
            vertex_parents=mesh.vertex_parents,
            validate=False,
        )

    f = mesh.facets
    c2f = f.cell_to_facets
    nc = mesh.num_cells
    ref_facet = c2f[np.arange(nc), mesh.refinement_edge]

    edge_marked = np.zeros(f.n, dtype=bool)
    edge_marked[ref_facet[marked]] = True
    # closure: a cell losing any edge must also lose its refinement edge
    while True:
        touched = edge_marked[c2f].any(axis=1)
        need = touched & ~edge_marked[ref_facet]
        if not need.any():
            break
        edge_marked[ref_facet[need]] = True

    split = np.flatnonzero(edge_marked)
    nv_old = mesh.num_vertices
    midpoint_of = np.full(f.n, -1, dtype=np.int64)
    midpoint_of[split] = nv_old + np.arange(split.size)
    new_vertices = 0.5 * (
        mesh.vertices[f.vertices[split, 0]] + mesh.vertices[f.vertices[split, 1]]
    )
    vertices = np.vstack([mesh.vertices, new_vertices])
    vertex_parents = np.vstack(
        [mesh.vertex_parents, f.vertices[split].astype(np.int64)]
    )

    cells_out = []
    refedge_out = []
    subdom_out = []
    parent_out = []

    def emit(tri, parent, subdom):
        cells_out.append(tri)
        refedge_out.append(2)  # children's refinement edge joins vertices 0,1
        parent_out.append(parent)
        subdom_out.append(subdom)

    t = mesh.cells
    for c in range(nc):
        lm = edge_marked[c2f[c]]
        if not lm.any():
            cells_out.append(tuple(t[c]))
            refedge_out.append(mesh.refinement_edge[c])
            parent_out.append(c)
            subdom_out.append(mesh.cell_subdomain[c])
            continue
        r = mesh.refinement_edge[c]
        z1 = t[c, (r + 1) % 3]
        z2 = t[c, (r + 2) % 3]
        z3 = t[c, r]
        m = midpoint_of[c2f[c, r]]
        sd = mesh.cell_subdomain[c]
        # first child covers edge (z3, z1) = local edge (r+2)%3 of the parent
        if lm[(r + 2) % 3]:
            m1 = midpoint_of[c2f[c, (r + 2) % 3]]
            emit((m, z3, m1), c, sd)
            emit((z1, m, m1), c, sd)
        else:
            emit((z3, z1, m), c, sd)
        # second child covers edge (z2, z3) = local edge (r+1)%3
        if lm[(r + 1) % 3]:
            m2 = midpoint_of[c2f[c, (r + 1) % 3]]
            emit((m, z2, m2), c, sd)
            emit((z3, m, m2), c, sd)
        else:
            emit((z2, z3, m), c, sd)

    boundary_tags = {}
    for i in np.flatnonzero(f.boundary_mask):
        a, b = (int(x) for x in f.vertices[i])
        tag = int(f.boundary_tag[i])
        m = midpoint_of[i]
        if m >= 0:
            boundary_tags[(a, int(m))] = tag
            boundary_tags[(b, int(m))] = tag
        else:
            boundary_tags[(a, b)] = tag

    return Mesh(
        vertices,
        np.asarray(cells_out, dtype=np.int64),
        cell_subdomain=np.asarray(subdom_out, dtype=np.int64),
        boundary_tags=boundary_tags,
        refinement_edge=np.asarray(refedge_out, dtype=np.int64),
        parent_cell=np.asarray(parent_out, dtype=np.int64),
        vertex_parents=vertex_parents,
        validate=False,
    )


def refine_uniform(mesh, rounds=1):
    """Bisect every cell, `rounds` times."""
    for _ in range(rounds):
        mesh = refine_bisect(mesh, np.arange(mesh.num_cells))
    return mesh
