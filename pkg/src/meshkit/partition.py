"""Partitioners: assign every grid point to a partition."""

import json
import math

import numpy as np

from .errors import InvalidArgument, UnsupportedGrid


class Distribution:
    """Partition index of every grid point.

    Parameters
    ----------
    part : array_like of int
    nb_partitions : int
    """

    def __init__(self, part, nb_partitions):
        self.part = np.ascontiguousarray(part, dtype=np.int64)
        self.part.flags.writeable = False
        self.nb_partitions = int(nb_partitions)
        if self.nb_partitions < 1:
            raise InvalidArgument("nb_partitions must be >= 1")
        valid = self.part[(self.part >= 0) & (self.part < self.nb_partitions)]
        self.counts = np.bincount(valid, minlength=self.nb_partitions)

    @classmethod
    def serial(cls, size):
        return cls(np.zeros(size, dtype=np.int64), 1)

    def __len__(self):
        return len(self.part)

    def __eq__(self, other):
        return (
            isinstance(other, Distribution)
            and self.nb_partitions == other.nb_partitions
            and np.array_equal(self.part, other.part)
        )

    def __repr__(self):
        return f"Distribution(size={len(self.part)}, nb_partitions={self.nb_partitions})"

    def to_dict(self):
        return {"nb_partitions": self.nb_partitions, "part": self.part.tolist()}

    def to_json(self):
        return json.dumps(self.to_dict(), separators=(",", ":"))

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        return cls(d["part"], d["nb_partitions"])

    def to_text(self):
        """One partition index per line."""
        return "".join(f"{p}\n" for p in self.part)


def validate_distribution(dist, grid) -> bool:
    """True iff ``dist`` is a consistent distribution of ``grid``."""
    part = np.asarray(dist.part)
    if len(part) != grid.size or dist.nb_partitions < 1:
        return False
    if part.size and (part.min() < 0 or part.max() >= dist.nb_partitions):
        return False
    counts = np.asarray(dist.counts)
    if len(counts) != dist.nb_partitions:
        return False
    if not np.array_equal(counts, np.bincount(part, minlength=dist.nb_partitions)):
        return False
    if dist.nb_partitions <= grid.size and np.any(counts == 0):
        return False
    return True


def _check_p(P):
    if isinstance(P, bool) or int(P) != P or P < 1:
        raise InvalidArgument(f"number of partitions must be a positive integer, got {P!r}")
    return int(P)


def _split(n, k):
    """Sizes of k contiguous chunks of n items, balanced to +-1, larger first."""
    q, r = divmod(n, k)
    return np.array([q + (i < r) for i in range(k)], dtype=np.int64)


def eq_bands(P):
    """Regions per band of the equal-area partition of the sphere into P regions.

    Two polar caps of one region each and collars in between whose region
    counts come from ideal (fractional) counts rounded with a running
    discrepancy.
    """
    P = _check_p(P)
    if P == 1:
        return [1]
    if P == 2:
        return [1, 1]
    area = 4.0 * math.pi / P
    c_polar = 2.0 * math.asin(math.sqrt(1.0 / P))
    n_collars = max(1, int(math.floor((math.pi - 2.0 * c_polar) / math.sqrt(area) + 0.5)))
    fit = (math.pi - 2.0 * c_polar) / n_collars

    def cap_area(s):
        return 4.0 * math.pi * math.sin(0.5 * s) ** 2

    bands = [1]
    discrepancy = 0.0
    for k in range(n_collars):
        top = c_polar + k * fit
        ideal = (cap_area(top + fit) - cap_area(top)) / area
        n = int(math.floor(ideal + discrepancy + 0.5))
        discrepancy += ideal - n
        bands.append(n)
    bands.append(1)
    return bands


def _sorted_points(grid):
    """Point indices sorted by (y descending, x ascending) and the xy array."""
    xy = grid.xy_array()
    return np.lexsort((xy[:, 0], -xy[:, 1])), xy


def equal_regions_partition(grid, P) -> Distribution:
    """Bands from north to south, each split by x into regions of equal size.

    Region sizes differ by at most one; with P >= 3 the first and last
    partitions are polar caps.
    """
    P = _check_p(P)
    G = grid.size
    if P > G:
        raise InvalidArgument(f"cannot split {G} points into {P} partitions")
    order, xy = _sorted_points(grid)
    counts = _split(G, P)
    bounds = np.concatenate([[0], np.cumsum(counts)])
    part = np.empty(G, dtype=np.int64)
    r0 = 0
    for nreg in eq_bands(P):
        lo, hi = bounds[r0], bounds[r0 + nreg]
        band = order[lo:hi]
        band = band[np.lexsort((-xy[band, 1], xy[band, 0]))]
        sizes = counts[r0 : r0 + nreg]
        part[band] = np.repeat(np.arange(r0, r0 + nreg), sizes)
        r0 += nreg
    return Distribution(part, P)


def checkerboard_bands(P, nx, ny):
    """Number of bands: the feasible divisor of P closest to sqrt(P*ny/nx)."""
    target = math.sqrt(P * ny / nx)
    cands = [d for d in range(1, P + 1) if P % d == 0 and d <= ny and P // d <= nx]
    if not cands:
        raise InvalidArgument(f"cannot split a {nx}x{ny} grid into {P} rectangles")
    return min(cands, key=lambda d: (abs(d - target), d))


def checkerboard_partition(grid, P) -> Distribution:
    """Rectangular blocks in (i, j) index space for regular grids."""
    P = _check_p(P)
    if not grid.structured or not grid.classification.regular:
        raise UnsupportedGrid("checkerboard partitioning needs a regular grid")
    ny = grid.ny
    nx = int(grid.nx[0])
    nb = checkerboard_bands(P, nx, ny)
    ncols = P // nb
    band_of_row = np.repeat(np.arange(nb), _split(ny, nb))
    col_of_i = np.repeat(np.arange(ncols), _split(nx, ncols))
    part = (band_of_row[:, None] * ncols + col_of_i[None, :]).ravel()
    return Distribution(part, P)


PARTITIONERS = {
    "equal_regions": equal_regions_partition,
    "checkerboard": checkerboard_partition,
}


def partition_grid(grid, P, partitioner="equal_regions") -> Distribution:
    try:
        fn = PARTITIONERS[partitioner]
    except KeyError:
        raise InvalidArgument(f"unknown partitioner {partitioner!r}; choose from {sorted(PARTITIONERS)}") from None
    return fn(grid, P)


# --- matching mesh -------------------------------------------------------

_TOL = 1e-10


def _element_polygons(lonlat, conn, nbn):
    """Planar (lon, lat) polygons of elements, unwrapped around vertex 0.

    A pole vertex is replaced by two points at the longitudes of its two
    neighbours, so polar triangles become quadrilaterals in the plane.
    """
    polys = []
    for row, k in zip(conn, nbn):
        pts = lonlat[row[:k]].copy()
        pts[:, 0] = pts[0, 0] + (pts[:, 0] - pts[0, 0] + 180.0) % 360.0 - 180.0
        out = []
        for v in range(k):
            lon, lat = pts[v]
            if abs(lat) >= 90.0:
                prev_lon = pts[v - 1, 0]
                next_lon = pts[(v + 1) % k, 0]
                out.append((prev_lon, lat))
                out.append((next_lon, lat))
            else:
                out.append((lon, lat))
        polys.append(np.array(out))
    return polys


def _inside(poly, lon, lat):
    """Closed containment of points in a counter-clockwise convex polygon."""
    inside = np.ones(len(lon), dtype=bool)
    m = len(poly)
    for v in range(m):
        x0, y0 = poly[v]
        x1, y1 = poly[(v + 1) % m]
        ex, ey = x1 - x0, y1 - y0
        length = math.hypot(ex, ey)
        if length == 0.0:
            continue
        cross = (ex * (lat - y0) - ey * (lon - x0)) / length
        inside &= cross >= -_TOL
    return inside


def _mesh_candidates(mesh, lonlat_t):
    """Per target point: (node partition or -1, best element gidx, its partition)."""
    nodes, cells = mesh.nodes, mesh.cells
    G = len(lonlat_t)
    node_hit = np.full(G, -1, dtype=np.int64)
    owned = ~np.asarray(nodes.ghost)
    own_ll = nodes.lonlat[owned]
    own_part = nodes.partition[owned]
    if len(own_ll):
        keys = {(round(lo % 360.0, 9), round(la, 9)): p for (lo, la), p in zip(own_ll, own_part)}
        for n, (lo, la) in enumerate(lonlat_t):
            p = keys.get((round(lo % 360.0, 9), round(la, 9)))
            if p is not None:
                node_hit[n] = p
    best = np.full(G, np.iinfo(np.int64).max, dtype=np.int64)
    best_part = np.full(G, -1, dtype=np.int64)
    sel = np.flatnonzero(cells.partition == mesh.my_part)
    conn = cells.node_connectivity.padded(4)[sel]
    nbn = cells.nb_nodes()[sel]
    polys = _element_polygons(nodes.lonlat, conn, nbn)
    tlon, tlat = lonlat_t[:, 0], lonlat_t[:, 1]
    for c, poly in zip(sel, polys):
        ymin, ymax = poly[:, 1].min() - _TOL, poly[:, 1].max() + _TOL
        cand = np.flatnonzero((tlat >= ymin) & (tlat <= ymax))
        if len(cand) == 0:
            continue
        x0 = poly[:, 0].min()
        # bring candidate longitudes into the element's window
        lon = x0 + (tlon[cand] - x0 + _TOL) % 360.0 - _TOL
        hit = cand[_inside(poly, lon, tlat[cand])]
        g = cells.global_index[c]
        better = hit[g < best[hit]]
        best[better] = g
        best_part[better] = cells.partition[c]
    return node_hit, best, best_part


def _great_circle_nearest(src_ll, src_part, tgt_ll):
    """Index into src of the nearest point for each target; ties go to the lower partition."""
    def xyz(ll):
        lon, lat = np.radians(ll[:, 0]), np.radians(ll[:, 1])
        return np.column_stack([np.cos(lat) * np.cos(lon), np.cos(lat) * np.sin(lon), np.sin(lat)])

    s, t = xyz(src_ll), xyz(tgt_ll)
    out = np.empty(len(t), dtype=np.int64)
    for k0 in range(0, len(t), 1024):
        dots = t[k0 : k0 + 1024] @ s.T
        mx = dots.max(axis=1, keepdims=True)
        tie = dots >= mx - 1e-15
        cand_part = np.where(tie, src_part[None, :], np.iinfo(np.int64).max)
        out[k0 : k0 + 1024] = np.argmin(cand_part, axis=1)
    return out


def matching_mesh_partition(grid, meshes, comm=None) -> Distribution:
    """Follow the decomposition of an existing distributed mesh.

    Parameters
    ----------
    grid : Grid
        Target grid.
    meshes : Mesh or sequence of Mesh
        Mesh partition(s), one per rank.
    comm : SimComm, optional
        When given, each rank evaluates its own mesh in a simulated task.

    Each target point takes, in order of preference, the partition of an
    owned mesh node at the same location, the owner of the containing
    element with the lowest global index, or the partition of the nearest
    owned mesh node by great-circle distance.
    """
    from .mesh import Mesh

    if isinstance(meshes, Mesh):
        meshes = [meshes]
    meshes = list(meshes)
    nb_parts = meshes[0].nb_parts
    ll = grid.lonlat_array()
    G = len(ll)
    if nb_parts == 1:
        return Distribution(np.zeros(G, dtype=np.int64), 1)

    if comm is not None:
        by_rank = {m.my_part: m for m in meshes}

        def task(ctx):
            mesh = by_rank.get(ctx.rank)
            result = _mesh_candidates(mesh, ll) if mesh is not None else None
            return ctx.gather(result, root=0)

        results = [r for r in comm.run(task)[0] if r is not None]
    else:
        results = [_mesh_candidates(m, ll) for m in meshes]

    part = np.full(G, -1, dtype=np.int64)
    best = np.full(G, np.iinfo(np.int64).max, dtype=np.int64)
    for node_hit, g, gp in results:
        found = node_hit >= 0
        part[found] = node_hit[found]
        better = (gp >= 0) & (g < best)
        best[better] = g[better]
    elem_part = np.full(G, -1, dtype=np.int64)
    for node_hit, g, gp in results:
        sel = (gp >= 0) & (g == best)
        elem_part[sel] = gp[sel]
    fill = (part < 0) & (elem_part >= 0)
    part[fill] = elem_part[fill]
    missing = np.flatnonzero(part < 0)
    if len(missing):
        src_ll = np.vstack([m.nodes.lonlat[~m.nodes.ghost] for m in meshes])
        src_part = np.concatenate([m.nodes.partition[~m.nodes.ghost] for m in meshes])
        idx = _great_circle_nearest(src_ll, src_part, ll[missing])
        part[missing] = src_part[idx]
    return Distribution(part, nb_parts)
