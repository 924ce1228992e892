"""Distributed mesh generation for structured grids.

A global element list is built once per (grid, distribution, pole flag).
Each partition then selects its owned elements, grows halo layers by
node-sharing elements and renumbers locally.

Local orderings
---------------
nodes
    owned nodes by global index, then ghosts by (halo level, global index)
cells
    blocks of owned quadrilaterals, owned triangles, halo quadrilaterals,
    halo triangles; owned by global index, halo by (level, global index)
edges
    owned edges by global index, then the rest by global index

``remote_index`` of any entity is its position on the owning partition,
which only depends on ownership, so it is the same for every halo depth.
"""

from collections import OrderedDict

import numpy as np

from . import kernels
from .errors import InvalidArgument, UnsupportedGrid
from .grid import Grid
from .mesh import (
    IDX,
    MISSING,
    QUADRILATERAL,
    TRIANGLE,
    BlockConnectivity,
    Cells,
    Edges,
    Mesh,
    MultiBlockConnectivity,
    Nodes,
)
from .partition import Distribution


def _position_in_part(part, nb_parts):
    """Rank of each entity among the entities of its own partition (index order)."""
    order = np.argsort(part, kind="stable")
    counts = np.bincount(part, minlength=nb_parts)
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    pos = np.empty(len(part), dtype=IDX)
    pos[order] = np.arange(len(part)) - np.repeat(starts, counts)
    return pos


def edges_from_cells(conn, nb_nodes):
    """Unique undirected edges of a padded cell table, in first-appearance order.

    Returns
    -------
    pairs : (E, 2) int array of node indices (unordered)
    cells : (E, 2) int array of adjacent cells, ascending, ``-1`` when absent
    """
    ncell, width = conn.shape
    if ncell == 0:
        return np.zeros((0, 2), dtype=IDX), np.zeros((0, 2), dtype=IDX)
    k = np.arange(width)
    nxt = (k[None, :] + 1) % nb_nodes[:, None]
    a = conn
    b = np.take_along_axis(conn, nxt, axis=1)
    valid = k[None, :] < nb_nodes[:, None]
    a, b = a[valid], b[valid]
    owner = np.repeat(np.arange(ncell), nb_nodes)
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    key = lo * (int(conn.max()) + 1) + hi
    _, first, inverse = np.unique(key, return_index=True, return_inverse=True)
    # renumber unique keys by first appearance
    rank = np.empty(len(first), dtype=IDX)
    rank[np.argsort(first, kind="stable")] = np.arange(len(first))
    eid = rank[inverse]
    ne = len(first)
    pairs = np.empty((ne, 2), dtype=IDX)
    pairs[eid, 0] = a
    pairs[eid, 1] = b
    cells = np.full((ne, 2), MISSING, dtype=IDX)
    c0 = np.full(ne, np.iinfo(IDX).max, dtype=IDX)
    np.minimum.at(c0, eid, owner)
    c1 = np.full(ne, MISSING, dtype=IDX)
    np.maximum.at(c1, eid, owner)
    counts = np.bincount(eid, minlength=ne)
    if np.any(counts > 2):
        raise InvalidArgument("non-manifold mesh: an edge is shared by more than two cells")
    cells[:, 0] = c0
    cells[:, 1] = np.where(counts == 2, c1, MISSING)
    return pairs, cells


class StructuredTopology:
    """Global element list and ownership for a structured grid."""

    def __init__(self, grid: Grid, distribution: Distribution, pole_elements=False):
        if not grid.structured:
            raise UnsupportedGrid("the structured mesh generator needs a structured grid")
        if len(distribution.part) != grid.size:
            raise InvalidArgument("distribution does not match the grid size")
        self.grid = grid
        self.distribution = distribution
        self.nb_parts = distribution.nb_partitions
        self.pole_elements = bool(pole_elements)
        d = grid.data
        G = grid.size
        self.periodic = bool(
            grid.domain.is_periodic_x
            and grid.projection.units == "degrees"
            and np.all(np.abs(d.nx * d.dx - 360.0) < 1e-9)
        )
        if self.pole_elements:
            if not (self.periodic and grid.domain.is_global):
                raise InvalidArgument("pole elements need a global, periodic grid")
            if abs(d.y[0]) >= 90.0 or abs(d.y[-1]) >= 90.0:
                raise InvalidArgument("grid already has points on the poles")
        off = grid.offsets
        xy = grid.xy_array()
        part = np.asarray(distribution.part, dtype=IDX)
        if self.pole_elements:
            xy = np.vstack([xy, [[0.0, 90.0], [0.0, -90.0]]])
            part = np.concatenate([part, [part[0], part[off[-2]]]])
        self.xy = xy
        lon, lat = grid.projection.xy_to_lonlat(xy[:, 0], xy[:, 1])
        self.lonlat = np.column_stack([lon, lat])
        self.node_part = part
        self.nb_nodes_total = len(xy)

        if self.periodic:
            x0, width = 0.0, 360.0
        else:
            x0 = float(np.min(d.xmin))
            width = float(np.max(d.xmin + (d.nx - 1) * d.dx)) - x0 or 1.0
        rows = []
        if self.pole_elements:
            na = int(d.nx[0])
            a = np.arange(na)
            rows.append(np.column_stack([a, (a + 1) % na, np.full(na, G), np.full(na, MISSING)]))
        for j in range(grid.ny - 1):
            na, nb = int(d.nx[j]), int(d.nx[j + 1])
            xa = (d.xmin[j] + np.arange(na) * d.dx[j] - x0) / width
            xb = (d.xmin[j + 1] + np.arange(nb) * d.dx[j + 1] - x0) / width
            if self.periodic:
                xa = np.append(xa, xa[0] + 1.0)
                xb = np.append(xb, xb[0] + 1.0)
            t = np.asarray(kernels.tessellate_strip(xa, xb, self.periodic))
            kind, ia, ib = t[:, 0], t[:, 1], t[:, 2]
            a0 = off[j] + ia % na
            a1 = off[j] + (ia + 1) % na
            b0 = off[j + 1] + ib % nb
            b1 = off[j + 1] + (ib + 1) % nb
            quad = kind == kernels.QUAD
            upper = kind == kernels.TRI_UPPER
            el = np.empty((len(t), 4), dtype=IDX)
            el[:, 0] = b0
            el[:, 1] = np.where(upper, a1, b1)
            el[:, 2] = np.where(quad, a1, a0)
            el[:, 3] = np.where(quad, a0, MISSING)
            rows.append(el)
        if self.pole_elements:
            nb = int(d.nx[-1])
            b = off[-2] + np.arange(nb)
            b1 = off[-2] + (np.arange(nb) + 1) % nb
            rows.append(np.column_stack([np.full(nb, G + 1), b1, b, np.full(nb, MISSING)]))
        self.elem_nodes = np.vstack(rows) if rows else np.zeros((0, 4), dtype=IDX)
        self.elem_nb = np.where(self.elem_nodes[:, 3] == MISSING, 3, 4)
        # owner = partition of the lowest-global-index node
        masked = np.where(self.elem_nodes == MISSING, np.iinfo(IDX).max, self.elem_nodes)
        self.elem_part = part[masked.min(axis=1)]
        self.node_pos = _position_in_part(part, self.nb_parts)
        self.elem_pos = np.empty(len(self.elem_nodes), dtype=IDX)
        self.owned_quads = np.zeros(self.nb_parts, dtype=IDX)
        for nbn in (4, 3):
            sel = np.flatnonzero(self.elem_nb == nbn)
            self.elem_pos[sel] = _position_in_part(self.elem_part[sel], self.nb_parts)
            if nbn == 4:
                self.owned_quads = np.bincount(self.elem_part[sel], minlength=self.nb_parts)
        self.elem_pos = np.where(self.elem_nb == 3, self.elem_pos + self.owned_quads[self.elem_part], self.elem_pos)
        self._edges = None

    @property
    def nb_elements(self):
        return len(self.elem_nodes)

    @property
    def edges(self):
        """(pairs, cells, owner partition, position on owner) of all global edges."""
        if self._edges is None:
            pairs, cells = edges_from_cells(self.elem_nodes, self.elem_nb)
            pairs = np.sort(pairs, axis=1)  # node index + 1 is the global index
            epart = self.elem_part[cells[:, 0]]
            self._edges = (pairs, cells, epart, _position_in_part(epart, self.nb_parts))
        return self._edges

    def node_levels(self, part, depth):
        """Halo level of each global node and element for ``part`` (-1 = absent)."""
        nn = self.nb_nodes_total
        node_lvl = np.full(nn + 1, -1, dtype=IDX)  # extra slot absorbs MISSING
        elem_lvl = np.full(self.nb_elements, -1, dtype=IDX)
        owned_el = self.elem_part == part
        elem_lvl[owned_el] = 0
        node_lvl[:nn][self.node_part == part] = 0
        node_lvl[self.elem_nodes[owned_el].ravel()] = 0
        node_lvl[nn] = -1
        for k in range(1, depth + 1):
            present = node_lvl >= 0
            present[nn] = False
            touch = present[self.elem_nodes].any(axis=1) & (elem_lvl < 0)
            elem_lvl[touch] = k
            new = self.elem_nodes[touch].ravel()
            new = new[new != MISSING]
            new = new[node_lvl[new] < 0]
            node_lvl[new] = k
        return node_lvl[:nn], elem_lvl

    def mesh(self, part, depth=0) -> Mesh:
        if not 0 <= part < self.nb_parts:
            raise InvalidArgument(f"partition {part} out of range [0, {self.nb_parts})")
        if depth < 0:
            raise InvalidArgument("halo depth must be >= 0")
        node_lvl, elem_lvl = self.node_levels(part, depth)
        gnodes = np.flatnonzero(node_lvl >= 0)
        ghost = self.node_part[gnodes] != part
        order = np.lexsort((gnodes, node_lvl[gnodes], ghost))
        gnodes = gnodes[order]
        local = np.full(self.nb_nodes_total + 1, MISSING, dtype=IDX)
        local[gnodes] = np.arange(len(gnodes))
        nodes = Nodes(
            self.xy[gnodes],
            self.lonlat[gnodes],
            gnodes + 1,
            self.node_part[gnodes],
            self.node_pos[gnodes],
            ghost[order],
            node_lvl[gnodes],
        )

        mbc = MultiBlockConnectivity()
        types, sel_all = [], []
        for halo_block in (False, True):
            for etype in (QUADRILATERAL, TRIANGLE):
                lvl_ok = elem_lvl > 0 if halo_block else elem_lvl == 0
                sel = np.flatnonzero(lvl_ok & (self.elem_nb == etype.nb_nodes))
                if len(sel) == 0:
                    continue
                sel = sel[np.lexsort((sel, elem_lvl[sel]))]
                conn = local[self.elem_nodes[sel, : etype.nb_nodes]]
                mbc.add_block(BlockConnectivity(len(sel), etype.nb_nodes, conn.ravel()))
                types.append(etype)
                sel_all.append(sel)
        gel = np.concatenate(sel_all) if sel_all else np.zeros(0, dtype=IDX)
        cells = Cells(mbc, types, gel + 1, self.elem_part[gel], self.elem_pos[gel], elem_lvl[gel])
        cells.add_field("ghost", self.elem_part[gel] != part)
        mesh = Mesh(
            nodes,
            cells,
            halo=depth,
            my_part=part,
            nb_parts=self.nb_parts,
            pole_elements=self.pole_elements,
        )
        mesh.topology = self
        mesh._global_nodes = gnodes
        mesh._global_cells = gel
        return mesh


_TOPOLOGY_CACHE: "OrderedDict[tuple, StructuredTopology]" = OrderedDict()
_CACHE_SIZE = 8


def structured_topology(grid: Grid, distribution: Distribution | None = None, pole_elements=False):
    if distribution is None:
        distribution = Distribution.serial(grid.size)
    key = (grid.uid, distribution.nb_partitions, distribution.part.tobytes(), bool(pole_elements))
    topo = _TOPOLOGY_CACHE.get(key)
    if topo is None:
        topo = StructuredTopology(grid, distribution, pole_elements)
        _TOPOLOGY_CACHE[key] = topo
        if len(_TOPOLOGY_CACHE) > _CACHE_SIZE:
            _TOPOLOGY_CACHE.popitem(last=False)
    else:
        _TOPOLOGY_CACHE.move_to_end(key)
    return topo


def generate_structured_mesh(grid, distribution=None, my_part=0, nb_parts=None, *, halo=0, pole_elements=False, edges=False):
    """Generate the mesh partition ``my_part`` of a structured grid.

    Parameters
    ----------
    grid : Grid
    distribution : Distribution, optional
        Defaults to a single partition.
    my_part : int
    nb_parts : int, optional
        Must agree with the distribution when given.
    halo : int
        Number of halo layers to grow.
    pole_elements : bool
        Close the mesh with triangle fans around two synthetic pole nodes.
    edges : bool
        Also build the edges.
    """
    if not isinstance(grid, Grid) or not grid.structured:
        raise UnsupportedGrid("mesh generation requires a structured grid")
    if distribution is None:
        distribution = Distribution.serial(grid.size)
    if nb_parts is not None and nb_parts != distribution.nb_partitions:
        raise InvalidArgument(f"nb_parts={nb_parts} does not match the distribution ({distribution.nb_partitions})")
    topo = structured_topology(grid, distribution, pole_elements)
    mesh = topo.mesh(my_part, halo)
    if edges:
        build_edges(mesh)
    return mesh


def generate_all(grid, distribution=None, *, halo=0, pole_elements=False, edges=False):
    """Mesh partitions for every rank, in rank order."""
    if distribution is None:
        distribution = Distribution.serial(grid.size)
    return [
        generate_structured_mesh(grid, distribution, p, halo=halo, pole_elements=pole_elements, edges=edges)
        for p in range(distribution.nb_partitions)
    ]


def build_halo(mesh: Mesh, depth=1) -> Mesh:
    """Grow ``depth`` more halo layers; returns a new mesh (``mesh`` itself when depth is 0)."""
    if depth < 0:
        raise InvalidArgument("halo depth must be >= 0")
    if depth == 0:
        return mesh
    if mesh.topology is None:
        raise InvalidArgument("halo growth needs a mesh made by the structured generator")
    out = mesh.topology.mesh(mesh.my_part, mesh.halo + depth)
    if mesh.edges.size:
        build_edges(out)
    return out


def build_edges(mesh: Mesh) -> Mesh:
    """Build the unique edges of the mesh cells in place and return the mesh."""
    cells = mesh.cells
    conn = cells.node_connectivity.padded(4)
    nbn = cells.nb_nodes()
    my_part = mesh.my_part
    topo = mesh.topology
    if topo is not None:
        pairs_g, cells_g, epart_g, epos_g = topo.edges
        gcells = mesh._global_cells
        local_cell = np.full(topo.nb_elements, MISSING, dtype=IDX)
        local_cell[gcells] = np.arange(len(gcells))
        present = np.zeros(topo.nb_elements, dtype=bool)
        present[gcells] = True
        c0, c1 = cells_g[:, 0], cells_g[:, 1]
        has = present[c0] | ((c1 != MISSING) & present[np.where(c1 == MISSING, 0, c1)])
        eids = np.flatnonzero(has)
        owned = epart_g[eids] == my_part
        eids = eids[np.lexsort((eids, ~owned))]
        local_node = np.full(topo.nb_nodes_total, MISSING, dtype=IDX)
        local_node[mesh._global_nodes] = np.arange(mesh.nodes.size)
        nodes_l = local_node[pairs_g[eids]]
        lc = np.where(cells_g[eids] == MISSING, MISSING, local_cell[np.maximum(cells_g[eids], 0)])
        # keep the present adjacent cell first
        swap = lc[:, 0] == MISSING
        lc[swap] = lc[swap][:, ::-1]
        mesh.edges = Edges(
            BlockConnectivity(len(eids), 2, nodes_l.ravel()),
            BlockConnectivity(len(eids), 2, lc.ravel()),
            eids + 1,
            epart_g[eids],
            epos_g[eids],
            epart_g[eids] != my_part,
        )
        return mesh
    # bare mesh: local numbering is the global one
    gidx = mesh.nodes.global_index
    corder = np.argsort(cells.global_index, kind="stable")
    pairs, ecells = edges_from_cells(conn[corder], nbn[corder])
    ecells = np.where(ecells == MISSING, MISSING, corder[np.maximum(ecells, 0)])
    flip = gidx[pairs[:, 0]] > gidx[pairs[:, 1]]
    pairs[flip] = pairs[flip][:, ::-1]
    epart = cells.partition[ecells[:, 0]]
    owned = epart == my_part
    remote = np.full(len(pairs), MISSING, dtype=IDX)
    remote[owned] = np.arange(int(owned.sum()))
    mesh.edges = Edges(
        BlockConnectivity(len(pairs), 2, pairs.ravel()),
        BlockConnectivity(len(pairs), 2, ecells.ravel()),
        np.arange(1, len(pairs) + 1),
        epart,
        remote,
        ~owned,
    )
    return mesh
