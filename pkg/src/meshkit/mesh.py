"""Mesh containers: nodes, cells, edges and connectivity tables."""

import json
from typing import NamedTuple

import numpy as np

from .errors import InvalidArgument

MISSING = -1
IDX = np.int64


class ElementType(NamedTuple):
    name: str
    nb_nodes: int
    nb_edges: int
    gmsh_type: int


TRIANGLE = ElementType("triangle", 3, 3, 2)
QUADRILATERAL = ElementType("quadrilateral", 4, 4, 3)
ELEMENT_TYPES = {t.name: t for t in (TRIANGLE, QUADRILATERAL)}
_BY_NB_NODES = {3: TRIANGLE, 4: QUADRILATERAL}


def element_type(name_or_nodes):
    if isinstance(name_or_nodes, ElementType):
        return name_or_nodes
    table = ELEMENT_TYPES if isinstance(name_or_nodes, str) else _BY_NB_NODES
    try:
        return table[name_or_nodes]
    except KeyError:
        raise InvalidArgument(f"unsupported element type {name_or_nodes!r}") from None


class BlockConnectivity:
    """Fixed-width ``rows x cols`` index table.  ``-1`` marks a missing entry."""

    def __init__(self, rows, cols, values=None):
        rows, cols = int(rows), int(cols)
        if rows < 0 or cols < 0:
            raise InvalidArgument("rows and cols must be >= 0")
        if values is None:
            values = np.full(rows * cols, MISSING, dtype=IDX)
        values = np.asarray(values, dtype=IDX)
        if values.size != rows * cols:
            raise InvalidArgument(f"expected {rows * cols} values for a {rows}x{cols} table, got {values.size}")
        self._table = values.reshape(rows, cols)

    @property
    def rows(self):
        return self._table.shape[0]

    @property
    def cols(self):
        return self._table.shape[1]

    @property
    def table(self) -> np.ndarray:
        """The underlying ``(rows, cols)`` array (shares memory)."""
        return self._table

    def row(self, r):
        return self._table[r]

    def missing(self, r, c):
        return self._table[r, c] == MISSING

    def __getitem__(self, rc):
        return self._table[rc]

    def __setitem__(self, rc, value):
        self._table[rc] = value

    def __len__(self):
        return self.rows

    def __repr__(self):
        return f"BlockConnectivity({self.rows}x{self.cols})"


def create_block_connectivity(rows, cols, values):
    return BlockConnectivity(rows, cols, values)


class IrregularConnectivity:
    """Rows of varying length stored as offsets plus one flat value array."""

    def __init__(self, offsets=None, values=None):
        self.offsets = np.zeros(1, dtype=IDX) if offsets is None else np.asarray(offsets, dtype=IDX)
        self.values = np.zeros(0, dtype=IDX) if values is None else np.asarray(values, dtype=IDX)
        if self.offsets[0] != 0 or np.any(np.diff(self.offsets) < 0) or self.offsets[-1] != len(self.values):
            raise InvalidArgument("offsets must start at 0, be nondecreasing and end at len(values)")

    @classmethod
    def from_rows(cls, rows):
        rows = [np.asarray(r, dtype=IDX) for r in rows]
        offsets = np.concatenate([[0], np.cumsum([len(r) for r in rows], dtype=IDX)])
        values = np.concatenate(rows) if rows else np.zeros(0, dtype=IDX)
        return cls(offsets, values)

    @property
    def rows(self):
        return len(self.offsets) - 1

    def cols(self, r):
        return int(self.offsets[r + 1] - self.offsets[r])

    def row(self, r):
        return self.values[self.offsets[r] : self.offsets[r + 1]]

    def add_rows(self, rows):
        other = IrregularConnectivity.from_rows(rows)
        self.values = np.concatenate([self.values, other.values])
        self.offsets = np.concatenate([self.offsets, self.offsets[-1] + other.offsets[1:]])

    def __getitem__(self, rc):
        r, c = rc
        if not 0 <= c < self.cols(r):
            raise IndexError(f"column {c} out of range for row {r}")
        return self.values[self.offsets[r] + c]

    def __setitem__(self, rc, value):
        r, c = rc
        if not 0 <= c < self.cols(r):
            raise IndexError(f"column {c} out of range for row {r}")
        self.values[self.offsets[r] + c] = value

    def __len__(self):
        return self.rows


class MultiBlockConnectivity:
    """Ordered blocks of fixed-width tables sharing one flat buffer.

    Every block's ``table`` is a view into the buffer, so writes through a
    block and through the unified row accessors see the same memory.
    """

    def __init__(self):
        self._buffer = np.zeros(0, dtype=IDX)
        self.blocks: list[BlockConnectivity] = []
        self._row_start = [0]
        self._val_start = [0]

    def add_block(self, block: BlockConnectivity):
        """Append a copy of ``block``; returns the stored block (a view)."""
        self._buffer = np.concatenate([self._buffer, block.table.ravel()])
        stored = BlockConnectivity(block.rows, block.cols, np.zeros(block.rows * block.cols, dtype=IDX))
        self.blocks.append(stored)
        self._row_start.append(self._row_start[-1] + block.rows)
        self._val_start.append(self._val_start[-1] + block.rows * block.cols)
        self._rebind()
        return stored

    def _rebind(self):
        for b, blk in enumerate(self.blocks):
            lo, hi = self._val_start[b], self._val_start[b + 1]
            blk._table = self._buffer[lo:hi].reshape(blk.rows, blk.cols)

    @property
    def nb_blocks(self):
        return len(self.blocks)

    @property
    def rows(self):
        return self._row_start[-1]

    def block(self, b) -> BlockConnectivity:
        return self.blocks[b]

    def block_range(self, b):
        return self._row_start[b], self._row_start[b + 1]

    def locate(self, r):
        """Unified row -> (block, local row)."""
        if not 0 <= r < self.rows:
            raise IndexError(f"row {r} out of range [0, {self.rows})")
        b = int(np.searchsorted(self._row_start, r, side="right")) - 1
        return b, r - self._row_start[b]

    def row(self, r):
        b, lr = self.locate(r)
        return self.blocks[b].table[lr]

    def cols(self, r):
        return self.blocks[self.locate(r)[0]].cols

    def __getitem__(self, rc):
        r, c = rc
        return self.row(r)[c]

    def __setitem__(self, rc, value):
        r, c = rc
        self.row(r)[c] = value

    def __len__(self):
        return self.rows

    def padded(self, width=None):
        """All rows as one ``(rows, width)`` array padded with ``-1``."""
        width = max((b.cols for b in self.blocks), default=0) if width is None else width
        out = np.full((self.rows, width), MISSING, dtype=IDX)
        for b, blk in enumerate(self.blocks):
            lo, hi = self.block_range(b)
            out[lo:hi, : blk.cols] = blk.table
        return out


def multiblock_add_block(mbc: MultiBlockConnectivity, block: BlockConnectivity):
    mbc.add_block(block)
    return mbc


class _Entities:
    """Named per-entity arrays that all share the entity count."""

    _standard: tuple = ()

    def __init__(self, size=0):
        self._size = int(size)
        self.fields: dict[str, np.ndarray] = {}

    @property
    def size(self):
        return self._size

    def add_field(self, name, values):
        values = np.asarray(values)
        if len(values) != self._size:
            raise InvalidArgument(f"field {name!r} has length {len(values)}, expected {self._size}")
        self.fields[name] = values
        return values

    def field(self, name):
        return self.fields[name]

    def __getattr__(self, name):
        fields = self.__dict__.get("fields", {})
        if name in fields:
            return fields[name]
        raise AttributeError(name)


class Nodes(_Entities):
    """Mesh nodes with ``xy``, ``lonlat``, ``global_index``, ``partition``,
    ``remote_index``, ``ghost`` and ``halo`` fields."""

    def __init__(self, xy, lonlat, global_index, partition, remote_index, ghost=None, halo=None):
        xy = np.asarray(xy, dtype=float).reshape(-1, 2)
        super().__init__(len(xy))
        self.add_field("xy", xy)
        self.add_field("lonlat", np.asarray(lonlat, dtype=float).reshape(-1, 2))
        self.add_field("global_index", np.asarray(global_index, dtype=IDX))
        self.add_field("partition", np.asarray(partition, dtype=IDX))
        self.add_field("remote_index", np.asarray(remote_index, dtype=IDX))
        if ghost is None:
            ghost = np.zeros(self.size, dtype=bool)
        self.add_field("ghost", np.asarray(ghost, dtype=bool))
        self.add_field("halo", np.zeros(self.size, dtype=IDX) if halo is None else np.asarray(halo, dtype=IDX))

    @property
    def nb_owned(self):
        return int(np.count_nonzero(~self.ghost))


class Cells(_Entities):
    """Cells grouped into blocks of one element type each."""

    def __init__(self, node_connectivity: MultiBlockConnectivity, element_types, global_index, partition, remote_index, halo=None):
        super().__init__(node_connectivity.rows)
        self.node_connectivity = node_connectivity
        self.element_types = [element_type(t) for t in element_types]
        if len(self.element_types) != node_connectivity.nb_blocks:
            raise InvalidArgument("one element type per block is required")
        for t, blk in zip(self.element_types, node_connectivity.blocks):
            if blk.cols != t.nb_nodes:
                raise InvalidArgument(f"{t.name} block has {blk.cols} columns")
        self.add_field("global_index", np.asarray(global_index, dtype=IDX))
        self.add_field("partition", np.asarray(partition, dtype=IDX))
        self.add_field("remote_index", np.asarray(remote_index, dtype=IDX))
        self.add_field("halo", np.zeros(self.size, dtype=IDX) if halo is None else np.asarray(halo, dtype=IDX))

    @classmethod
    def from_rows(cls, rows, global_index=None, partition=None, remote_index=None):
        """Group rows by node count (triangles then quadrilaterals) keeping order inside a group."""
        rows = [list(r) for r in rows]
        n = len(rows)
        gidx = np.arange(1, n + 1) if global_index is None else np.asarray(global_index)
        part = np.zeros(n, dtype=IDX) if partition is None else np.asarray(partition)
        ridx = np.arange(n) if remote_index is None else np.asarray(remote_index)
        mbc = MultiBlockConnectivity()
        types, order = [], []
        for t in (TRIANGLE, QUADRILATERAL):
            sel = [k for k, r in enumerate(rows) if len(r) == t.nb_nodes]
            if sel:
                mbc.add_block(BlockConnectivity(len(sel), t.nb_nodes, np.array([rows[k] for k in sel]).ravel()))
                types.append(t)
                order.extend(sel)
        if len(order) != n:
            raise InvalidArgument("cells must have 3 or 4 nodes")
        order = np.array(order, dtype=IDX)
        return cls(mbc, types, gidx[order], part[order], ridx[order]) if n else cls(mbc, types, [], [], [])

    def element_type_of(self, r) -> ElementType:
        return self.element_types[self.node_connectivity.locate(r)[0]]

    def nb_nodes(self):
        """Node count of every cell."""
        out = np.empty(self.size, dtype=IDX)
        for b, t in enumerate(self.element_types):
            lo, hi = self.node_connectivity.block_range(b)
            out[lo:hi] = t.nb_nodes
        return out


class Edges(_Entities):
    """Edges: node pairs, adjacent cells (``-1`` on a boundary) and identity fields."""

    def __init__(self, node_connectivity=None, cell_connectivity=None, global_index=(), partition=(), remote_index=(), ghost=None):
        node_connectivity = node_connectivity or BlockConnectivity(0, 2)
        super().__init__(node_connectivity.rows)
        self.node_connectivity = node_connectivity
        self.cell_connectivity = cell_connectivity or BlockConnectivity(self.size, 2)
        self.add_field("global_index", np.asarray(global_index, dtype=IDX))
        self.add_field("partition", np.asarray(partition, dtype=IDX))
        self.add_field("remote_index", np.asarray(remote_index, dtype=IDX))
        if ghost is None:
            ghost = np.zeros(self.size, dtype=bool)
        self.add_field("ghost", np.asarray(ghost, dtype=bool))


class Mesh:
    """One mesh partition: its owned elements plus halo elements.

    ``metadata`` carries ``halo``, ``my_part``, ``nb_parts`` and
    ``pole_elements``.
    """

    def __init__(self, nodes: Nodes, cells: Cells, edges: Edges | None = None, **metadata):
        self.nodes = nodes
        self.cells = cells
        self.edges = edges if edges is not None else Edges()
        self.metadata = {"halo": 0, "my_part": 0, "nb_parts": 1, "pole_elements": False}
        self.metadata.update(metadata)
        self.topology = None  # set by the structured generator

    halo = property(lambda self: self.metadata["halo"])
    my_part = property(lambda self: self.metadata["my_part"])
    nb_parts = property(lambda self: self.metadata["nb_parts"])

    def __repr__(self):
        return (
            f"Mesh(part={self.my_part}/{self.nb_parts}, halo={self.halo}, nodes={self.nodes.size}, "
            f"cells={self.cells.size}, edges={self.edges.size})"
        )

    # -- serialization
    def to_dict(self):
        n, c, e = self.nodes, self.cells, self.edges
        return {
            "metadata": dict(self.metadata),
            "nodes": {k: v.tolist() for k, v in n.fields.items()},
            "cells": {
                "blocks": [
                    {"type": t.name, "nodes": blk.table.tolist()}
                    for t, blk in zip(c.element_types, c.node_connectivity.blocks)
                ],
                **{k: v.tolist() for k, v in c.fields.items()},
            },
            "edges": {
                "nodes": e.node_connectivity.table.tolist(),
                "cells": e.cell_connectivity.table.tolist(),
                **{k: v.tolist() for k, v in e.fields.items()},
            },
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, d):
        nd = d["nodes"]
        nodes = Nodes(nd["xy"], nd["lonlat"], nd["global_index"], nd["partition"], nd["remote_index"], nd["ghost"], nd.get("halo"))
        for k, v in nd.items():
            if k not in nodes.fields:
                nodes.add_field(k, np.asarray(v))
        cd = d["cells"]
        mbc = MultiBlockConnectivity()
        types = []
        for blk in cd["blocks"]:
            t = element_type(blk["type"])
            vals = np.asarray(blk["nodes"], dtype=IDX).reshape(-1, t.nb_nodes)
            mbc.add_block(BlockConnectivity(len(vals), t.nb_nodes, vals.ravel()))
            types.append(t)
        cells = Cells(mbc, types, cd["global_index"], cd["partition"], cd["remote_index"], cd.get("halo"))
        for k, v in cd.items():
            if k != "blocks" and k not in cells.fields:
                cells.add_field(k, np.asarray(v))
        ed = d["edges"]
        ne = len(ed["global_index"])
        edges = Edges(
            BlockConnectivity(ne, 2, np.asarray(ed["nodes"], dtype=IDX).ravel()),
            BlockConnectivity(ne, 2, np.asarray(ed["cells"], dtype=IDX).ravel()),
            ed["global_index"],
            ed["partition"],
            ed["remote_index"],
            ed.get("ghost"),
        )
        for k, v in ed.items():
            if k not in ("nodes", "cells") and k not in edges.fields:
                edges.add_field(k, np.asarray(v))
        return cls(nodes, cells, edges, **d["metadata"])

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def write_json(mesh: Mesh, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(mesh.to_json())
        fh.write("\n")


def read_json(path) -> Mesh:
    with open(path, encoding="utf-8") as fh:
        return Mesh.from_json(fh.read())


def gmsh_string(mesh: Mesh) -> str:
    """Gmsh MSH 2.2 ASCII text; node coordinates are (lon, lat, 0)."""
    nodes, cells = mesh.nodes, mesh.cells
    order = np.argsort(nodes.global_index, kind="stable")
    lines = ["$MeshFormat", "2.2 0 8", "$EndMeshFormat", "$Nodes", str(nodes.size)]
    gidx = nodes.global_index
    for k in order:
        lon, lat = nodes.lonlat[k]
        lines.append(f"{gidx[k]} {lon:.12g} {lat:.12g} 0")
    lines += ["$EndNodes", "$Elements", str(cells.size)]
    corder = np.argsort(cells.global_index, kind="stable")
    for r in corder:
        t = cells.element_type_of(int(r))
        conn = " ".join(str(gidx[v]) for v in cells.node_connectivity.row(int(r)))
        lines.append(f"{cells.global_index[r]} {t.gmsh_type} 2 1 {cells.partition[r] + 1} {conn}")
    lines += ["$EndElements", ""]
    return "\n".join(lines)


def write_gmsh(mesh: Mesh, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(gmsh_string(mesh))
