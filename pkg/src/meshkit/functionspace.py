"""Function spaces: how a Field's rows map onto mesh nodes, edges or grid points."""

import math

import numpy as np

from .errors import InvalidArgument
from .field import Field, field_create
from .parallel import SerialContext, build_gather_plan, build_halo_plan, gather, halo_exchange, scatter


def _context(ctx, nb_parts):
    if ctx is None:
        if nb_parts != 1:
            raise InvalidArgument(f"a rank context is required for {nb_parts} partitions")
        return SerialContext()
    if ctx.size != nb_parts:
        raise InvalidArgument(f"context has {ctx.size} ranks but the data has {nb_parts} partitions")
    return ctx


class _Columns:
    """Shared machinery; subclasses set the identity arrays and call ``_build_plans``."""

    def _build_plans(self):
        self.halo_plan = build_halo_plan(self.partition, self.remote_index, self.global_index, self.ctx)
        self.gather_plan = build_gather_plan(self.global_index, self.ghost, self.ctx)

    @property
    def size(self):
        return len(self.global_index)

    @property
    def nb_owned(self):
        return int(np.count_nonzero(~self.ghost))

    @property
    def global_size(self):
        return self.gather_plan.global_size

    def create_field(self, name, kind="float64", levels=0, variables=0, metadata=None) -> Field:
        """Field of shape ``(size[, levels][, variables])``; 0 drops a dimension."""
        for what, v in (("levels", levels), ("variables", variables)):
            if isinstance(v, bool) or int(v) != v or v < 0:
                raise InvalidArgument(f"{what} must be a non-negative integer, got {v!r}")
        shape = (self.size,) + ((levels,) if levels else ()) + ((variables,) if variables else ())
        return field_create(name, kind, shape, metadata, functionspace=self, levels=levels, variables=variables)

    def _check(self, field):
        if not isinstance(field, Field) or field.functionspace is not self:
            raise InvalidArgument(f"field {getattr(field, 'name', field)!r} does not belong to this function space")

    def halo_exchange(self, field):
        self._check(field)
        halo_exchange(self.halo_plan, field.host(writable=True), self.ctx)
        return field

    def gather(self, field):
        """Owned rows of all ranks ordered by global index; ``None`` off the root."""
        self._check(field)
        return gather(self.gather_plan, field.host(), self.ctx)

    def scatter(self, global_data, field):
        self._check(field)
        scatter(self.gather_plan, global_data, self.ctx, out=field.host(writable=True))
        return field

    def statistics(self, field):
        """Global min, max, sum and mean per level over owned rows.

        Integer sums are exact; float sums are correctly rounded, so the
        result does not depend on the partitioning.
        """
        self._check(field)
        data = field.host()
        if data.size == 0 or self.global_size == 0:
            raise InvalidArgument("statistics of an empty field")
        owned = data[~self.ghost]
        levels = field.levels
        per_level = owned.reshape(len(owned), levels, -1) if levels else owned.reshape(len(owned), 1, -1)
        parts = self.ctx.allgather(per_level)
        allv = np.concatenate(parts, axis=0)  # rank-major, local index ascending
        n_per_level = allv.shape[0] * allv.shape[2]
        integer = np.issubdtype(allv.dtype, np.integer)
        mins, maxs, sums, means = [], [], [], []
        for k in range(allv.shape[1]):
            vals = allv[:, k, :].ravel()
            mins.append(vals.min())
            maxs.append(vals.max())
            if integer:
                s = sum(int(v) for v in vals)
                sums.append(s)
                means.append(s / n_per_level)
            else:
                s = math.fsum(vals.tolist())
                sums.append(s)
                means.append(s / n_per_level)
        if not levels:
            return {"min": mins[0], "max": maxs[0], "sum": sums[0], "mean": means[0]}
        return {"min": np.array(mins), "max": np.array(maxs), "sum": sums, "mean": np.array(means)}


class NodeColumns(_Columns):
    """Columns of values at mesh nodes, up to ``halo`` layers of ghosts.

    Parameters
    ----------
    mesh : Mesh
    halo : int, optional
        Defaults to the mesh halo; must not exceed it.
    ctx : RankContext, optional
        Required when the mesh has more than one partition.
    """

    def __init__(self, mesh, halo=None, ctx=None):
        halo = mesh.halo if halo is None else int(halo)
        if halo < 0 or halo > mesh.halo:
            raise InvalidArgument(f"halo {halo} requested but the mesh has halo {mesh.halo}")
        self.mesh = mesh
        self.halo = halo
        self.ctx = _context(ctx, mesh.nb_parts)
        nodes = mesh.nodes
        keep = ~nodes.ghost | (nodes.halo <= halo)
        n = int(np.count_nonzero(keep))
        if not np.all(keep[:n]):
            raise InvalidArgument("mesh nodes are not ordered by halo level")
        self.partition = nodes.partition[:n]
        self.remote_index = nodes.remote_index[:n]
        self.global_index = nodes.global_index[:n]
        self.ghost = nodes.ghost[:n]
        self._build_plans()

    @property
    def nb_nodes(self):
        return self.size


class EdgeColumns(_Columns):
    """Columns of values at mesh edges (all edges of the mesh partition)."""

    def __init__(self, mesh, halo=None, ctx=None):
        if halo is not None and int(halo) != mesh.halo:
            raise InvalidArgument("EdgeColumns uses the full halo of the mesh")
        if mesh.edges.size == 0 and mesh.cells.size:
            raise InvalidArgument("mesh has no edges; build them first")
        self.mesh = mesh
        self.halo = mesh.halo
        self.ctx = _context(ctx, mesh.nb_parts)
        e = mesh.edges
        self.partition = e.partition
        self.remote_index = e.remote_index
        self.global_index = e.global_index
        self.ghost = e.ghost
        self._build_plans()

    @property
    def nb_edges(self):
        return self.size


class StructuredColumns(_Columns):
    """Columns at the grid points owned by this rank (no halo).

    Rows are the owned point indices in ascending order.
    """

    def __init__(self, grid, distribution, ctx=None):
        if len(distribution.part) != grid.size:
            raise InvalidArgument("distribution does not match the grid")
        self.grid = grid
        self.distribution = distribution
        self.ctx = _context(ctx, distribution.nb_partitions)
        self.points = np.flatnonzero(distribution.part == self.ctx.rank)
        self.global_index = self.points + 1
        self.partition = np.full(len(self.points), self.ctx.rank, dtype=np.int64)
        self.remote_index = np.arange(len(self.points))
        self.ghost = np.zeros(len(self.points), dtype=bool)
        self._build_plans()

    def xy(self):
        return self.grid.xy_array()[self.points]


def nodecolumns_create(mesh, halo=None, ctx=None) -> NodeColumns:
    return NodeColumns(mesh, halo, ctx)
