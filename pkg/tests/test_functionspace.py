import numpy as np
import pytest

from conftest import run_ranks
from meshkit.errors import InvalidArgument
from meshkit.field import Array, Field, field_create
from meshkit.functionspace import EdgeColumns, NodeColumns, StructuredColumns, nodecolumns_create
from meshkit.grid import make_grid
from meshkit.meshgen import generate_all, generate_structured_mesh
from meshkit.partition import checkerboard_partition, equal_regions_partition


def distributed(grid, P, halo=1, edges=False):
    d = equal_regions_partition(grid, P)
    return d, generate_all(grid, d, halo=halo, edges=edges)


def test_nb_owned_sums(o16):
    _, meshes = distributed(o16, 4)

    def task(ctx):
        fs = NodeColumns(meshes[ctx.rank], ctx=ctx)
        return fs.nb_owned, fs.global_size

    res = run_ranks(4, task)
    assert sum(r[0] for r in res) == 1600
    assert all(r[1] == 1600 for r in res)


def test_serial_halo0(o16):
    fs = nodecolumns_create(generate_structured_mesh(o16))
    assert fs.nb_nodes == fs.nb_owned == 1600
    assert fs.halo_plan.empty


def test_plans_deterministic(o16):
    _, meshes = distributed(o16, 4)

    def task(ctx):
        a = NodeColumns(meshes[ctx.rank], ctx=ctx)
        b = NodeColumns(meshes[ctx.rank], ctx=ctx)
        return a.halo_plan == b.halo_plan and a.gather_plan == b.gather_plan

    assert all(run_ranks(4, task))


def test_insufficient_halo(o16):
    m = generate_structured_mesh(o16, halo=1)
    with pytest.raises(InvalidArgument):
        NodeColumns(m, halo=2)
    assert NodeColumns(m, halo=0).size == 1600


def test_distributed_needs_context(o16):
    _, meshes = distributed(o16, 2)
    with pytest.raises(InvalidArgument):
        NodeColumns(meshes[0])


def test_field_shapes(o16):
    fs = NodeColumns(generate_structured_mesh(o16))
    assert fs.create_field("a", levels=100).shape == (1600, 100)
    f = fs.create_field("b", levels=100, variables=2)
    assert f.rank == 3 and f.shape == (1600, 100, 2)
    assert fs.create_field("c").rank == 1
    # levels vary fastest in memory
    assert f.array.offset(0, 1, 0) - f.array.offset(0, 0, 0) == 2
    with pytest.raises(InvalidArgument):
        fs.create_field("d", levels=-1)


@pytest.mark.parametrize("P", [2, 4, 8])
@pytest.mark.parametrize("levels", [0, 3])
def test_halo_exchange_identity(o16, P, levels):
    _, meshes = distributed(o16, P, halo=2)

    def task(ctx):
        fs = NodeColumns(meshes[ctx.rank], ctx=ctx)
        f = fs.create_field("gidx", "int64", levels=levels)
        data = f.host(writable=True)
        g = fs.global_index[:, None] if levels else fs.global_index
        data[...] = np.where((~fs.ghost)[:, None] if levels else ~fs.ghost, g, -1)
        fs.halo_exchange(f)
        first = f.host().copy()
        fs.halo_exchange(f)
        return first, f.host().copy(), np.broadcast_to(g, first.shape).copy()

    for first, second, expected in run_ranks(P, task):
        np.testing.assert_array_equal(first, expected)
        np.testing.assert_array_equal(second, first)


def test_foreign_field_rejected(o16):
    fs = NodeColumns(generate_structured_mesh(o16))
    with pytest.raises(InvalidArgument):
        fs.halo_exchange(field_create("x", shape=(1600,)))


@pytest.mark.parametrize("P", [1, 3, 8])
def test_gather_scatter(o16, P):
    _, meshes = distributed(o16, P)

    def task(ctx):
        fs = NodeColumns(meshes[ctx.rank], ctx=ctx)
        f = fs.create_field("g", "int64", levels=2)
        f.host(writable=True)[...] = fs.global_index[:, None] * [1, -1]
        full = fs.gather(f)
        c = fs.create_field("c")
        c.host(writable=True)[...] = 2.5
        const = fs.gather(c)
        back = fs.create_field("back", "int64", levels=2)
        back.host(writable=True)[...] = -7
        fs.scatter(full, back)
        owned = ~fs.ghost
        same = np.array_equal(back.host()[owned], f.host()[owned])
        untouched = np.all(back.host()[~owned] == -7)
        return full, const, same, untouched

    res = run_ranks(P, task)
    full, const = res[0][0], res[0][1]
    G = o16.size
    np.testing.assert_array_equal(full[:, 0], np.arange(1, G + 1))
    np.testing.assert_array_equal(full[:, 1], -np.arange(1, G + 1))
    assert np.all(const == 2.5)
    assert all(r[2] and r[3] for r in res)
    assert all(r[0] is None for r in res[1:])


@pytest.mark.parametrize("P", [1, 2, 8])
def test_statistics_partition_invariant(o16, P):
    _, meshes = distributed(o16, P)

    def task(ctx):
        fs = NodeColumns(meshes[ctx.rank], ctx=ctx)
        f = fs.create_field("g", "int64")
        f.host(writable=True)[...] = fs.global_index
        c = fs.create_field("c", levels=2)
        c.host(writable=True)[...] = 0.1
        return fs.statistics(f), fs.statistics(c)

    G = o16.size
    for s, c in run_ranks(P, task):
        assert s["sum"] == G * (G + 1) // 2
        assert (s["min"], s["max"]) == (1, G)
        assert np.all(c["min"] == 0.1) and np.all(c["max"] == 0.1) and np.all(c["mean"] == 0.1)


def test_float_statistics_bitwise_invariant(o16):
    values = np.random.default_rng(3).normal(size=o16.size) * 1e3

    def stats(P):
        _, meshes = distributed(o16, P)

        def task(ctx):
            fs = NodeColumns(meshes[ctx.rank], ctx=ctx)
            f = fs.create_field("r")
            f.host(writable=True)[...] = values[fs.global_index - 1]
            return fs.statistics(f)

        return run_ranks(P, task)[0]

    assert stats(1) == stats(5) == stats(8)


def test_statistics_empty():
    fs = NodeColumns(generate_structured_mesh(make_grid("F1")))
    empty = Field("e", Array((0,)), functionspace=fs)
    with pytest.raises(InvalidArgument):
        fs.statistics(empty)


def test_edge_columns(o16):
    d, meshes = distributed(o16, 4, halo=1, edges=True)
    reference = generate_structured_mesh(o16, edges=True)

    def task(ctx):
        fs = EdgeColumns(meshes[ctx.rank], ctx=ctx)
        f = fs.create_field("e", "int64")
        f.host(writable=True)[...] = np.where(fs.ghost, -1, fs.global_index)
        fs.halo_exchange(f)
        ok = np.array_equal(f.host(), fs.global_index)
        return fs.gather(f), ok

    res = run_ranks(4, task)
    assert all(r[1] for r in res)
    np.testing.assert_array_equal(res[0][0], np.arange(1, reference.edges.size + 1))
    with pytest.raises(InvalidArgument):
        EdgeColumns(generate_structured_mesh(o16))


def test_structured_columns():
    g = make_grid("S16x8")
    d = checkerboard_partition(g, 4)

    def task(ctx):
        fs = StructuredColumns(g, d, ctx=ctx)
        f = fs.create_field("x")
        f.host(writable=True)[...] = fs.xy()[:, 0]
        return fs.gather(f), fs.size

    res = run_ranks(4, task)
    np.testing.assert_array_equal(res[0][0], g.xy_array()[:, 0])
    assert [r[1] for r in res] == d.counts.tolist()
