import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from meshkit.errors import InvalidArgument
from meshkit.grid import make_grid
from meshkit.mesh import (
    MISSING,
    QUADRILATERAL,
    TRIANGLE,
    BlockConnectivity,
    Cells,
    IrregularConnectivity,
    Mesh,
    MultiBlockConnectivity,
    Nodes,
    create_block_connectivity,
    element_type,
    gmsh_string,
    multiblock_add_block,
    read_json,
    write_gmsh,
    write_json,
)
from meshkit.meshgen import build_edges, generate_structured_mesh


def test_block_row():
    b = create_block_connectivity(2, 3, [0, 1, 2, 3, 4, 5])
    assert b.row(1).tolist() == [3, 4, 5]
    assert (b.rows, b.cols) == (2, 3)


def test_block_empty():
    assert BlockConnectivity(0, 3, []).rows == 0


def test_block_missing_entry():
    b = BlockConnectivity(1, 3, [4, MISSING, 2])
    assert b.missing(0, 1) and not b.missing(0, 0)


def test_block_length_mismatch():
    with pytest.raises(InvalidArgument):
        BlockConnectivity(2, 3, [0, 1])


def test_multiblock_unified_rows():
    mbc = MultiBlockConnectivity()
    mbc.add_block(BlockConnectivity(2, 4, np.arange(8)))
    multiblock_add_block(mbc, BlockConnectivity(3, 3, np.arange(100, 109)))
    assert mbc.rows == 5
    assert mbc.cols(2) == 3
    assert mbc.row(2).tolist() == [100, 101, 102]
    assert mbc.row(1).tolist() == [4, 5, 6, 7]


def test_multiblock_single_block_view():
    mbc = MultiBlockConnectivity()
    mbc.add_block(BlockConnectivity(2, 3, np.arange(6)))
    np.testing.assert_array_equal(mbc.padded(), mbc.block(0).table)


def test_multiblock_shared_storage():
    mbc = MultiBlockConnectivity()
    mbc.add_block(BlockConnectivity(2, 4, np.arange(8)))
    mbc.add_block(BlockConnectivity(3, 3, np.arange(9)))
    mbc[3, 0] = 9
    assert mbc.block(1)[1, 0] == 9
    mbc.block(0)[1, 2] = -7
    assert mbc[1, 2] == -7


@given(st.lists(st.lists(st.integers(-1, 50), min_size=0, max_size=6), max_size=12))
def test_irregular_rows(rows):
    ic = IrregularConnectivity.from_rows(rows)
    assert ic.rows == len(rows)
    for r, expected in enumerate(rows):
        assert ic.row(r).tolist() == expected
        assert ic.cols(r) == len(expected)


def test_irregular_add_rows():
    ic = IrregularConnectivity.from_rows([[1, 2]])
    ic.add_rows([[3], [4, 5, 6]])
    assert [ic.row(r).tolist() for r in range(3)] == [[1, 2], [3], [4, 5, 6]]


def test_element_types():
    assert element_type(4) is QUADRILATERAL
    assert element_type("triangle") is TRIANGLE
    assert (QUADRILATERAL.gmsh_type, TRIANGLE.gmsh_type) == (3, 2)
    with pytest.raises(InvalidArgument):
        element_type(5)


def _single_quad_mesh():
    nodes = Nodes([[0, 0], [1, 0], [1, 1], [0, 1]], [[0, 0], [1, 0], [1, 1], [0, 1]], [1, 2, 3, 4], [0] * 4, [0, 1, 2, 3])
    return Mesh(nodes, Cells.from_rows([[0, 1, 2, 3]]))


def test_mesh_without_edges():
    assert _single_quad_mesh().edges.size == 0


def test_single_quad_edges():
    mesh = build_edges(_single_quad_mesh())
    assert mesh.edges.size == 4
    cells = mesh.edges.cell_connectivity.table
    assert np.all(cells[:, 0] == 0) and np.all(cells[:, 1] == MISSING)
    pairs = {tuple(sorted(p)) for p in mesh.edges.node_connectivity.table.tolist()}
    assert pairs == {(0, 1), (1, 2), (2, 3), (0, 3)}


def test_cells_from_rows_groups_by_type():
    cells = Cells.from_rows([[0, 1, 2, 3], [0, 1, 2], [4, 5, 6, 7]])
    assert [t.name for t in cells.element_types] == ["triangle", "quadrilateral"]
    assert cells.global_index.tolist() == [2, 1, 3]
    assert cells.nb_nodes().tolist() == [3, 4, 4]


def test_f1_nodes():
    assert generate_structured_mesh(make_grid("F1")).nodes.size == 8


def test_json_round_trip(tmp_path):
    mesh = generate_structured_mesh(make_grid("O4"), halo=0, edges=True)
    path = tmp_path / "m.json"
    write_json(mesh, path)
    back = read_json(path)
    assert back.to_json() == mesh.to_json()
    np.testing.assert_array_equal(back.cells.node_connectivity.padded(), mesh.cells.node_connectivity.padded())
    assert back.metadata == mesh.metadata


def test_gmsh_f1(tmp_path):
    mesh = generate_structured_mesh(make_grid("F1"))
    text = gmsh_string(mesh)
    lines = text.splitlines()
    assert lines[:3] == ["$MeshFormat", "2.2 0 8", "$EndMeshFormat"]
    n_nodes = int(lines[lines.index("$Nodes") + 1])
    start = lines.index("$Elements")
    n_el = int(lines[start + 1])
    elements = lines[start + 2 : start + 2 + n_el]
    assert n_nodes == 8 and n_el == 4
    assert all(e.split()[1] == "3" for e in elements)
    # element node ids refer to written node ids
    node_ids = {int(l.split()[0]) for l in lines[lines.index("$Nodes") + 2 : lines.index("$EndNodes")]}
    assert all(int(v) in node_ids for e in elements for v in e.split()[5:])
    write_gmsh(mesh, tmp_path / "f1.msh")
    assert (tmp_path / "f1.msh").read_text() == text
