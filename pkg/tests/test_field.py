import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from meshkit.errors import ConflictError, ContractError, InvalidArgument, NotFoundError, StateError
from meshkit.field import Array, FieldSet, Metadata, array_create, clone_from_device, clone_to_device, field_create, make_view
from oracles import random_protocol_sequence


def test_default_array():
    a = array_create((3, 2))
    assert a.size == 6 and a.host_valid and not a.device_valid
    assert a.host_view()[...].tolist() == [[0, 0], [0, 0], [0, 0]]


def test_reversed_layout_offsets():
    a = Array((3, 2), layout=(1, 0))
    for i in range(3):
        for j in range(2):
            assert a.offset(i, j) == j * 3 + i


def test_zero_dim():
    a = Array((0, 4))
    assert a.size == 0 and a.host_valid
    assert a.host_view()[...].shape == (0, 4)


@pytest.mark.parametrize("layout", [(0, 0), (0, 2), (1,)])
def test_bad_layout(layout):
    with pytest.raises(InvalidArgument):
        Array((3, 2), layout=layout)


def test_unsupported_dtype():
    with pytest.raises(InvalidArgument):
        Array((2,), dtype="complex128")


def test_offset_bounds():
    a = Array((3, 2))
    with pytest.raises(IndexError):
        a.offset(3, 0)
    with pytest.raises(IndexError):
        a.host_view(writable=True)[3, 0] = 1.0


@given(
    st.lists(st.integers(1, 4), min_size=1, max_size=4).flatmap(
        lambda shape: st.tuples(st.just(tuple(shape)), st.permutations(range(len(shape))))
    ),
    st.data(),
)
@settings(max_examples=60)
def test_layout_transparency(shape_layout, data):
    shape, layout = shape_layout
    a, b = Array(shape), Array(shape, layout=layout)
    va, vb = a.host_view(True), b.host_view(True)
    writes = data.draw(st.lists(st.tuples(*[st.integers(0, s - 1) for s in shape], st.integers(-50, 50)), max_size=12))
    for *idx, val in writes:
        va[tuple(idx)] = val
        vb[tuple(idx)] = val
    np.testing.assert_array_equal(va[...], vb[...])
    # offsets are a bijection onto 0..size-1
    offs = {b.offset(*idx) for idx in np.ndindex(*shape)}
    assert offs == set(range(b.size))
    # memory really follows the layout
    mem = b._buffers["host"]
    for idx in np.ndindex(*shape):
        assert mem[b.offset(*idx)] == vb[idx]


def test_write_read():
    a = Array((3, 2))
    v = a.host_view(writable=True)
    v[2, 1] = 7
    assert v[2, 1] == 7


def test_clone_round_trip():
    a = Array((4,))
    a.host_view(True)[...] = [1, 2, 3, 4]
    clone_to_device(a)
    assert a.device_view()[...].tolist() == [1, 2, 3, 4]
    clone_to_device(a)
    assert a.host_valid and a.device_valid
    assert a.device_view()[...].tolist() == [1, 2, 3, 4]


def test_clone_from_invalid_device():
    a = Array((2,))
    with pytest.raises(StateError):
        clone_from_device(a)
    clone_to_device(a)
    a.host_view(True)[0] = 1
    with pytest.raises(StateError):
        clone_from_device(a)


def test_view_on_invalid_space():
    a = Array((2,))
    with pytest.raises(StateError):
        make_view(a, "device")
    with pytest.raises(InvalidArgument):
        make_view(a, "gpu")


def test_write_invalidates_other_space_views():
    a = Array((2,))
    clone_to_device(a)
    dev = a.device_view()
    host = a.host_view(writable=True)
    assert dev.valid() and host.valid()
    host[0] = 5.0
    assert not dev.valid() and host.valid()
    assert not a.device_valid
    with pytest.raises(ContractError):
        dev[0]
    with pytest.raises(StateError):
        a.device_view()
    clone_to_device(a)
    assert not dev.valid()  # stale views stay stale
    assert a.device_view()[0] == 5.0


def test_readonly_never_invalidates():
    a = Array((3,))
    clone_to_device(a)
    views = [a.host_view(), a.device_view(), a.host_view(), a.device_view()]
    for v in views:
        v[...]
        v.ndarray
    assert all(v.valid() for v in views)
    assert a.host_valid and a.device_valid


def test_readonly_write_rejected():
    a = Array((2,))
    v = a.host_view()
    with pytest.raises(ContractError):
        v[0] = 1.0
    with pytest.raises(ValueError):
        v.ndarray[0] = 1.0


def test_sync():
    a = Array((2,))
    clone_to_device(a)
    a.device_view(True)[1] = 3.0
    assert not a.host_valid
    a.sync()
    assert a.host_valid and a.host_view()[1] == 3.0


def test_protocol_against_oracle():
    rng = np.random.default_rng(7)
    assert sum(random_protocol_sequence(rng, 30) for _ in range(500)) == 500 * 30


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=200, deadline=None)
def test_protocol_hypothesis_seeds(seed):
    random_protocol_sequence(np.random.default_rng(seed), 20)


# --- metadata, fields, field sets ---------------------------------------


def test_metadata_types():
    m = Metadata(units="K", levels=3, scale=1.5, flag=True)
    assert m.get_typed("levels", int) == 3
    with pytest.raises(InvalidArgument):
        m["bad"] = [1, 2]
    with pytest.raises(InvalidArgument):
        m.get_typed("units", int)
    m["n"] = np.int32(4)
    assert type(m["n"]) is int


def test_field_create_and_json():
    f = field_create("temperature", "float32", (3, 2), {"units": "K"})
    f.host(writable=True)[...] = 1.5
    d = json.loads(f.to_json())
    assert d["name"] == "temperature" and d["dtype"] == "float32" and d["shape"] == [3, 2]
    assert d["metadata"]["units"] == "K"
    assert d["values"] == [[1.5, 1.5]] * 3


def test_fieldset():
    fs = FieldSet()
    t = fs.add(field_create("temperature", shape=(2,)))
    p = fs.add(field_create("pressure", shape=(2,)))
    assert fs.get("pressure") is p
    assert fs[0] is t and fs[-1] is p
    assert fs.names == ["temperature", "pressure"]
    with pytest.raises(ConflictError):
        fs.add(field_create("pressure", shape=(3,)))
    with pytest.raises(NotFoundError):
        fs.get("missing")
    with pytest.raises(NotFoundError):
        fs[2]
    assert "temperature" in fs and len(fs) == 2
