"""Arrays with a host and a mirrored device memory space, views, Fields and FieldSets.

Validity protocol
-----------------
Each space has a validity flag and an epoch counter.  A view records the
epoch of its space when it is created and stays valid while the space is
valid and the epoch is unchanged.  The first write through a view on one
space marks the other space invalid and bumps the other space's epoch, so
every outstanding view of the stale space turns invalid.  Read-only views
never change any state.  Cloning copies the valid space into the other
one and marks both valid.
"""

import json
import math

import numpy as np

from .errors import ConflictError, ContractError, InvalidArgument, NotFoundError, StateError

HOST, DEVICE = "host", "device"
SPACES = (HOST, DEVICE)
DTYPES = {
    "int32": np.dtype(np.int32),
    "int64": np.dtype(np.int64),
    "float32": np.dtype(np.float32),
    "float64": np.dtype(np.float64),
}


def as_dtype(kind) -> np.dtype:
    try:
        dt = np.dtype(kind)
    except TypeError:
        raise InvalidArgument(f"unsupported value kind {kind!r}") from None
    if dt.name not in DTYPES:
        raise InvalidArgument(f"unsupported value kind {kind!r}; use one of {sorted(DTYPES)}")
    return dt


def _other(space):
    return DEVICE if space == HOST else HOST


def _check_space(space):
    if space not in SPACES:
        raise InvalidArgument(f"unknown memory space {space!r}")
    return space


class Array:
    """Contiguous N-d storage with a host and a device buffer.

    Parameters
    ----------
    shape : sequence of int
    layout : sequence of int, optional
        Dimensions ordered from slowest to fastest varying in memory.
        Defaults to row-major order.
    dtype : str or numpy dtype
    """

    def __init__(self, shape, layout=None, dtype="float64"):
        self.shape = tuple(int(s) for s in shape)
        if any(s < 0 for s in self.shape):
            raise InvalidArgument(f"negative dimension in shape {self.shape}")
        rank = len(self.shape)
        self.layout = tuple(range(rank)) if layout is None else tuple(int(d) for d in layout)
        if sorted(self.layout) != list(range(rank)):
            raise InvalidArgument(f"layout {self.layout} is not a permutation of range({rank})")
        self.dtype = as_dtype(dtype)
        self.size = math.prod(self.shape)
        strides = [0] * rank
        step = 1
        for d in reversed(self.layout):
            strides[d] = step
            step *= self.shape[d]
        self.strides = tuple(strides)  # in elements
        self._buffers = {HOST: np.zeros(self.size, dtype=self.dtype), DEVICE: None}
        self._valid = {HOST: True, DEVICE: False}
        self._epoch = {HOST: 0, DEVICE: 0}

    def __repr__(self):
        return f"Array(shape={self.shape}, layout={self.layout}, dtype={self.dtype.name}, host_valid={self.host_valid}, device_valid={self.device_valid})"

    @property
    def rank(self):
        return len(self.shape)

    @property
    def host_valid(self):
        return self._valid[HOST]

    @property
    def device_valid(self):
        return self._valid[DEVICE]

    @property
    def device_allocated(self):
        return self._buffers[DEVICE] is not None

    def valid(self, space):
        return self._valid[_check_space(space)]

    def epoch(self, space):
        return self._epoch[_check_space(space)]

    def offset(self, *idx):
        """Memory offset (in elements) of a logical index."""
        if len(idx) != self.rank:
            raise IndexError(f"expected {self.rank} indices, got {len(idx)}")
        for i, n in zip(idx, self.shape):
            if not 0 <= i < n:
                raise IndexError(f"index {idx} out of range for shape {self.shape}")
        return sum(i * s for i, s in zip(idx, self.strides))

    def _logical(self, space):
        buf = self._buffers[space]
        mem_shape = [self.shape[d] for d in self.layout]
        inverse = np.argsort(self.layout)
        return buf.reshape(mem_shape).transpose(inverse)

    def allocate_device(self):
        if self._buffers[DEVICE] is None:
            self._buffers[DEVICE] = np.zeros(self.size, dtype=self.dtype)

    def _clone(self, src):
        dst = _other(src)
        if not self._valid[src]:
            raise StateError(f"cannot clone from the {src}: its contents are not valid")
        if self._buffers[dst] is None:
            self._buffers[dst] = np.empty(self.size, dtype=self.dtype)
        np.copyto(self._buffers[dst], self._buffers[src])
        self._valid[dst] = True

    def clone_to_device(self):
        self._clone(HOST)

    def clone_from_device(self):
        self._clone(DEVICE)

    def sync(self):
        """Bring the invalid space up to date, if any."""
        if not self._valid[DEVICE] and self._buffers[DEVICE] is not None:
            self._clone(HOST)
        elif not self._valid[HOST]:
            self._clone(DEVICE)

    def _note_write(self, space):
        other = _other(space)
        if self._valid[other]:
            self._valid[other] = False
            self._epoch[other] += 1

    def view(self, space=HOST, writable=False):
        return make_view(self, space, writable)

    def host_view(self, writable=False):
        return make_view(self, HOST, writable)

    def device_view(self, writable=False):
        return make_view(self, DEVICE, writable)


def array_create(shape, layout=None, dtype="float64") -> Array:
    return Array(shape, layout, dtype)


def clone_to_device(array: Array):
    array.clone_to_device()


def clone_from_device(array: Array):
    array.clone_from_device()


class ArrayView:
    """Indexed access to one memory space of an Array."""

    def __init__(self, array: Array, space, writable):
        self.array = array
        self.space = space
        self.writable = bool(writable)
        self.stamp = array.epoch(space)

    def __repr__(self):
        mode = "rw" if self.writable else "ro"
        return f"ArrayView({self.space}, {mode}, valid={self.valid()})"

    @property
    def rank(self):
        return self.array.rank

    @property
    def shape(self):
        return self.array.shape

    def valid(self):
        a = self.array
        return a.valid(self.space) and a.epoch(self.space) == self.stamp

    def _require_valid(self):
        if not self.valid():
            raise ContractError(f"{self.space} view is no longer valid")

    def _require_writable(self):
        if not self.writable:
            raise ContractError("write through a read-only view")
        self._require_valid()

    def __getitem__(self, idx):
        self._require_valid()
        out = self.array._logical(self.space)[idx]
        return out.copy() if isinstance(out, np.ndarray) else out

    def __setitem__(self, idx, value):
        self._require_writable()
        target = self.array._logical(self.space)
        target[idx]  # bounds check before touching state
        self.array._note_write(self.space)
        target[idx] = value

    @property
    def ndarray(self) -> np.ndarray:
        """Logical numpy view.  On a writable view this counts as a write."""
        self._require_valid()
        out = self.array._logical(self.space)
        if self.writable:
            self.array._note_write(self.space)
            return out
        out = out.view()
        out.flags.writeable = False
        return out


def make_view(array: Array, space=HOST, writable=False) -> ArrayView:
    """Create a view on ``space``; the space must hold valid data."""
    space = _check_space(space)
    if array._buffers[space] is None:
        raise StateError(f"no {space} buffer allocated; clone to the {space} first")
    if not array.valid(space):
        raise StateError(f"{space} contents are not valid")
    return ArrayView(array, space, writable)


class Metadata(dict):
    """String keys mapping to str, int, float or bool values."""

    def __setitem__(self, key, value):
        if not isinstance(key, str):
            raise InvalidArgument(f"metadata keys must be strings, got {key!r}")
        if isinstance(value, (np.integer, np.floating, np.bool_)):
            value = value.item()
        if not isinstance(value, (str, int, float, bool)):
            raise InvalidArgument(f"metadata value for {key!r} must be str, int, float or bool")
        super().__setitem__(key, value)

    def __init__(self, *args, **kwargs):
        super().__init__()
        self.update(*args, **kwargs)

    def update(self, *args, **kwargs):
        for k, v in dict(*args, **kwargs).items():
            self[k] = v

    def get_typed(self, key, kind):
        value = self[key]
        if not isinstance(value, kind):
            raise InvalidArgument(f"metadata {key!r} is {type(value).__name__}, not {kind.__name__}")
        return value


class Field:
    """Named Array with metadata and an optional function space."""

    def __init__(self, name, array: Array, metadata=None, functionspace=None, levels=0, variables=0):
        self.name = str(name)
        self.array = array
        self.metadata = Metadata(metadata or {})
        self.metadata.setdefault("name", self.name)
        self.functionspace = functionspace
        self.levels = int(levels)
        self.variables = int(variables)

    def __repr__(self):
        return f"Field({self.name!r}, shape={self.shape}, dtype={self.dtype.name})"

    @property
    def shape(self):
        return self.array.shape

    @property
    def dtype(self):
        return self.array.dtype

    @property
    def rank(self):
        return self.array.rank

    def view(self, space=HOST, writable=False):
        return make_view(self.array, space, writable)

    def host(self, writable=False) -> np.ndarray:
        """Numpy view of the host data (a write when ``writable``)."""
        return make_view(self.array, HOST, writable).ndarray

    def to_dict(self):
        values = self.array._logical(HOST) if self.array.host_valid else self.array._logical(DEVICE)
        return {
            "name": self.name,
            "shape": list(self.shape),
            "dtype": self.dtype.name,
            "metadata": dict(self.metadata),
            "values": values.tolist(),
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


def field_create(name, kind="float64", shape=(), metadata=None, layout=None, functionspace=None, levels=0, variables=0) -> Field:
    return Field(name, Array(shape, layout, kind), metadata, functionspace, levels, variables)


class FieldSet:
    """Ordered collection of uniquely named fields."""

    def __init__(self, fields=()):
        self._fields: dict[str, Field] = {}
        for f in fields:
            self.add(f)

    def add(self, field: Field):
        if field.name in self._fields:
            raise ConflictError(f"field {field.name!r} already in the set")
        self._fields[field.name] = field
        return field

    def __getitem__(self, key):
        if isinstance(key, str):
            try:
                return self._fields[key]
            except KeyError:
                raise NotFoundError(f"no field named {key!r}") from None
        if isinstance(key, (int, np.integer)) and not isinstance(key, bool):
            values = list(self._fields.values())
            if not -len(values) <= key < len(values):
                raise NotFoundError(f"field index {key} out of range")
            return values[key]
        raise InvalidArgument(f"field key must be a name or an index, got {key!r}")

    get = __getitem__

    def __contains__(self, name):
        return name in self._fields

    def __len__(self):
        return len(self._fields)

    def __iter__(self):
        return iter(self._fields.values())

    @property
    def names(self):
        return list(self._fields)
