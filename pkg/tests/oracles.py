"""Independent reference computations shared by the tests."""

import numpy as np


def legendre_residual(n, lat_deg):
    """|P_n(sin lat)| evaluated in extended precision.

    Rounding sin(lat) to float64 alone perturbs P_n by |P_n'| * 1e-16,
    which near the poles of a high degree polynomial is ~1e-11, so the
    argument and the recurrence are carried in long double.
    """
    assert np.finfo(np.longdouble).eps < 1e-18, "needs an extended precision long double"
    lat = np.asarray(lat_deg, dtype=np.longdouble)
    x = np.sin(lat * (np.longdouble(np.pi) + np.longdouble(1.2246467991473532e-16)) / 180)
    p0, p1 = np.ones_like(x), x
    for k in range(1, n):
        p0, p1 = p1, ((2 * k + 1) * x * p1 - k * p0) / (k + 1)
    return np.abs(p1 if n >= 1 else p0).astype(float)


class MemoryOracle:
    """Single-buffer model of a host/device mirrored array.

    Every write lands in one logical buffer.  A space is *fresh* when it
    holds that buffer's latest contents; a view is usable only while its
    space has stayed fresh since the view was made.  Reads never change
    anything.
    """

    def __init__(self, shape):
        self.buffer = np.zeros(shape)
        self.fresh = {"host": True, "device": False}
        self.allocated = {"host": True, "device": False}
        self.views = []  # [space, writable, alive]

    def _stale(self, space):
        if self.fresh[space]:
            self.fresh[space] = False
            for v in self.views:
                if v[0] == space:
                    v[2] = False

    def clone(self, src):
        """Return False if the clone must fail."""
        dst = "device" if src == "host" else "host"
        if not (self.allocated[src] and self.fresh[src]):
            return False
        self.allocated[dst] = self.fresh[dst] = True
        return True

    def make_view(self, space, writable):
        if not (self.allocated[space] and self.fresh[space]):
            return None
        self.views.append([space, writable, True])
        return len(self.views) - 1

    def write(self, k, idx, value):
        space, writable, alive = self.views[k]
        if not (writable and alive):
            return False
        self.buffer[idx] = value
        self._stale("device" if space == "host" else "host")
        return True

    def read(self, k, idx):
        return self.buffer[idx] if self.views[k][2] else None


def random_protocol_sequence(rng, n_ops=16):
    """Drive an Array and the oracle with the same random operations.

    Returns the number of checks made; raises AssertionError on the first
    disagreement.
    """
    from meshkit.errors import ContractError, StateError
    from meshkit.field import Array

    rank = int(rng.integers(1, 4))
    shape = tuple(int(s) for s in rng.integers(1, 4, rank))
    layout = tuple(int(d) for d in rng.permutation(rank))
    arr = Array(shape, layout)
    model = MemoryOracle(shape)
    views = []
    checks = 0

    def random_index():
        return tuple(int(rng.integers(0, s)) for s in shape)

    for _ in range(n_ops):
        op = rng.choice(["clone_to", "clone_from", "view", "write", "read", "query"], p=[0.12, 0.08, 0.2, 0.25, 0.2, 0.15])
        if op in ("clone_to", "clone_from"):
            src = "host" if op == "clone_to" else "device"
            ok = model.clone(src)
            try:
                arr.clone_to_device() if op == "clone_to" else arr.clone_from_device()
                assert ok, f"{op} should have failed"
            except StateError:
                assert not ok, f"{op} should have succeeded"
        elif op == "view":
            space = str(rng.choice(["host", "device"]))
            writable = bool(rng.integers(0, 2))
            k = model.make_view(space, writable)
            try:
                views.append(arr.view(space, writable))
                assert k is not None, "view on a stale space was allowed"
            except StateError:
                assert k is None, "view on a fresh space was refused"
        elif op == "write" and views:
            k = int(rng.integers(0, len(views)))
            idx, value = random_index(), float(rng.integers(1, 1000))
            ok = model.write(k, idx, value)
            try:
                views[k][idx] = value
                assert ok, "write through an unusable view was allowed"
            except ContractError:
                assert not ok, "write through a usable view was refused"
        elif op == "read" and views:
            k = int(rng.integers(0, len(views)))
            idx = random_index()
            expected = model.read(k, idx)
            try:
                got = views[k][idx]
                assert expected is not None, "read through an invalidated view was allowed"
                assert got == expected, f"read {got}, latest write is {expected}"
            except ContractError:
                assert expected is None, "read through a valid view was refused"
        else:
            for space in ("host", "device"):
                assert arr.valid(space) == model.fresh[space]
            assert arr.host_valid or arr.device_valid
            for v, (_, _, alive) in zip(views, model.views):
                assert v.valid() == alive
        checks += 1
    return checks


def cell_nodes_global(mesh):
    """{cell global index: tuple of node global indices}."""
    from meshkit.mesh import MISSING

    conn = mesh.cells.node_connectivity.padded(4)
    g = mesh.nodes.global_index
    return {
        int(c): tuple(int(g[v]) for v in row if v != MISSING)
        for c, row in zip(mesh.cells.global_index, conn)
    }


def oracle_partition(reference, part, depth):
    """Brute force over the single-partition mesh: (cell set, owned cells, node set)."""
    cells = cell_nodes_global(reference)
    node_part = dict(zip(reference.nodes.global_index.tolist(), part.tolist()))
    owner = {c: node_part[min(nodes)] for c, nodes in cells.items()}
    out = []
    for p in range(part.max() + 1):
        present = {c for c, o in owner.items() if o == p}
        nodes = {n for n, q in node_part.items() if q == p}
        for c in present:
            nodes.update(cells[c])
        for _ in range(depth):
            touch = {c for c, nn in cells.items() if c not in present and nodes.intersection(nn)}
            present |= touch
            for c in touch:
                nodes.update(cells[c])
        out.append((present, {c for c in present if owner[c] == p}, nodes))
    return cells, out
