"""Edge-based median-dual finite-volume operators on the sphere.

Geometry lives in the (lambda, theta) radian chart, unwrapped per cell.  A
pole vertex is split into two chart points at the longitudes of its two
neighbours, so a cell touching a pole becomes a quadrilateral in the chart.

The dual is built on a triangulation of the cells: triangles are used as
is, and every quadrilateral contributes both of its diagonal splits with
weight 1/2.  The median dual of a triangulation reproduces linear fields
exactly, which the median dual of mixed triangle/quad strips does not.
Quad diagonals therefore appear as extra dual faces next to the mesh edges.

For a chart segment (dlambda, dtheta) the outward dual normal is
``S = R * (dtheta, -dlambda)``; the flux of (u, v) through it is
``u * S[0] + v * cos(theta) * S[1]``.  Dual areas are the exact integral
of ``R^2 cos(theta)`` over the chart polygons.  The gradient takes its
metric factor at the mean chart latitude of the dual cell, which keeps
the error uniform up to the poles.
"""

import numpy as np

from . import kernels
from .errors import InvalidArgument
from .field import Field
from .functionspace import NodeColumns
from .mesh import MISSING
from .projection import EARTH_RADIUS

_POLE_TOL = 1e-14


def _segment_area(p, q):
    """Integral of cos(theta) over the region swept by straight segments p -> q (Green's theorem)."""
    dlam = q[..., 0] - p[..., 0]
    dth = q[..., 1] - p[..., 1]
    mid = 0.5 * (p[..., 1] + q[..., 1])
    return -dlam * np.sin(mid) * np.sinc(dth / (2.0 * np.pi))


def _polygon_moments(pts):
    """Chart area and integral of theta over polygons ``pts`` (..., k, 2), counter-clockwise."""
    x, y = pts[..., 0], pts[..., 1]
    x1, y1 = np.roll(x, -1, axis=-1), np.roll(y, -1, axis=-1)
    cross = x * y1 - x1 * y
    return 0.5 * cross.sum(axis=-1), (cross * (y + y1)).sum(axis=-1) / 6.0


def _chart_cells(lonlat_rad, conn):
    """Chart polygons of one cell block.

    Returns (pts, ids) with shape (nc, k', 2) and (nc, k').  Triangles
    touching a pole come back as quadrilaterals ``a, b, P@b, P@a``.
    """
    pts = lonlat_rad[conn]
    pole = np.abs(pts[..., 1]) >= 0.5 * np.pi - _POLE_TOL
    k = conn.shape[1]
    out = []
    has_pole = pole.any(axis=1)
    if k == 3 and has_pole.any():
        sel = np.flatnonzero(has_pole)
        # rotate so the pole sits at position 2
        shift = 2 - np.argmax(pole[sel], axis=1)
        idx = (np.arange(3)[None, :] - shift[:, None]) % 3
        c = np.take_along_axis(conn[sel], idx, axis=1)
        p = np.take_along_axis(pts[sel], idx[..., None], axis=1)
        lam = _unwrap(p[..., 0])
        th = p[..., 1]
        q = np.stack(
            [
                np.stack([lam[:, 0], th[:, 0]], -1),
                np.stack([lam[:, 1], th[:, 1]], -1),
                np.stack([lam[:, 1], th[:, 2]], -1),
                np.stack([lam[:, 0], th[:, 2]], -1),
            ],
            axis=1,
        )
        out.append((q, c[:, [0, 1, 2, 2]]))
        pts, conn = pts[~has_pole], conn[~has_pole]
    elif has_pole.any():
        raise InvalidArgument("only triangles may touch a pole")
    lam = _unwrap(pts[..., 0])
    out.append((np.stack([lam, pts[..., 1]], axis=-1), conn))
    return out


def _unwrap(lam):
    return lam[:, :1] + (lam - lam[:, :1] + np.pi) % (2.0 * np.pi) - np.pi


def _triangulate(pts, ids):
    """Counter-clockwise sub-triangles (T, 3, 2), their node ids (T, 3) and weights (T,)."""
    if pts.shape[1] == 3:
        tp, ti, w = pts, ids, np.ones(len(pts))
    else:
        splits = ([0, 1, 2], [0, 2, 3], [0, 1, 3], [1, 2, 3])
        tp = np.concatenate([pts[:, s] for s in splits])
        ti = np.concatenate([ids[:, s] for s in splits])
        w = np.full(len(tp), 0.5)
    cw = _polygon_moments(tp)[0] < 0
    if cw.any():
        tp, ti = tp.copy(), ti.copy()
        tp[cw] = tp[cw][:, [0, 2, 1]]
        ti[cw] = ti[cw][:, [0, 2, 1]]
    return tp, ti, w


class FvmMethod:
    """Median-dual geometry of a mesh partition.

    Attributes
    ----------
    volume : (nodes,) dual areas in m^2
    normals : (edges, 2) dual normals of the mesh edges in m, oriented from node0 to node1
    face_node0, face_node1, face_normals : all dual faces, mesh edges first and
        quadrilateral diagonals after them
    metric_lat : (nodes,) mean chart latitude of each dual cell
    closed : (nodes,) dual cell is complete and its normals sum to zero; False at
        the poles, where the chart polygon keeps a zero-length edge on the pole line
    interior : (nodes,) closed and all edge neighbours closed
    """

    def __init__(self, mesh, radius=EARTH_RADIUS, ctx=None):
        if mesh.edges.size == 0:
            raise InvalidArgument("the mesh has no edges; build them first")
        if mesh.halo < 1 and mesh.nb_parts > 1:
            raise InvalidArgument("a distributed mesh needs a halo of at least 1")
        self.mesh = mesh
        self.radius = float(radius)
        self.node_columns = NodeColumns(mesh, ctx=ctx)
        nodes, cells, edges = mesh.nodes, mesh.cells, mesh.edges
        n = nodes.size
        R = self.radius
        ll = np.radians(nodes.lonlat)
        self.lat = ll[:, 1]
        self.coslat = np.cos(self.lat)
        e_nodes = edges.node_connectivity.table
        self.node0 = np.ascontiguousarray(e_nodes[:, 0])
        self.node1 = np.ascontiguousarray(e_nodes[:, 1])
        ne = len(self.node0)
        keys = np.minimum(self.node0, self.node1) * n + np.maximum(self.node0, self.node1)
        korder = np.argsort(keys)
        skeys = keys[korder]

        def lookup(k):
            pos = np.minimum(np.searchsorted(skeys, k), max(len(skeys) - 1, 0))
            found = skeys[pos] == k if len(skeys) else np.zeros(len(k), dtype=bool)
            return found, korder[pos]

        tri_p, tri_i, tri_w = [], [], []
        mbc = cells.node_connectivity
        for b in range(len(cells.element_types)):
            conn = mbc.block(b).table
            if len(conn) == 0:
                continue
            ck = np.minimum(conn, np.roll(conn, -1, axis=1)) * n + np.maximum(conn, np.roll(conn, -1, axis=1))
            if not lookup(ck.ravel())[0].all():
                raise InvalidArgument("cell edge missing from the edge table")
            for pts, ids in _chart_cells(ll, conn):
                p, i, w = _triangulate(pts, ids)
                tri_p.append(p)
                tri_i.append(i)
                tri_w.append(w)
        P = np.concatenate(tri_p)
        I = np.concatenate(tri_i)
        W = np.concatenate(tri_w)

        g = np.broadcast_to(P.mean(axis=1)[:, None, :], P.shape)
        mid = 0.5 * (P + np.roll(P, -1, axis=1))
        mid_prev = np.roll(mid, 1, axis=1)
        # sub-polygon of vertex v: v -> mid_v -> centroid -> mid_{v-1}
        sub = np.stack([P, mid, g, mid_prev], axis=2)
        carea, cmom = _polygon_moments(sub)
        cosint = (
            _segment_area(P, mid) + _segment_area(mid, g) + _segment_area(g, mid_prev) + _segment_area(mid_prev, P)
        )
        volume = np.zeros(n)
        area = np.zeros(n)
        moment = np.zeros(n)
        np.add.at(volume, I.ravel(), (W[:, None] * cosint).ravel())
        np.add.at(area, I.ravel(), (W[:, None] * carea).ravel())
        np.add.at(moment, I.ravel(), (W[:, None] * cmom).ravel())
        self.volume = R * R * volume
        self.metric_lat = np.where(area > 0, moment / np.where(area > 0, area, 1.0), self.lat)

        # face through edge (v, v+1): mid_v -> centroid, outward from v
        d = g - mid
        s = (R * W[:, None, None]) * np.stack([d[..., 1], -d[..., 0]], axis=-1)
        a, bnode = I.ravel(), np.roll(I, -1, axis=1).ravel()
        s = s.reshape(-1, 2)
        keep = a != bnode
        a, bnode, s = a[keep], bnode[keep], s[keep]
        k = np.minimum(a, bnode) * n + np.maximum(a, bnode)
        found, eid = lookup(k)
        extra_keys, extra_inv = np.unique(k[~found], return_inverse=True)
        fid = eid.copy()
        fid[~found] = ne + extra_inv
        f0 = np.concatenate([self.node0, extra_keys // n])
        f1 = np.concatenate([self.node1, extra_keys % n])
        face_normals = np.zeros((len(f0), 2))
        sign = np.where(f0[fid] == a, 1.0, -1.0)
        np.add.at(face_normals, fid, sign[:, None] * s)
        self.face_node0 = np.ascontiguousarray(f0)
        self.face_node1 = np.ascontiguousarray(f1)
        self.face_normals = face_normals
        self.normals = face_normals[:ne]

        ncell = (edges.cell_connectivity.table != MISSING).sum(axis=1)
        sums = np.zeros((n, 2))
        np.add.at(sums, f0, face_normals)
        np.subtract.at(sums, f1, face_normals)
        open_node = np.zeros(n, dtype=bool)
        open_node[self.node0[ncell < 2]] = True
        open_node[self.node1[ncell < 2]] = True
        self.closed = ~open_node & (np.hypot(sums[:, 0], sums[:, 1]) < 1e-8 * R)
        bad_nb = np.zeros(n, dtype=bool)
        bad_nb[f0[~self.closed[f1]]] = True
        bad_nb[f1[~self.closed[f0]]] = True
        self.interior = self.closed & ~bad_nb

    @property
    def nodes(self):
        return self.mesh.nodes

    def node_edge_signs(self):
        """(node, edge, sign) triples over the mesh edges: sign +1 where the node is node0."""
        ne = len(self.node0)
        nodes = np.concatenate([self.node0, self.node1])
        eids = np.concatenate([np.arange(ne), np.arange(ne)])
        sign = np.concatenate([np.ones(ne), -np.ones(ne)])
        order = np.lexsort((eids, nodes))
        return nodes[order], eids[order], sign[order]


def build_fvm_method(mesh, radius=EARTH_RADIUS, ctx=None) -> FvmMethod:
    return FvmMethod(mesh, radius, ctx)


class Nabla:
    """Gradient, divergence, curl and Laplacian on the median dual.

    Operators accept and return Fields of the method's NodeColumns, or
    plain arrays with one row per node.  A scalar has shape ``(n,)`` or
    ``(n, levels)``; a vector has shape ``(n, 2)`` or ``(n, levels, 2)``
    holding the (east, north) components.
    """

    def __init__(self, method: FvmMethod):
        self.method = method

    @property
    def fs(self):
        return self.method.node_columns

    def _unwrap(self, f, vector):
        m = self.method
        if isinstance(f, Field):
            if f.functionspace is not self.fs:
                raise InvalidArgument(f"field {f.name!r} is not on the method's NodeColumns")
            if vector and f.variables != 2:
                raise InvalidArgument(f"field {f.name!r} needs 2 variables, has {f.variables}")
            data = f.host()
            levels = f.levels
        else:
            data = np.asarray(f, dtype=float)
            levels = None
        if len(data) != m.volume.shape[0]:
            raise InvalidArgument(f"expected {m.volume.shape[0]} rows, got {len(data)}")
        if vector:
            if data.shape[-1] != 2 or data.ndim not in (2, 3):
                raise InvalidArgument("vector fields need 2 variables")
            return np.asarray(data, dtype=float).reshape(len(data), -1, 2), f, data.ndim == 3
        if data.ndim not in (1, 2):
            raise InvalidArgument("scalar fields must be rank 1 or 2")
        if isinstance(f, Field) and f.variables:
            raise InvalidArgument("scalar fields must not have variables")
        return np.asarray(data, dtype=float).reshape(len(data), -1), f, data.ndim == 2

    def _wrap(self, values, like, has_levels, vector, name, out):
        n = values.shape[0]
        shape = (n,) + ((values.shape[1],) if has_levels else ()) + ((2,) if vector else ())
        values = values.reshape(shape)
        if isinstance(like, Field):
            if out is None:
                out = self.fs.create_field(name, "float64", values.shape[1] if has_levels else 0, 2 if vector else 0)
            out.host(writable=True)[...] = values
            self.fs.halo_exchange(out)
            return out
        self._exchange_array(values)
        if out is not None:
            out[...] = values
            return out
        return values

    def _exchange_array(self, values):
        from .parallel import halo_exchange

        halo_exchange(self.fs.halo_plan, values, self.fs.ctx)

    def _grad(self, phi):
        m = self.method
        out = np.zeros(phi.shape + (2,))
        kernels.accumulate_gradient(m.face_node0, m.face_node1, np.ascontiguousarray(phi), m.face_normals, out)
        out[..., 1] *= np.cos(m.metric_lat)[:, None]
        return out / m.volume[:, None, None]

    def _div(self, uv):
        m = self.method
        out = np.zeros(uv.shape[:2])
        fx = np.ascontiguousarray(uv[..., 0])
        fy = np.ascontiguousarray(uv[..., 1] * m.coslat[:, None])
        kernels.accumulate_flux(m.face_node0, m.face_node1, fx, fy, m.face_normals, out)
        return out / m.volume[:, None]

    def _curl(self, uv):
        m = self.method
        out = np.zeros(uv.shape[:2])
        # circulation along the dual boundary: v * S_lambda - u * cos(theta) * S_theta
        fx = np.ascontiguousarray(uv[..., 1])
        fy = np.ascontiguousarray(-uv[..., 0] * m.coslat[:, None])
        kernels.accumulate_flux(m.face_node0, m.face_node1, fx, fy, m.face_normals, out)
        return out / m.volume[:, None]

    def gradient(self, scalar, out=None):
        """Horizontal gradient (east, north) in units of field / m."""
        phi, like, lv = self._unwrap(scalar, vector=False)
        return self._wrap(self._grad(phi), like, lv, True, "gradient", out)

    def divergence(self, vector, out=None):
        uv, like, lv = self._unwrap(vector, vector=True)
        return self._wrap(self._div(uv), like, lv, False, "divergence", out)

    def curl(self, vector, out=None):
        """Vertical component of the curl."""
        uv, like, lv = self._unwrap(vector, vector=True)
        return self._wrap(self._curl(uv), like, lv, False, "curl", out)

    def laplacian(self, scalar, out=None):
        phi, like, lv = self._unwrap(scalar, vector=False)
        g = self._grad(phi)
        self._exchange_array(g)
        return self._wrap(self._div(g), like, lv, False, "laplacian", out)


def max_relative_error(approx, exact, mask=None):
    """max |approx - exact| / max |exact| over ``mask`` rows."""
    approx, exact = np.asarray(approx), np.asarray(exact)
    if mask is not None:
        approx, exact = approx[mask], exact[mask]
    scale = np.max(np.abs(exact))
    return float(np.max(np.abs(approx - exact)) / scale) if scale > 0 else float(np.max(np.abs(approx)))
