"""Coordinate transforms between grid coordinates (x, y) and (lon, lat).

All transforms work on scalars or numpy arrays.  Angles are in degrees,
planar coordinates in meters.
"""

from collections import namedtuple

import numpy as np

from .errors import InvalidArgument, InvalidSpec, ProjectionDomainError

EARTH_RADIUS = 6371229.0

DEG = np.pi / 180.0


def normalize_lon(lon):
    """Map longitudes into [0, 360)."""
    out = np.mod(lon, 360.0)
    return np.where(out >= 360.0, 0.0, out) if np.ndim(out) else (0.0 if out >= 360.0 else float(out))


class PointXY(namedtuple("PointXY", "x y")):
    __slots__ = ()

    def __new__(cls, x, y):
        return super().__new__(cls, float(x), float(y))


class PointLonLat(namedtuple("PointLonLat", "lon lat")):
    """Geographic point; longitude is normalized to [0, 360) on construction."""

    __slots__ = ()

    def __new__(cls, lon, lat):
        lat = float(lat)
        if not (-90.0 - 1e-9 <= lat <= 90.0 + 1e-9):
            raise InvalidArgument(f"latitude {lat} outside [-90, 90]")
        return super().__new__(cls, normalize_lon(float(lon)), min(90.0, max(-90.0, lat)))


def _to_xyz(lon, lat):
    lon = np.asarray(lon, dtype=float) * DEG
    lat = np.asarray(lat, dtype=float) * DEG
    c = np.cos(lat)
    return np.stack([c * np.cos(lon), c * np.sin(lon), np.sin(lat)])


def _from_xyz(v):
    lon = np.arctan2(v[1], v[0]) / DEG
    lat = np.arctan2(v[2], np.hypot(v[0], v[1])) / DEG
    return lon, lat


class Rotation:
    """Rotation that moves the north pole of the rotated frame onto ``north_pole``.

    The matrix is R_z(lon_p) . R_y(90 - lat_p) acting on unit vectors.
    """

    def __init__(self, north_pole):
        lon_p, lat_p = (float(v) for v in north_pole)
        if not -90.0 <= lat_p <= 90.0:
            raise InvalidSpec(f"north_pole latitude {lat_p} outside [-90, 90]")
        self.north_pole = (lon_p, lat_p)
        self.identity = lon_p == 0.0 and lat_p == 90.0
        a = lon_p * DEG
        b = (90.0 - lat_p) * DEG
        rz = np.array([[np.cos(a), -np.sin(a), 0.0], [np.sin(a), np.cos(a), 0.0], [0.0, 0.0, 1.0]])
        ry = np.array([[np.cos(b), 0.0, np.sin(b)], [0.0, 1.0, 0.0], [-np.sin(b), 0.0, np.cos(b)]])
        self.matrix = rz @ ry

    def rotate(self, lon, lat):
        """Rotated-frame coordinates to geographic."""
        if self.identity:
            return np.asarray(lon, dtype=float), np.asarray(lat, dtype=float)
        v = _to_xyz(lon, lat)
        return _from_xyz(np.tensordot(self.matrix, v, axes=1))

    def unrotate(self, lon, lat):
        if self.identity:
            return np.asarray(lon, dtype=float), np.asarray(lat, dtype=float)
        v = _to_xyz(lon, lat)
        return _from_xyz(np.tensordot(self.matrix.T, v, axes=1))


class Projection:
    """Base class; subclasses implement ``_forward`` and ``_inverse`` on arrays."""

    type = None
    units = "degrees"

    def __init__(self, spec):
        self.spec = spec

    def __repr__(self):
        return f"{type(self).__name__}({self.spec!r})"

    def __eq__(self, other):
        return isinstance(other, Projection) and self.spec == other.spec

    def __hash__(self):
        return hash(repr(sorted(self.spec.items())))

    def xy_to_lonlat(self, x, y):
        """Vectorized forward transform; longitudes normalized to [0, 360)."""
        lon, lat = self._forward(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        return normalize_lon(lon), np.clip(lat, -90.0, 90.0)

    def lonlat_to_xy(self, lon, lat):
        return self._inverse(np.asarray(lon, dtype=float), np.asarray(lat, dtype=float))

    def forward(self, p):
        """PointXY -> PointLonLat."""
        x, y = p
        if not (np.isfinite(x) and np.isfinite(y)):
            raise InvalidArgument(f"non-finite point {p!r}")
        lon, lat = self.xy_to_lonlat(x, y)
        return PointLonLat(float(lon), float(lat))

    def inverse(self, q):
        """PointLonLat -> PointXY."""
        lon, lat = q
        if not (np.isfinite(lon) and np.isfinite(lat)):
            raise InvalidArgument(f"non-finite point {q!r}")
        x, y = self.lonlat_to_xy(lon, lat)
        return PointXY(float(x), float(y))

    lonlat = forward
    xy = inverse


class LonLatProjection(Projection):
    type = "lonlat"

    def _forward(self, x, y):
        return x, y

    def _inverse(self, lon, lat):
        return lon, lat


class RotatedLonLatProjection(Projection):
    type = "rotated_lonlat"

    def __init__(self, spec):
        super().__init__(spec)
        self.rotation = Rotation(spec["north_pole"])

    def _forward(self, x, y):
        return self.rotation.rotate(x, y)

    def _inverse(self, lon, lat):
        return self.rotation.unrotate(lon, lat)


def _stretch(lat, c):
    # tan(colat'/2) = c * tan(colat/2); same map as
    # mu' = ((1-c^2) + (1+c^2) mu) / ((1+c^2) + (1-c^2) mu) with mu = sin(lat)
    colat = (90.0 - lat) * DEG
    return 90.0 - 2.0 * np.arctan(c * np.tan(0.5 * colat)) / DEG


class SchmidtProjection(Projection):
    type = "schmidt"

    def __init__(self, spec):
        super().__init__(spec)
        self.c = float(spec["stretching_factor"])
        if not self.c > 0.0:
            raise InvalidSpec(f"stretching_factor must be > 0, got {self.c}")

    def _forward(self, x, y):
        if self.c == 1.0:
            return x, y
        return x, _stretch(y, self.c)

    def _inverse(self, lon, lat):
        if self.c == 1.0:
            return lon, lat
        return lon, _stretch(lat, 1.0 / self.c)


class RotatedSchmidtProjection(SchmidtProjection):
    type = "rotated_schmidt"

    def __init__(self, spec):
        super().__init__(spec)
        self.rotation = Rotation(spec["north_pole"])

    def _forward(self, x, y):
        lon, lat = super()._forward(x, y)
        return self.rotation.rotate(lon, lat)

    def _inverse(self, lon, lat):
        lon, lat = self.rotation.unrotate(lon, lat)
        return super()._inverse(lon, lat)


def _wrap180(d):
    return (d + 180.0) % 360.0 - 180.0


class MercatorProjection(Projection):
    type = "mercator"
    units = "meters"

    def __init__(self, spec):
        super().__init__(spec)
        self.lon0 = float(spec.get("central_meridian", 0.0))
        self.radius = float(spec.get("radius", EARTH_RADIUS))
        if not self.radius > 0.0:
            raise InvalidSpec("radius must be > 0")

    def _forward(self, x, y):
        lon = self.lon0 + x / (self.radius * DEG)
        lat = (2.0 * np.arctan(np.exp(y / self.radius)) - 0.5 * np.pi) / DEG
        return lon, lat

    def _inverse(self, lon, lat):
        if np.any(np.abs(lat) >= 90.0):
            raise ProjectionDomainError("Mercator is undefined at the poles")
        x = self.radius * _wrap180(lon - self.lon0) * DEG
        y = self.radius * np.log(np.tan(0.25 * np.pi + 0.5 * lat * DEG))
        return x, y


class RotatedMercatorProjection(MercatorProjection):
    type = "rotated_mercator"

    def __init__(self, spec):
        super().__init__(spec)
        self.rotation = Rotation(spec["north_pole"])

    def _forward(self, x, y):
        return self.rotation.rotate(*super()._forward(x, y))

    def _inverse(self, lon, lat):
        lon, lat = self.rotation.unrotate(lon, lat)
        return super()._inverse(lon, lat)


class LambertProjection(Projection):
    """Spherical Lambert conformal conic with one or two standard parallels."""

    type = "lambert"
    units = "meters"

    def __init__(self, spec):
        super().__init__(spec)
        parallels = [float(p) for p in spec["standard_parallels"]]
        if len(parallels) == 1:
            parallels = parallels * 2
        if len(parallels) != 2 or any(abs(p) >= 90.0 for p in parallels):
            raise InvalidSpec(f"invalid standard_parallels {spec['standard_parallels']!r}")
        self.lat1, self.lat2 = parallels
        self.lon0 = float(spec.get("central_meridian", 0.0))
        self.lat0 = float(spec.get("latitude_of_origin", self.lat1))
        self.radius = float(spec.get("radius", EARTH_RADIUS))
        if not self.radius > 0.0:
            raise InvalidSpec("radius must be > 0")
        p1, p2 = self.lat1 * DEG, self.lat2 * DEG
        t1, t2 = np.tan(0.25 * np.pi + 0.5 * p1), np.tan(0.25 * np.pi + 0.5 * p2)
        if self.lat1 == self.lat2:
            n = np.sin(p1)
        else:
            n = np.log(np.cos(p1) / np.cos(p2)) / np.log(t2 / t1)
        if abs(n) < 1e-12:
            raise InvalidSpec("degenerate Lambert cone (n = 0); use mercator")
        self.n = float(n)
        self.F = float(np.cos(p1) * t1**self.n / self.n)
        self.rho0 = self._rho(self.lat0)

    def _rho(self, lat):
        t = np.tan(0.25 * np.pi + 0.5 * np.asarray(lat, dtype=float) * DEG)
        with np.errstate(divide="ignore", over="ignore"):
            return self.radius * self.F * t ** (-self.n)

    def _forward(self, x, y):
        n = self.n
        dy = self.rho0 - y
        rho = np.sign(n) * np.hypot(x, dy)
        if np.any(rho * n <= 0.0):
            raise ProjectionDomainError("point at the apex of the Lambert cone")
        theta = np.arctan2(np.sign(n) * x, np.sign(n) * dy)
        lon = self.lon0 + theta / (n * DEG)
        lat = (2.0 * np.arctan((self.radius * self.F / rho) ** (1.0 / n)) - 0.5 * np.pi) / DEG
        return lon, lat

    def _inverse(self, lon, lat):
        rho = self._rho(lat)
        # rho carries the sign of n (southern cones have n < 0)
        if np.any(~np.isfinite(rho)) or np.any(rho * self.n <= 0.0):
            raise ProjectionDomainError("latitude outside the Lambert projection range")
        ang = self.n * _wrap180(lon - self.lon0) * DEG
        return rho * np.sin(ang), self.rho0 - rho * np.cos(ang)


_TYPES = {
    cls.type: cls
    for cls in (
        LonLatProjection,
        RotatedLonLatProjection,
        SchmidtProjection,
        RotatedSchmidtProjection,
        MercatorProjection,
        RotatedMercatorProjection,
        LambertProjection,
    )
}

_REQUIRED = {
    "rotated_lonlat": ("north_pole",),
    "schmidt": ("stretching_factor",),
    "rotated_schmidt": ("stretching_factor", "north_pole"),
    "rotated_mercator": ("north_pole",),
    "lambert": ("standard_parallels",),
}

_DEFAULTS = {
    "mercator": {"central_meridian": 0.0, "radius": EARTH_RADIUS},
    "rotated_mercator": {"central_meridian": 0.0, "radius": EARTH_RADIUS},
    "lambert": {"central_meridian": 0.0, "radius": EARTH_RADIUS},
}


def projection_units(type_name):
    try:
        return _TYPES[type_name].units
    except KeyError:
        raise InvalidSpec(f"unknown projection type {type_name!r}") from None


def make_projection(spec=None):
    """Build a projection from a spec mapping (``None`` means lonlat).

    >>> make_projection({"type": "mercator"}).units
    'meters'
    """
    if spec is None:
        spec = {"type": "lonlat"}
    elif isinstance(spec, Projection):
        return spec
    spec = dict(spec)
    kind = spec.get("type", "lonlat")
    if kind not in _TYPES:
        raise InvalidSpec(f"unknown projection type {kind!r}")
    for key in _REQUIRED.get(kind, ()):
        if key not in spec:
            raise InvalidSpec(f"projection {kind!r} requires parameter {key!r}")
    full = {"type": kind, **_DEFAULTS.get(kind, {}), **spec}
    if "north_pole" in full:
        full["north_pole"] = [float(v) for v in full["north_pole"]]
    if kind == "lambert":
        full["standard_parallels"] = [float(v) for v in full["standard_parallels"]]
        full.setdefault("latitude_of_origin", full["standard_parallels"][0])
    for key in ("stretching_factor", "radius", "central_meridian", "latitude_of_origin"):
        if key in full:
            full[key] = float(full[key])
    return _TYPES[kind](full)
