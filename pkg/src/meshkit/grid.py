"""Structured, reduced and unstructured grids on the sphere.

Points are enumerated parallel by parallel, north to south, west to east
within a parallel.
"""

import json
import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple

import numpy as np

from . import kernels
from .domain import make_domain
from .errors import GridNameError, InvalidArgument, InvalidSpec, UnsupportedGrid
from .projection import PointLonLat, PointXY, make_projection

GRID_TYPES = (
    "unstructured",
    "regular_gaussian",
    "classic_gaussian",
    "octahedral_gaussian",
    "regular_lonlat",
    "shifted_lonlat",
    "shifted_lon",
    "shifted_lat",
    "regular_regional",
)
LONLAT_TYPES = ("regular_lonlat", "shifted_lonlat", "shifted_lon", "shifted_lat")
GAUSSIAN_TYPES = ("regular_gaussian", "classic_gaussian", "octahedral_gaussian")

# N values for which classic reduced Gaussian tables exist; used for messages only.
CLASSIC_N = (16, 24, 32, 48, 64, 80, 96, 128, 160, 200, 256, 320, 400, 512, 576, 640, 800, 1024, 1280, 1600, 2000, 4000, 8000)

_PL_TABLES: dict[int, tuple[int, ...]] = {}


def register_pl_table(table):
    """Register classic reduced Gaussian pl arrays.

    Parameters
    ----------
    table : mapping or path
        ``{N: [pl...]}`` or the path of a JSON file holding that object.
    """
    if not isinstance(table, dict):
        with open(table, encoding="utf-8") as fh:
            table = json.load(fh)
    for key, pl in table.items():
        n = int(key)
        pl = tuple(int(v) for v in pl)
        _check_pl(pl)
        if len(pl) != 2 * n:
            raise InvalidSpec(f"pl table for N={n} has {len(pl)} entries, expected {2 * n}")
        _PL_TABLES[n] = pl


def clear_pl_tables():
    _PL_TABLES.clear()


def _check_pl(pl):
    if len(pl) == 0 or len(pl) % 2:
        raise InvalidSpec(f"pl must have even, non-zero length (got {len(pl)})")
    if any(v <= 0 for v in pl):
        raise InvalidSpec("pl entries must be > 0")


def _require_positive(n, what="N"):
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < 1:
        raise InvalidArgument(f"{what} must be a positive integer, got {n!r}")
    return int(n)


def gaussian_latitudes(N):
    """The 2N Gaussian latitudes in degrees, north to south.

    These are asin of the roots of the Legendre polynomial of degree 2N.
    The southern half mirrors the northern half exactly.

    >>> gaussian_latitudes(1).round(5)
    array([ 35.26439, -35.26439])
    """
    N = _require_positive(N)
    colat = np.asarray(kernels.legendre_colat_roots(2 * N))
    north = 90.0 - np.degrees(colat)
    return np.concatenate([north, -north[::-1]])


def octahedral_nx(N):
    """Points per parallel of the octahedral grid: 20 + 4j up to the equator."""
    N = _require_positive(N)
    half = 20 + 4 * np.arange(N, dtype=np.int64)
    return np.concatenate([half, half[::-1]])


@dataclass(frozen=True, eq=True)
class GridSpec:
    """Validated grid configuration.

    Only the fields that ``type`` needs may be set.  ``projection`` and
    ``domain`` are plain spec mappings (``None`` means the default).
    """

    type: str
    N: int | None = None
    nx: int | None = None
    ny: int | None = None
    pl: tuple | None = None
    points: tuple | None = None
    projection: dict | None = None
    domain: dict | None = None

    __hash__ = None

    def __post_init__(self):
        if self.type not in GRID_TYPES:
            raise InvalidSpec(f"unknown grid type {self.type!r}")
        for name in ("N", "nx", "ny"):
            v = getattr(self, name)
            if v is not None:
                if isinstance(v, bool) or int(v) != v or v < 1:
                    raise InvalidSpec(f"{name} must be a positive integer, got {v!r}")
                object.__setattr__(self, name, int(v))
        if self.pl is not None:
            pl = tuple(int(v) for v in self.pl)
            _check_pl(pl)
            object.__setattr__(self, "pl", pl)
        if self.points is not None:
            pts = tuple(PointXY(*p) for p in self.points)
            if not all(np.isfinite(p.x) and np.isfinite(p.y) for p in pts):
                raise InvalidSpec("points must be finite")
            object.__setattr__(self, "points", pts)
        present = {k for k in ("N", "nx", "ny", "pl", "points") if getattr(self, k) is not None}
        t = self.type
        if t in ("regular_gaussian", "octahedral_gaussian"):
            allowed = [{"N"}]
        elif t == "classic_gaussian":
            allowed = [{"N"}, {"N", "pl"}, {"pl"}]
        elif t in LONLAT_TYPES:
            allowed = [{"N"}, {"nx", "ny"}]
        elif t == "regular_regional":
            allowed = [{"nx", "ny"}]
        else:
            allowed = [{"points"}]
        if present not in allowed:
            want = " or ".join("{" + ", ".join(sorted(a)) + "}" for a in allowed)
            raise InvalidSpec(f"grid type {t!r} requires fields {want}, got {sorted(present)}")
        if t == "classic_gaussian" and self.pl is not None:
            if self.N is None:
                object.__setattr__(self, "N", len(self.pl) // 2)
            elif len(self.pl) != 2 * self.N:
                raise InvalidSpec(f"pl length {len(self.pl)} does not match N={self.N}")
        if t == "unstructured" and len(self.points) == 0:
            raise InvalidSpec("unstructured grid needs at least one point")
        if t in ("regular_lonlat", "shifted_lon") and self.ny == 1:
            raise InvalidSpec(f"{t} needs ny >= 2 to include both poles")
        # canonicalize sub-specs (raises InvalidSpec on bad input)
        object.__setattr__(self, "projection", dict(make_projection(self.projection).spec))
        object.__setattr__(self, "domain", dict(make_domain(self.domain).spec))
        if t == "regular_regional" and self.domain["type"] != "rectangular":
            raise InvalidSpec("regular_regional requires a rectangular domain")
        if t not in ("regular_regional", "unstructured") and not make_domain(self.domain).is_global:
            raise InvalidSpec(f"grid type {t!r} requires a global domain")

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        unknown = set(d) - {"type", "N", "nx", "ny", "pl", "points", "projection", "domain"}
        if unknown:
            raise InvalidSpec(f"unknown grid spec keys {sorted(unknown)}")
        if "type" not in d:
            raise InvalidSpec("grid spec needs a 'type'")
        return cls(**d)

    def to_dict(self):
        """Canonical mapping with defaults filled in."""
        out = {"type": self.type, "projection": self.projection, "domain": self.domain}
        for key in ("N", "nx", "ny"):
            if getattr(self, key) is not None:
                out[key] = getattr(self, key)
        if self.pl is not None:
            out["pl"] = list(self.pl)
        if self.points is not None:
            out["points"] = [[p.x, p.y] for p in self.points]
        return out


def canonical_json(obj):
    """Serialize with sorted keys and 17-significant-digit floats."""
    if isinstance(obj, dict):
        return "{" + ",".join(f"{json.dumps(str(k))}:{canonical_json(obj[k])}" for k in sorted(obj)) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(canonical_json(v) for v in obj) + "]"
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return "%.17g" % float(obj)
    return json.dumps(obj)


def fnv1a_64(data: bytes) -> int:
    h = 0xCBF29CE484222325
    for b in data:
        h = ((h ^ b) * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h


_NAME_RE = re.compile(r"([A-Za-z]+)(.*)")
_NUM_RE = re.compile(r"(\d+)(?:x(\d+))?")
_PREFIXES = {
    "F": "regular_gaussian",
    "N": "classic_gaussian",
    "O": "octahedral_gaussian",
    "L": "regular_lonlat",
    "S": "shifted_lonlat",
    "SLON": "shifted_lon",
    "SLAT": "shifted_lat",
}
_NAME_PREFIX = {v: k for k, v in _PREFIXES.items()}


def parse_grid_name(name):
    """Parse a grid name such as ``F16``, ``O1280`` or ``S64x32``.

    Raises
    ------
    GridNameError
        Unknown prefix or malformed number; ``token`` names the culprit.
    UnsupportedGrid
        ``N<N>`` without a registered pl table.
    """
    m = _NAME_RE.fullmatch(name)
    if m is None:
        raise GridNameError(f"cannot parse grid name {name!r}", token=name)
    prefix, rest = m.groups()
    if prefix not in _PREFIXES:
        raise GridNameError(f"unknown grid prefix {prefix!r} in {name!r}", token=prefix)
    num = _NUM_RE.fullmatch(rest)
    if num is None:
        raise GridNameError(f"malformed number {rest!r} in grid name {name!r}", token=rest or name)
    a, b = num.groups()
    kind = _PREFIXES[prefix]
    for tok in (a, b):
        if tok is not None and int(tok) == 0:
            raise GridNameError(f"grid numbers must be positive in {name!r}", token=tok)
    if b is not None:
        if kind not in LONLAT_TYPES:
            raise GridNameError(f"{prefix} grids take a single number, got {rest!r}", token=rest)
        return GridSpec(kind, nx=int(a), ny=int(b))
    n = int(a)
    if kind == "classic_gaussian":
        if n not in _PL_TABLES:
            hint = "" if n in CLASSIC_N else f"; classic grids exist for N in {list(CLASSIC_N)}"
            raise UnsupportedGrid(f"no pl table registered for {name}{hint}")
        return GridSpec(kind, N=n)
    return GridSpec(kind, N=n)


class StructuredGridData(NamedTuple):
    """Per-parallel description; point i of parallel j sits at xmin[j] + i*dx[j]."""

    y: np.ndarray
    nx: np.ndarray
    xmin: np.ndarray
    dx: np.ndarray


class GridClassification(NamedTuple):
    structured: bool
    regular: bool
    reduced: bool
    gaussian: bool
    regular_gaussian: bool
    reduced_gaussian: bool
    regular_lonlat: bool
    regular_periodic: bool
    regular_regional: bool
    unstructured: bool

    def flags(self):
        """Names of the flags that are set."""
        return [k for k, v in self._asdict().items() if v]


def _readonly(a):
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


class Grid:
    """Immutable grid.  Build through :func:`grid_from_spec` or :func:`make_grid`."""

    def __init__(self, spec: GridSpec):
        self.spec = spec
        self.projection = make_projection(spec.projection)
        self.domain = make_domain(spec.domain)
        t = spec.type
        if t == "unstructured":
            self._points = _readonly(np.array([[p.x, p.y] for p in spec.points], dtype=float))
            self._nx = None
        else:
            self._points = None
            self._nx = _readonly(self._build_nx())
            self._offsets = _readonly(np.concatenate([[0], np.cumsum(self._nx)]))

    def __repr__(self):
        return f"Grid({self.name or self.spec.type!s}, size={self.size})"

    def __eq__(self, other):
        return isinstance(other, Grid) and self.uid == other.uid

    def __hash__(self):
        return hash(self.uid)

    # -- construction helpers
    def _lonlat_params(self):
        s = self.spec
        t = s.type
        shift_x = t in ("shifted_lonlat", "shifted_lon")
        shift_y = t in ("shifted_lonlat", "shifted_lat")
        if s.N is not None:
            nx = 4 * s.N
            ny = 2 * s.N if shift_y else 2 * s.N + 1
        else:
            nx, ny = s.nx, s.ny
        return nx, ny, shift_x, shift_y

    def _build_nx(self):
        s = self.spec
        t = s.type
        if t == "regular_gaussian":
            return np.full(2 * s.N, 4 * s.N, dtype=np.int64)
        if t == "octahedral_gaussian":
            return octahedral_nx(s.N)
        if t == "classic_gaussian":
            pl = s.pl if s.pl is not None else _PL_TABLES.get(s.N)
            if pl is None:
                raise UnsupportedGrid(f"no pl table registered for classic Gaussian N={s.N}")
            return np.array(pl, dtype=np.int64)
        if t in LONLAT_TYPES:
            nx, ny, _, _ = self._lonlat_params()
            return np.full(ny, nx, dtype=np.int64)
        return np.full(s.ny, s.nx, dtype=np.int64)

    def _build_y(self):
        s = self.spec
        t = s.type
        if t in GAUSSIAN_TYPES:
            return gaussian_latitudes(len(self._nx) // 2)
        if t in LONLAT_TYPES:
            _, ny, _, shift_y = self._lonlat_params()
            if shift_y:
                dy = 180.0 / ny
                return 90.0 - dy * (np.arange(ny) + 0.5)
            dy = 180.0 / (ny - 1)
            y = 90.0 - dy * np.arange(ny)
            y[-1] = -90.0
            return y
        d = self.domain
        if s.ny == 1:
            return np.array([d.ymax], dtype=float)
        y = d.ymax - (d.ymax - d.ymin) / (s.ny - 1) * np.arange(s.ny)
        y[-1] = d.ymin
        return y

    def _build_x(self):
        s = self.spec
        ny = len(self._nx)
        if s.type == "regular_regional":
            d = self.domain
            dx = 0.0 if s.nx == 1 else (d.xmax - d.xmin) / (s.nx - 1)
            return np.full(ny, d.xmin), np.full(ny, dx)
        dx = 360.0 / self._nx
        xmin = np.zeros(ny)
        if s.type in LONLAT_TYPES and self._lonlat_params()[2]:
            xmin = 0.5 * dx
        return xmin, dx

    # -- public
    @property
    def name(self):
        """Short name for the catalogued families, else ``None``."""
        s = self.spec
        if s.projection != {"type": "lonlat"} or s.domain != {"type": "global"}:
            return None
        if s.type in _NAME_PREFIX and (s.type != "classic_gaussian" or s.pl is None):
            p = _NAME_PREFIX[s.type]
            return f"{p}{s.N}" if s.N is not None else f"{p}{s.nx}x{s.ny}"
        return None

    @property
    def type(self):
        return self.spec.type

    @property
    def structured(self):
        return self._nx is not None

    @property
    def size(self):
        return int(self._offsets[-1]) if self.structured else len(self._points)

    @property
    def ny(self):
        return len(self._nx) if self.structured else None

    @property
    def nx(self):
        return self._nx

    @cached_property
    def data(self) -> StructuredGridData | None:
        if not self.structured:
            return None
        xmin, dx = self._build_x()
        return StructuredGridData(_readonly(self._build_y()), self._nx, _readonly(xmin), _readonly(dx))

    @property
    def offsets(self):
        """Index of the first point of each parallel, plus the total size."""
        return self._offsets

    def ij(self, n):
        """(i, j) of point ``n``."""
        n = self._check_index(n)
        j = int(np.searchsorted(self._offsets, n, side="right")) - 1
        return n - int(self._offsets[j]), j

    def _check_index(self, n):
        if isinstance(n, bool) or int(n) != n:
            raise IndexError(f"grid index must be an integer, got {n!r}")
        n = int(n)
        if not 0 <= n < self.size:
            raise IndexError(f"grid index {n} out of range [0, {self.size})")
        return n

    def xy(self, n) -> PointXY:
        if not self.structured:
            n = self._check_index(n)
            return PointXY(*self._points[n])
        i, j = self.ij(n)
        d = self.data
        return PointXY(d.xmin[j] + i * d.dx[j], d.y[j])

    def lonlat(self, n) -> PointLonLat:
        return self.projection.forward(self.xy(n))

    def xy_array(self):
        """All points as an ``(size, 2)`` array in enumeration order."""
        if not self.structured:
            return self._points.copy()
        d = self.data
        j = np.repeat(np.arange(self.ny), self._nx)
        i = np.arange(self.size) - self._offsets[j]
        return np.column_stack([d.xmin[j] + i * d.dx[j], d.y[j]])

    def lonlat_array(self):
        xy = self.xy_array()
        lon, lat = self.projection.xy_to_lonlat(xy[:, 0], xy[:, 1])
        return np.column_stack([lon, lat])

    @cached_property
    def classification(self) -> GridClassification:
        return _classify(self)

    @cached_property
    def uid(self) -> str:
        return "%016x" % fnv1a_64(canonical_json(self.spec.to_dict()).encode("utf-8"))

    def to_json(self):
        return json.dumps(self.spec.to_dict(), sort_keys=True)


class StructuredView:
    """Index-based access to a structured grid."""

    def __init__(self, grid: Grid):
        self.grid = grid
        self.data = grid.data

    @property
    def ny(self):
        return len(self.data.nx)

    def nx(self, j):
        return int(self.data.nx[j])

    def y(self, j):
        return float(self.data.y[j])

    def x(self, i, j):
        if not 0 <= i < self.data.nx[j]:
            raise IndexError(f"i={i} out of range on parallel {j}")
        return float(self.data.xmin[j] + i * self.data.dx[j])

    def xy(self, i, j):
        return PointXY(self.x(i, j), self.y(j))

    def lonlat(self, i, j):
        return self.grid.projection.forward(self.xy(i, j))

    def index(self, i, j):
        if not 0 <= i < self.data.nx[j]:
            raise IndexError(f"i={i} out of range on parallel {j}")
        return int(self.grid.offsets[j]) + i


def _classify(grid: Grid) -> GridClassification:
    if not grid.structured:
        return GridClassification(False, False, False, False, False, False, False, False, False, True)
    d = grid.data
    is_global = grid.domain.is_global
    regular = bool(np.all(d.nx == d.nx[0]) and np.all(d.dx == d.dx[0]) and np.all(d.xmin == d.xmin[0]))
    reduced = not regular
    ny = len(d.nx)
    gaussian = False
    if is_global and ny % 2 == 0:
        gaussian = bool(np.max(np.abs(d.y - gaussian_latitudes(ny // 2))) < 1e-10)
    degrees = grid.projection.units == "degrees"
    periodic = bool(grid.domain.is_periodic_x and degrees and np.all(np.abs(d.nx * d.dx - 360.0) < 1e-9))
    uniform_y = ny == 1 or bool(np.ptp(np.diff(d.y)) < 1e-9)
    regular_lonlat = is_global and degrees and regular and uniform_y
    return GridClassification(
        structured=True,
        regular=regular,
        reduced=reduced,
        gaussian=gaussian,
        regular_gaussian=regular and gaussian,
        reduced_gaussian=reduced and gaussian,
        regular_lonlat=regular_lonlat,
        regular_periodic=regular and periodic,
        regular_regional=regular and not is_global and not periodic,
        unstructured=False,
    )


def grid_from_spec(spec) -> Grid:
    """Build a grid from a :class:`GridSpec`, a mapping or a JSON string."""
    if isinstance(spec, str):
        try:
            spec = json.loads(spec)
        except json.JSONDecodeError as exc:
            raise InvalidSpec(f"grid spec is not valid JSON: {exc}") from None
    if isinstance(spec, dict):
        spec = GridSpec.from_dict(spec)
    return Grid(spec)


def make_grid(name_or_spec) -> Grid:
    """Accept a grid name, a JSON spec string, a mapping, or a spec."""
    if isinstance(name_or_spec, Grid):
        return name_or_spec
    if isinstance(name_or_spec, str) and not name_or_spec.lstrip().startswith("{"):
        return Grid(parse_grid_name(name_or_spec))
    return grid_from_spec(name_or_spec)


def grid_size(grid: Grid) -> int:
    return grid.size


def grid_point(grid: Grid, n) -> PointXY:
    return grid.xy(n)


def grid_lonlat(grid: Grid, n) -> PointLonLat:
    return grid.lonlat(n)


def structured_query(grid: Grid) -> StructuredView | None:
    return StructuredView(grid) if grid.structured else None


def classify_grid(grid: Grid) -> GridClassification:
    return grid.classification


def grid_uid(grid: Grid) -> str:
    return grid.uid


__all__ = [
    "GridClassification",
    "GridSpec",
    "Grid",
    "StructuredGridData",
    "StructuredView",
    "canonical_json",
    "classify_grid",
    "gaussian_latitudes",
    "grid_from_spec",
    "grid_lonlat",
    "grid_point",
    "grid_size",
    "grid_uid",
    "make_grid",
    "octahedral_nx",
    "parse_grid_name",
    "register_pl_table",
    "structured_query",
]
