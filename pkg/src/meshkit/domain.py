"""Domains: containment predicates in grid coordinates."""

import numpy as np

from .errors import InvalidSpec


class Domain:
    type = None
    units = "degrees"
    is_global = False
    is_periodic_x = False

    def __init__(self, spec):
        self.spec = spec

    def __repr__(self):
        return f"{type(self).__name__}({self.spec!r})"

    def __eq__(self, other):
        return isinstance(other, Domain) and self.spec == other.spec

    def __hash__(self):
        return hash(repr(sorted(self.spec.items())))

    def contains(self, x, y):
        """Closed-interval containment; works on scalars and arrays."""
        result = self._contains(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        return bool(result) if np.ndim(result) == 0 else result


class RectangularDomain(Domain):
    type = "rectangular"

    def __init__(self, spec):
        super().__init__(spec)
        self.xmin, self.xmax = spec["xmin"], spec["xmax"]
        self.ymin, self.ymax = spec["ymin"], spec["ymax"]
        self.units = spec.get("units", "degrees")

    def _contains(self, x, y):
        return (x >= self.xmin) & (x <= self.xmax) & (y >= self.ymin) & (y <= self.ymax)


class ZonalBandDomain(Domain):
    type = "zonal_band"
    is_periodic_x = True

    def __init__(self, spec):
        super().__init__(spec)
        self.ymin, self.ymax = spec["ymin"], spec["ymax"]
        self.is_global = self.ymin <= -90.0 and self.ymax >= 90.0

    def _contains(self, x, y):
        return (y >= self.ymin) & (y <= self.ymax) & np.isfinite(x)


class GlobalDomain(Domain):
    type = "global"
    is_global = True
    is_periodic_x = True

    def _contains(self, x, y):
        return np.ones(np.broadcast(x, y).shape, dtype=bool)


def make_domain(spec=None):
    """Build a domain from a spec mapping; ``None`` means global."""
    if spec is None:
        return GlobalDomain({"type": "global"})
    if isinstance(spec, Domain):
        return spec
    spec = dict(spec)
    kind = spec.get("type")
    try:
        if kind == "global":
            return GlobalDomain({"type": "global"})
        if kind == "zonal_band":
            ymin, ymax = float(spec["ymin"]), float(spec["ymax"])
            if ymin > ymax:
                raise InvalidSpec(f"zonal_band ymin {ymin} > ymax {ymax}")
            return ZonalBandDomain({"type": kind, "ymin": ymin, "ymax": ymax})
        if kind == "rectangular":
            vals = {k: float(spec[k]) for k in ("xmin", "xmax", "ymin", "ymax")}
            if vals["xmin"] > vals["xmax"]:
                raise InvalidSpec(f"rectangular xmin {vals['xmin']} > xmax {vals['xmax']}")
            if vals["ymin"] > vals["ymax"]:
                raise InvalidSpec(f"rectangular ymin {vals['ymin']} > ymax {vals['ymax']}")
            full = {"type": kind, **vals}
            if "units" in spec:
                full["units"] = str(spec["units"])
            return RectangularDomain(full)
    except KeyError as exc:
        raise InvalidSpec(f"domain {kind!r} missing {exc.args[0]!r}") from None
    raise InvalidSpec(f"unknown domain type {kind!r}")
