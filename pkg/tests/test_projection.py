import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from meshkit.errors import InvalidArgument, InvalidSpec, ProjectionDomainError
from meshkit.projection import EARTH_RADIUS, PointLonLat, PointXY, make_projection, projection_units

R = EARTH_RADIUS

DEGREE_SPECS = [
    {"type": "lonlat"},
    {"type": "rotated_lonlat", "north_pole": [-176.0, 40.0]},
    {"type": "schmidt", "stretching_factor": 2.5},
    {"type": "rotated_schmidt", "stretching_factor": 0.4, "north_pole": [10.0, 45.0]},
]
PLANAR_SPECS = [
    {"type": "mercator", "central_meridian": 20.0},
    {"type": "rotated_mercator", "north_pole": [30.0, 60.0]},
    {"type": "lambert", "standard_parallels": [33.0, 45.0], "central_meridian": -97.0},
    {"type": "lambert", "standard_parallels": [-40.0], "central_meridian": 140.0},
]


def angle_deg(lon1, lat1, lon2, lat2):
    """Great-circle separation, well conditioned for tiny angles."""
    a = np.radians([lon1, lat1])
    b = np.radians([lon2, lat2])

    def xyz(p):
        return np.stack([np.cos(p[1]) * np.cos(p[0]), np.cos(p[1]) * np.sin(p[0]), np.sin(p[1])])

    u, v = xyz(a), xyz(b)
    return np.degrees(np.arctan2(np.linalg.norm(np.cross(u, v, axis=0), axis=0), np.sum(u * v, axis=0)))


def random_lonlat(rng, n, lat_range=(-89.0, 89.0)):
    lon = rng.uniform(-180.0, 540.0, n)
    lat = np.degrees(np.arcsin(rng.uniform(*np.sin(np.radians(lat_range)), n)))
    return lon, lat


@pytest.mark.parametrize("spec", DEGREE_SPECS, ids=lambda s: s["type"])
def test_degree_round_trips(spec, rng):
    p = make_projection(spec)
    assert p.units == "degrees"
    x, y = random_lonlat(rng, 1000, (-90.0, 90.0))
    lon, lat = p.xy_to_lonlat(x, y)
    assert np.all((lon >= 0) & (lon < 360))
    x2, y2 = p.lonlat_to_xy(lon, lat)
    assert np.max(angle_deg(x, y, x2, y2)) < 1e-9
    lon3, lat3 = p.xy_to_lonlat(*p.lonlat_to_xy(x, y))
    assert np.max(angle_deg(x, y, lon3, lat3)) < 1e-9


@pytest.mark.parametrize("spec", PLANAR_SPECS, ids=lambda s: s["type"])
def test_planar_round_trips(spec, rng):
    p = make_projection(spec)
    assert p.units == "meters"
    lon, lat = random_lonlat(rng, 1000, (-80.0, 80.0))
    x, y = p.lonlat_to_xy(lon, lat)
    lon2, lat2 = p.xy_to_lonlat(x, y)
    assert np.max(angle_deg(lon, lat, lon2, lat2)) < 1e-9
    x3, y3 = p.lonlat_to_xy(lon2, lat2)
    assert np.max(np.hypot(x3 - x, y3 - y)) < 1e-6


def test_lonlat_identity():
    p = make_projection({"type": "lonlat"})
    assert p.forward(PointXY(30, 45)) == (30, 45)
    assert p.inverse(PointLonLat(100, -20)) == (100, -20)


def test_schmidt_unit_factor_is_identity(rng):
    p = make_projection({"type": "schmidt", "stretching_factor": 1})
    x, y = rng.uniform(0, 360, 1000), rng.uniform(-90, 90, 1000)
    lon, lat = p.xy_to_lonlat(x, y)
    np.testing.assert_array_equal(lon, x)
    np.testing.assert_array_equal(lat, y)
    np.testing.assert_array_equal(p.lonlat_to_xy(x, y)[1], y)


@pytest.mark.parametrize("kind", ["rotated_lonlat", "rotated_schmidt", "rotated_mercator"])
def test_unrotated_pole_is_identity(kind, rng):
    spec = {"type": kind, "north_pole": [0.0, 90.0]}
    if kind == "rotated_schmidt":
        spec["stretching_factor"] = 1.0
    p = make_projection(spec)
    plain = make_projection({"type": {"rotated_lonlat": "lonlat", "rotated_schmidt": "lonlat", "rotated_mercator": "mercator"}[kind]})
    if p.units == "degrees":
        x, y = rng.uniform(0, 360, 1000), rng.uniform(-90, 90, 1000)
    else:
        x, y = rng.uniform(-1e7, 1e7, 1000), rng.uniform(-1e7, 1e7, 1000)
    for a, b in zip(p.xy_to_lonlat(x, y), plain.xy_to_lonlat(x, y)):
        np.testing.assert_array_equal(a, b)


def test_schmidt_stretch_oracle():
    # stretching maps tan(colat/2) -> c tan(colat/2)
    c = 2.0
    p = make_projection({"type": "schmidt", "stretching_factor": c})
    y = np.array([-60.0, 0.0, 30.0, 89.0])
    _, lat = p.xy_to_lonlat(np.zeros(4), y)
    expected = 90.0 - 2.0 * np.degrees(np.arctan(c * np.tan(np.radians(90.0 - y) / 2)))
    np.testing.assert_allclose(lat, expected, atol=1e-12)
    assert p.lonlat_to_xy(0.0, lat[2])[1] == pytest.approx(30.0, abs=1e-10)


def test_mercator_analytic_inverse():
    p = make_projection({"type": "mercator", "radius": 6371229.0, "central_meridian": 0.0})
    assert p.units == "meters"
    for x in (0.0, 1e5, -2.5e6):
        lon, lat = p.forward(PointXY(x, 0.0))
        assert lat == 0.0
        assert lon == pytest.approx((x * 180.0 / (math.pi * 6371229.0)) % 360.0, abs=1e-12)


def test_mercator_poles_rejected():
    p = make_projection({"type": "mercator"})
    with pytest.raises(ProjectionDomainError):
        p.inverse(PointLonLat(0.0, 90.0))


def test_lambert_conformal_oracle():
    # tangent cone: scale factor is 1 along the standard parallel, so a
    # small step east there covers R cos(lat0) dlon of planar distance
    p = make_projection({"type": "lambert", "standard_parallels": [45.0]})
    x0, y0 = p.lonlat_to_xy(0.0, 45.0)
    x1, y1 = p.lonlat_to_xy(1e-6, 45.0)
    assert math.hypot(x1 - x0, y1 - y0) == pytest.approx(R * math.cos(math.radians(45.0)) * math.radians(1e-6), rel=1e-6)


def test_lambert_apex_rejected():
    p = make_projection({"type": "lambert", "standard_parallels": [30.0, 60.0]})
    with pytest.raises(ProjectionDomainError):
        p.forward(PointXY(0.0, p.rho0))
    with pytest.raises(ProjectionDomainError):
        p.inverse(PointLonLat(0.0, -90.0))


@pytest.mark.parametrize(
    "spec",
    [
        {"type": "bogus"},
        {"type": "schmidt"},
        {"type": "schmidt", "stretching_factor": 0.0},
        {"type": "rotated_lonlat"},
        {"type": "lambert", "standard_parallels": [30.0, -30.0]},
        {"type": "rotated_lonlat", "north_pole": [0.0, 120.0]},
    ],
)
def test_invalid_specs(spec):
    with pytest.raises(InvalidSpec):
        make_projection(spec)


def test_units_lookup():
    assert projection_units("lonlat") == "degrees"
    assert projection_units("lambert") == "meters"
    with pytest.raises(InvalidSpec):
        projection_units("polar")


def test_non_finite_rejected():
    with pytest.raises(InvalidArgument):
        make_projection().forward(PointXY(float("nan"), 0.0))


@given(
    st.floats(-720, 720, allow_nan=False),
    st.floats(-89.9, 89.9, allow_nan=False),
    st.floats(-180, 180, allow_nan=False),
    st.floats(-90, 90, allow_nan=False),
)
@settings(max_examples=200, deadline=None)
def test_rotation_preserves_angles(lon, lat, plon, plat):
    p = make_projection({"type": "rotated_lonlat", "north_pole": [plon, plat]})
    # the rotated pole maps onto the requested pole
    _, pole_lat = p.xy_to_lonlat(0.0, 90.0)
    assert pole_lat == pytest.approx(plat, abs=1e-9)
    # rotations are isometries
    a = p.xy_to_lonlat(lon, lat)
    b = p.xy_to_lonlat(lon + 1.0, lat)
    assert angle_deg(*a, *b) == pytest.approx(angle_deg(lon, lat, lon + 1.0, lat), abs=1e-9)
