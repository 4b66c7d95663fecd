import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from susco.constellation import (EARTH_RADIUS_KM, MU_EARTH, ConstellationConfig, DishSite, GeoPoint,
                                 NoRoute, SaturatedLink, TopologySnapshot, build_snapshot, elevation_deg,
                                 generate_walker, great_circle_km, in_eclipse, inertial_to_fixed,
                                 isl_pairs, link_latency, load_dish_catalog, original_path, preset,
                                 propagate, terrestrial_latency, visible_dishes, write_dish_catalog,
                                 LatencyParams)


def test_preset_sizes():
    assert len(generate_walker(preset("starlink"))) == 1584
    assert len(generate_walker(preset("telesat"))) == 72
    assert len(generate_walker(preset("kuiper"))) == 784
    with pytest.raises(KeyError):
        preset("nope")


def test_single_satellite_starts_at_phase_zero():
    (sat,) = generate_walker(ConstellationConfig(1, 1, 550.0, 53.0))
    assert sat.arg_latitude == 0.0 and sat.raan == 0.0
    pos = propagate([sat], 0.0)[0]
    np.testing.assert_allclose(pos, [EARTH_RADIUS_KM + 550.0, 0.0, 0.0])


def test_config_validation():
    with pytest.raises(ValueError):
        ConstellationConfig(0, 1, 550.0, 53.0)
    with pytest.raises(ValueError):
        ConstellationConfig(1, 1, 550.0, 0.0)
    with pytest.raises(ValueError):
        ConstellationConfig(1, 1, 550.0, 53.0, min_elevation=90.0)
    with pytest.raises(ValueError):
        GeoPoint(91.0, 0.0)
    with pytest.raises(ValueError):
        GeoPoint(0.0, 180.0)


def test_period_matches_circular_speed():
    states = generate_walker(ConstellationConfig(1, 1, 550.0, 53.0))
    a = EARTH_RADIUS_KM + 550.0
    speed = math.sqrt(MU_EARTH / a)  # circular orbital speed, km/s
    oracle = 2.0 * math.pi * a / speed
    assert states[0].period == pytest.approx(oracle, rel=1e-12)
    # a = 6928 km gives the familiar ~5739 s figure
    (sat,) = generate_walker(ConstellationConfig(1, 1, 6928.0 - EARTH_RADIUS_KM, 53.0))
    assert sat.period == pytest.approx(5739, abs=1.0)


def test_propagation_at_epoch_and_after_one_period():
    states = generate_walker(preset("telesat"), epoch=100.0)
    start = propagate(states, 100.0)
    later = propagate(states, 100.0 + states[0].period)
    for sid in start:
        assert np.linalg.norm(start[sid] - later[sid]) < 1e-6
    with pytest.raises(ValueError):
        propagate(states, 50.0)


def test_positions_stay_on_the_shell():
    cfg = preset("kuiper")
    pos = propagate(generate_walker(cfg), 1234.5)
    radii = np.array([np.linalg.norm(p) for p in pos.values()])
    np.testing.assert_allclose(radii, cfg.semi_major_axis, rtol=1e-12)


def _dish(lat, lon, i=0, bw=100.0):
    return DishSite(i, GeoPoint(lat, lon), bw)


def test_visibility_zenith_and_far_side():
    dish = _dish(10.0, 20.0)
    up = dish.location.ecef() / EARTH_RADIUS_KM
    zenith = up * (EARTH_RADIUS_KM + 550.0)
    assert elevation_deg(zenith, dish.location.ecef()) == pytest.approx(90.0)
    assert visible_dishes(zenith, [dish], 25.0) == {0}
    assert visible_dishes(-zenith, [dish], 0.0) == set()


@given(st.floats(-60, 60), st.floats(-179, 179), st.floats(0.0, 0.2), st.floats(0.0, 6.28))
def test_visibility_boundary_inclusive_and_monotone(lat, lon, off, az):
    dish = _dish(lat, lon)
    site = dish.location.ecef()
    up = site / np.linalg.norm(site)
    side = np.cross(up, [0.0, 0.0, 1.0])
    if np.linalg.norm(side) < 1e-6:
        side = np.array([1.0, 0.0, 0.0])
    side /= np.linalg.norm(side)
    sat = site + 1000.0 * up + 3000.0 * off * (math.cos(az) * side + math.sin(az) * np.cross(up, side))
    elev = elevation_deg(sat, site)
    assert visible_dishes(sat, [dish], elev) == {0}
    for lower in (elev - 1.0, elev / 2.0, 0.0):
        if lower >= 0.0:
            assert visible_dishes(sat, [dish], lower) == {0}


def test_grid_degree_and_symmetry():
    cfg = preset("starlink")
    snap = build_snapshot(generate_walker(cfg), [], 0, 60.0, cfg)
    assert all(len(snap.neighbors(s)) == 4 for s in snap.sat_positions)
    for a, b, _ in snap.isl_edges:
        assert a < b and a in snap.neighbors(b) and b in snap.neighbors(a)


def test_single_plane_has_only_intra_plane_links():
    cfg = ConstellationConfig(1, 8, 550.0, 53.0)
    pairs = isl_pairs(cfg)
    assert len(pairs) == 8
    assert all((b - a) in (1, 7) for a, b in pairs)


def test_dish_must_stay_visible_for_the_whole_interval():
    cfg = ConstellationConfig(1, 1, 550.0, 53.0, min_elevation=25.0)
    states = generate_walker(cfg)
    length = 1200.0  # long enough for the satellite to cross the sky
    mid = length / 2.0
    sub = inertial_to_fixed(propagate(states, mid)[0], mid)
    lat = math.degrees(math.asin(sub[2] / np.linalg.norm(sub)))
    lon = math.degrees(math.atan2(sub[1], sub[0]))
    dish = _dish(lat, lon)
    long_snap = build_snapshot(states, [dish], 0, length, cfg)
    assert long_snap.visible(0) == frozenset()
    short = build_snapshot(states, [dish], 0, 2.0, cfg, start_time=mid - 1.0)
    assert short.visible(0) == frozenset({0})


def _grid_snapshot(rows, cols, weights):
    ids = list(range(rows * cols))
    edges = set()
    it = iter(weights)
    for r in range(rows):
        for c in range(cols):
            a = r * cols + c
            if c + 1 < cols:
                edges.add((a, a + 1, next(it)))
            if r + 1 < rows:
                edges.add((a, a + cols, next(it)))
    pos = {i: np.zeros(3) for i in ids}
    return TopologySnapshot(0, pos, frozenset(edges), {}, np.array([1.0, 0.0, 0.0]))


def _all_simple_path_latencies(snap, src, dst):
    best = math.inf
    stack = [(src, (src,), 0.0)]
    while stack:
        node, seen, cost = stack.pop()
        if node == dst:
            best = min(best, cost)
            continue
        for nxt, lat in snap.neighbors(node).items():
            if nxt not in seen:
                stack.append((nxt, seen + (nxt,), cost + lat))
    return best


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0.1, 50.0), min_size=17, max_size=17), st.integers(0, 11), st.integers(0, 11))
def test_shortest_path_matches_exhaustive_search(weights, src, dst):
    snap = _grid_snapshot(3, 4, weights)
    path = original_path(snap, src, dst)
    assert path.sats[0] == src and path.sats[-1] == dst
    assert path.latency == pytest.approx(_all_simple_path_latencies(snap, src, dst), abs=1e-9)
    for a, b in zip(path.sats, path.sats[1:]):
        assert b in snap.neighbors(a)


def test_path_trivial_cases():
    snap = _grid_snapshot(1, 2, [7.0])
    assert original_path(snap, 0, 0).sats == (0,)
    assert original_path(snap, 0, 0).latency == 0.0
    p = original_path(snap, 0, 1)
    assert p.sats == (0, 1) and p.latency == 7.0
    lonely = TopologySnapshot(0, {0: np.zeros(3), 1: np.zeros(3)}, frozenset(), {}, np.ones(3))
    with pytest.raises(NoRoute):
        original_path(lonely, 0, 1)


def test_equal_cost_paths_break_ties_the_same_way():
    snap = _grid_snapshot(2, 2, [1.0, 1.0, 1.0, 1.0])
    assert original_path(snap, 0, 3).sats == original_path(snap, 0, 3).sats == (0, 1, 3)


def test_link_latency_components():
    a, b = np.zeros(3), np.array([1000.0, 0.0, 0.0])
    p0 = LatencyParams(packet_size_mb=0.0)
    assert link_latency(a, b, 0.0, p0) == pytest.approx(1000.0 / 299792.458 * 1e3)
    assert link_latency(a, b, 0.0, p0) == pytest.approx(3.336, abs=5e-4)
    assert link_latency(a, a, 0.0) == pytest.approx(0.012 / 10000.0 * 1e3)
    assert link_latency(a, b, 0.5, p0) - link_latency(a, b, 0.0, p0) == pytest.approx(2.0)
    with pytest.raises(SaturatedLink):
        link_latency(a, b, 1.0)


def test_eclipse_geometry():
    sun = np.array([1.0, 0.0, 0.0])
    r = EARTH_RADIUS_KM + 550.0
    assert not in_eclipse([r, 0.0, 0.0], sun)
    assert in_eclipse([-r, 0.0, 0.0], sun)
    assert not in_eclipse([-r, 7000.0, 0.0], sun)


def test_terrestrial_latency():
    dest = GeoPoint(10.0, 10.0)
    assert terrestrial_latency(_dish(10.0, 10.0), dest) == pytest.approx(5.0)
    far = terrestrial_latency(_dish(0.0, 0.0), GeoPoint(0.0, -180.0), LatencyParams(terrestrial_overhead_ms=0.0))
    assert great_circle_km(GeoPoint(0.0, 0.0), GeoPoint(0.0, -180.0)) == pytest.approx(20015.1, abs=0.1)
    assert far == pytest.approx(100.1, abs=0.05)
    p = LatencyParams(terrestrial_overhead_ms=0.0)
    one = terrestrial_latency(_dish(0.0, 0.0), GeoPoint(0.0, 10.0), p)
    two = terrestrial_latency(_dish(0.0, 0.0), GeoPoint(0.0, 20.0), p)
    assert two == pytest.approx(2.0 * one)


def test_dish_catalog_round_trip(tmp_path):
    dishes = [DishSite(3, GeoPoint(1.5, 2.5), 800.0, 0.01, "ground_station"),
              DishSite(4, GeoPoint(-1.0, 100.0), 300.0, 0.5, "base_station")]
    path = tmp_path / "d.csv"
    write_dish_catalog(path, dishes)
    assert load_dish_catalog(path) == dishes
    path.write_text("id,lat\n1,2\n")
    with pytest.raises(ValueError):
        load_dish_catalog(path)
