"""Walker constellations, topology snapshots and link latency models.

Orbits are two-body circular orbits around a spherical Earth. Satellite
positions come out of :func:`propagate` in an Earth-centred inertial frame;
snapshots store everything in the Earth-fixed frame at the interval midpoint
so that dish sites can be used as-is.
"""
from __future__ import annotations

import csv
import heapq
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

EARTH_RADIUS_KM = 6371.0
MU_EARTH = 398600.4418  # km^3/s^2
SPEED_OF_LIGHT_KM_S = 299792.458
EARTH_ROTATION_RAD_S = 7.2921159e-5
SECONDS_PER_YEAR = 365.25 * 86400.0
OBLIQUITY_RAD = math.radians(23.44)

SatelliteId = int
DishId = int


class NoRoute(Exception):
    """Source and destination satellites are not connected by ISLs."""


class SaturatedLink(ValueError):
    """A link load fraction of 1 or more has unbounded queuing delay."""


@dataclass(frozen=True)
class GeoPoint:
    latitude: float
    longitude: float
    altitude: float = 0.0

    def __post_init__(self):
        if not -90.0 <= self.latitude <= 90.0:
            raise ValueError(f"latitude out of range: {self.latitude}")
        if not -180.0 <= self.longitude < 180.0:
            raise ValueError(f"longitude out of range: {self.longitude}")
        if self.altitude < 0:
            raise ValueError(f"altitude must be >= 0: {self.altitude}")

    def ecef(self) -> np.ndarray:
        lat = math.radians(self.latitude)
        lon = math.radians(self.longitude)
        r = EARTH_RADIUS_KM + self.altitude
        return np.array([r * math.cos(lat) * math.cos(lon),
                         r * math.cos(lat) * math.sin(lon),
                         r * math.sin(lat)])


@dataclass(frozen=True)
class ConstellationConfig:
    num_orbits: int
    sats_per_orbit: int
    altitude: float
    inclination: float
    phasing_offset: float = 0.0
    min_elevation: float = 25.0

    def __post_init__(self):
        if self.num_orbits < 1 or self.sats_per_orbit < 1:
            raise ValueError("num_orbits and sats_per_orbit must be >= 1")
        if not 0.0 < self.inclination <= 180.0:
            raise ValueError(f"inclination must be in (0, 180]: {self.inclination}")
        if not 0.0 <= self.min_elevation < 90.0:
            raise ValueError(f"min_elevation must be in [0, 90): {self.min_elevation}")
        if self.altitude <= 0:
            raise ValueError("altitude must be positive")

    @property
    def size(self) -> int:
        return self.num_orbits * self.sats_per_orbit

    @property
    def semi_major_axis(self) -> float:
        return EARTH_RADIUS_KM + self.altitude


def _walker_phase(f: int, planes: int, per_plane: int) -> float:
    return f * 360.0 / (planes * per_plane)


# Shell parameters are public filings; they are configuration, not ground truth.
PRESETS: dict[str, ConstellationConfig] = {
    "telesat": ConstellationConfig(6, 12, 1015.0, 99.5, _walker_phase(1, 6, 12), 10.0),
    "oneweb": ConstellationConfig(18, 36, 1200.0, 87.9, _walker_phase(1, 18, 36), 10.0),
    "kuiper": ConstellationConfig(28, 28, 590.0, 33.0, _walker_phase(1, 28, 28), 35.0),
    "starlink": ConstellationConfig(72, 22, 550.0, 53.0, _walker_phase(39, 72, 22), 25.0),
    "2xstarlink": ConstellationConfig(144, 22, 550.0, 53.0, _walker_phase(39, 144, 22), 25.0),
}


def preset(name: str) -> ConstellationConfig:
    try:
        return PRESETS[name.lower()]
    except KeyError:
        raise KeyError(f"unknown constellation preset {name!r}; "
                       f"choose from {sorted(PRESETS)}") from None


@dataclass(frozen=True)
class OrbitState:
    """Circular-orbit elements of one satellite at the epoch."""
    sat_id: SatelliteId
    plane: int
    slot: int
    raan: float  # rad
    inclination: float  # rad
    arg_latitude: float  # rad, at epoch
    semi_major_axis: float  # km
    epoch: float  # s

    @property
    def mean_motion(self) -> float:
        return math.sqrt(MU_EARTH / self.semi_major_axis ** 3)

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.mean_motion


@dataclass(frozen=True)
class DishSite:
    id: DishId
    location: GeoPoint
    bandwidth: float  # Mb/s
    true_failure_rate: float = 0.0
    kind: str = "ground_station"

    def __post_init__(self):
        if self.bandwidth <= 0:
            raise ValueError(f"dish {self.id}: bandwidth must be positive")
        if not 0.0 <= self.true_failure_rate <= 1.0:
            raise ValueError(f"dish {self.id}: failure rate must be in [0, 1]")
        if self.kind not in ("ground_station", "base_station"):
            raise ValueError(f"dish {self.id}: unknown kind {self.kind!r}")


@dataclass(frozen=True)
class LatencyParams:
    packet_size_mb: float = 0.012  # one 1500-byte packet
    isl_rate_mbps: float = 10000.0
    queue_base_ms: float = 2.0
    terrestrial_speed_km_s: float = SPEED_OF_LIGHT_KM_S * 2.0 / 3.0
    terrestrial_overhead_ms: float = 5.0


@dataclass(frozen=True)
class RoutePath:
    sats: tuple[SatelliteId, ...]
    hop_latencies: tuple[float, ...] = ()

    def __post_init__(self):
        if not self.sats:
            raise ValueError("empty path")
        if len(self.hop_latencies) != len(self.sats) - 1:
            raise ValueError("need one latency per hop")
        if len(set(self.sats)) != len(self.sats):
            raise ValueError("path repeats a satellite")

    def __len__(self) -> int:
        return len(self.sats)

    @property
    def latency(self) -> float:
        return float(sum(self.hop_latencies))

    def prefix(self, n: int) -> "RoutePath":
        """First ``n`` satellites of the path."""
        if not 1 <= n <= len(self.sats):
            raise ValueError(f"prefix length {n} outside 1..{len(self.sats)}")
        return RoutePath(self.sats[:n], self.hop_latencies[:n - 1])

    def prefix_to(self, sat: SatelliteId) -> "RoutePath":
        return self.prefix(self.sats.index(sat) + 1)

    def is_strict_prefix_of(self, other: "RoutePath") -> bool:
        n = len(self.sats)
        return n < len(other.sats) and other.sats[:n] == self.sats


@dataclass(frozen=True)
class TopologySnapshot:
    interval_index: int
    sat_positions: Mapping[SatelliteId, np.ndarray]
    isl_edges: frozenset  # (a, b, latency_ms) with a < b
    visibility: Mapping[SatelliteId, frozenset]
    sun_direction: np.ndarray
    time: float = 0.0  # midpoint, s
    elevations: Mapping[tuple[SatelliteId, DishId], float] = field(default_factory=dict)
    _adjacency: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        adj: dict[SatelliteId, dict[SatelliteId, float]] = {s: {} for s in self.sat_positions}
        for a, b, lat in self.isl_edges:
            adj[a][b] = lat
            adj[b][a] = lat
        object.__setattr__(self, "_adjacency", adj)

    def neighbors(self, sat: SatelliteId) -> Mapping[SatelliteId, float]:
        return self._adjacency[sat]

    def edge_latency(self, a: SatelliteId, b: SatelliteId) -> float:
        return self._adjacency[a][b]

    def visible(self, sat: SatelliteId) -> frozenset:
        return self.visibility.get(sat, frozenset())


def generate_walker(config: ConstellationConfig, epoch: float = 0.0) -> list[OrbitState]:
    """Walker-delta shell: planes evenly spread over 360 deg of RAAN."""
    a = config.semi_major_axis
    inc = math.radians(config.inclination)
    states = []
    for p in range(config.num_orbits):
        raan = 2.0 * math.pi * p / config.num_orbits
        for s in range(config.sats_per_orbit):
            u = 2.0 * math.pi * s / config.sats_per_orbit + math.radians(config.phasing_offset) * p
            states.append(OrbitState(
                sat_id=p * config.sats_per_orbit + s, plane=p, slot=s, raan=raan,
                inclination=inc, arg_latitude=math.fmod(u, 2.0 * math.pi),
                semi_major_axis=a, epoch=epoch))
    return states


def _propagate_array(states: Sequence[OrbitState], t: float) -> np.ndarray:
    raan = np.array([s.raan for s in states])
    inc = np.array([s.inclination for s in states])
    a = np.array([s.semi_major_axis for s in states])
    dt = np.array([t - s.epoch for s in states])
    u = np.array([s.arg_latitude for s in states]) + np.sqrt(MU_EARTH / a ** 3) * dt
    cu, su = np.cos(u), np.sin(u)
    co, so = np.cos(raan), np.sin(raan)
    ci, si = np.cos(inc), np.sin(inc)
    return a[:, None] * np.stack([co * cu - so * su * ci,
                                  so * cu + co * su * ci,
                                  su * si], axis=1)


def propagate(states: Sequence[OrbitState], t: float) -> dict[SatelliteId, np.ndarray]:
    """Inertial positions (km) of every satellite at time ``t``."""
    for s in states:
        if t < s.epoch:
            raise ValueError(f"t={t} precedes epoch {s.epoch} of satellite {s.sat_id}")
    pos = _propagate_array(states, t)
    return {s.sat_id: pos[i] for i, s in enumerate(states)}


def inertial_to_fixed(vec: np.ndarray, t: float) -> np.ndarray:
    """Rotate inertial vectors into the Earth-fixed frame (GMST = 0 at t = 0)."""
    th = EARTH_ROTATION_RAD_S * t
    c, s = math.cos(th), math.sin(th)
    rot = np.array([[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]])
    return vec @ rot.T


def sun_direction(t: float) -> np.ndarray:
    """Inertial unit vector towards the Sun, advancing 360 deg per year."""
    lam = 2.0 * math.pi * t / SECONDS_PER_YEAR
    return np.array([math.cos(lam),
                     math.sin(lam) * math.cos(OBLIQUITY_RAD),
                     math.sin(lam) * math.sin(OBLIQUITY_RAD)])


def elevation_deg(sat_position, site_position) -> float:
    site = np.asarray(site_position, dtype=float)
    rel = np.asarray(sat_position, dtype=float) - site
    up = site / np.linalg.norm(site)
    return math.degrees(math.asin(np.clip(rel @ up / np.linalg.norm(rel), -1.0, 1.0)))


def _elevation_matrix(sat_pos: np.ndarray, site_pos: np.ndarray) -> np.ndarray:
    rel = sat_pos[:, None, :] - site_pos[None, :, :]
    up = site_pos / np.linalg.norm(site_pos, axis=1, keepdims=True)
    sin_el = np.einsum("ijk,jk->ij", rel, up) / np.linalg.norm(rel, axis=2)
    return np.degrees(np.arcsin(np.clip(sin_el, -1.0, 1.0)))


def visible_dishes(sat_position, dishes: Iterable[DishSite], min_elevation: float) -> set[DishId]:
    """Dishes that see the satellite at or above ``min_elevation`` degrees."""
    return {d.id for d in dishes
            if elevation_deg(sat_position, d.location.ecef()) >= min_elevation}


def link_latency(a_position, b_position, load_fraction: float = 0.0,
                 params: LatencyParams = LatencyParams(),
                 rate_mbps: float | None = None) -> float:
    """Propagation + transmission + queuing delay of one hop, in ms."""
    if not 0.0 <= load_fraction < 1.0:
        raise SaturatedLink(f"load fraction {load_fraction} is not in [0, 1)")
    dist = float(np.linalg.norm(np.asarray(a_position, float) - np.asarray(b_position, float)))
    rate = params.isl_rate_mbps if rate_mbps is None else rate_mbps
    propagation = dist / SPEED_OF_LIGHT_KM_S * 1e3
    transmission = params.packet_size_mb / rate * 1e3
    queuing = params.queue_base_ms * load_fraction / (1.0 - load_fraction)
    return propagation + transmission + queuing


def gsl_latency(sat_position, dish: DishSite, params: LatencyParams = LatencyParams()) -> float:
    """Offloading hop from a satellite down to a dish (no queue at the dish)."""
    return link_latency(sat_position, dish.location.ecef(), 0.0, params, rate_mbps=dish.bandwidth)


def great_circle_km(a: GeoPoint, b: GeoPoint) -> float:
    la1, la2 = math.radians(a.latitude), math.radians(b.latitude)
    dlat = la2 - la1
    dlon = math.radians(b.longitude - a.longitude)
    h = math.sin(dlat / 2) ** 2 + math.cos(la1) * math.cos(la2) * math.sin(dlon / 2) ** 2
    return 2.0 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(h)))


def terrestrial_latency(dish: DishSite, destination: GeoPoint,
                        params: LatencyParams = LatencyParams()) -> float:
    """Estimated fibre latency (ms) from a dish to a ground destination."""
    dist = great_circle_km(dish.location, destination)
    return dist / params.terrestrial_speed_km_s * 1e3 + params.terrestrial_overhead_ms


def in_eclipse(sat_position, sun_dir) -> bool:
    """Cylindrical Earth-shadow test."""
    pos = np.asarray(sat_position, dtype=float)
    sun = np.asarray(sun_dir, dtype=float)
    along = float(pos @ sun)
    if along >= 0.0:
        return False
    return float(np.linalg.norm(pos - along * sun)) < EARTH_RADIUS_KM


def isl_pairs(config: ConstellationConfig) -> list[tuple[SatelliteId, SatelliteId]]:
    """+Grid links: two intra-plane neighbours and two adjacent-plane neighbours.

    The seam between the last and first plane is linked as well.
    """
    P, S = config.num_orbits, config.sats_per_orbit
    pairs = set()
    for p in range(P):
        for s in range(S):
            a = p * S + s
            for b in (p * S + (s + 1) % S, ((p + 1) % P) * S + s):
                if a != b:
                    pairs.add((min(a, b), max(a, b)))
    return sorted(pairs)


def build_snapshot(states: Sequence[OrbitState], dishes: Sequence[DishSite], tau: int,
                   interval_length: float, config: ConstellationConfig,
                   latency: LatencyParams = LatencyParams(),
                   isl_loads: Mapping[tuple[SatelliteId, SatelliteId], float] | None = None,
                   start_time: float | None = None) -> TopologySnapshot:
    """Freeze the network for interval ``tau``.

    A dish enters C_i(tau) only if it clears the elevation mask at the start,
    midpoint and end of the interval. ISL loads default to zero.
    """
    t0 = tau * interval_length if start_time is None else start_time
    times = (t0, t0 + interval_length / 2.0, t0 + interval_length)
    ids = [s.sat_id for s in states]
    site_pos = np.array([d.location.ecef() for d in dishes]).reshape(-1, 3)

    visible = np.ones((len(ids), len(dishes)), dtype=bool)
    mid_fixed = None
    mid_elev = None
    for t in times:
        fixed = inertial_to_fixed(_propagate_array(states, t), t)
        if dishes:
            elev = _elevation_matrix(fixed, site_pos)
            visible &= elev >= config.min_elevation
        if t == times[1]:
            mid_fixed = fixed
            mid_elev = elev if dishes else None

    positions = {sid: mid_fixed[i] for i, sid in enumerate(ids)}
    index = {sid: i for i, sid in enumerate(ids)}
    edges = set()
    loads = isl_loads or {}
    for a, b in isl_pairs(config):
        if a in index and b in index:
            lat = link_latency(mid_fixed[index[a]], mid_fixed[index[b]], loads.get((a, b), 0.0), latency)
            edges.add((a, b, lat))

    vis = {}
    elevations = {}
    for i, sid in enumerate(ids):
        cols = np.nonzero(visible[i])[0]
        if len(cols):
            vis[sid] = frozenset(dishes[j].id for j in cols)
            for j in cols:
                elevations[(sid, dishes[j].id)] = float(mid_elev[i, j])
    sun = inertial_to_fixed(sun_direction(times[1]), times[1])
    return TopologySnapshot(interval_index=tau, sat_positions=positions, isl_edges=frozenset(edges),
                            visibility=vis, sun_direction=sun, time=times[1], elevations=elevations)


def original_path(snapshot: TopologySnapshot, src: SatelliteId, dst: SatelliteId) -> RoutePath:
    """Minimum-latency ISL path (Dijkstra); ties go to the smaller satellite id."""
    if src not in snapshot.sat_positions or dst not in snapshot.sat_positions:
        raise NoRoute(f"unknown satellite in ({src}, {dst})")
    if src == dst:
        return RoutePath((src,), ())
    dist = {src: 0.0}
    prev: dict[SatelliteId, SatelliteId] = {}
    heap = [(0.0, src)]
    done = set()
    while heap:
        d, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        if u == dst:
            break
        for v in sorted(snapshot.neighbors(u)):
            nd = d + snapshot.edge_latency(u, v)
            if v not in dist or nd < dist[v]:
                dist[v] = nd
                prev[v] = u
                heapq.heappush(heap, (nd, v))
    if dst not in done:
        raise NoRoute(f"satellite {dst} unreachable from {src}")
    sats = [dst]
    while sats[-1] != src:
        sats.append(prev[sats[-1]])
    sats.reverse()
    hops = tuple(snapshot.edge_latency(a, b) for a, b in zip(sats, sats[1:]))
    return RoutePath(tuple(sats), hops)


def load_dish_catalog(path) -> list[DishSite]:
    """Read ``dish_id,lat_deg,lon_deg,bandwidth_mbps,failure_rate,kind`` rows."""
    path = Path(path)
    expected = ["dish_id", "lat_deg", "lon_deg", "bandwidth_mbps", "failure_rate", "kind"]
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != expected:
            raise ValueError(f"{path}: header must be {','.join(expected)}")
        dishes = []
        for row in reader:
            dishes.append(DishSite(
                id=int(row["dish_id"]),
                location=GeoPoint(float(row["lat_deg"]), float(row["lon_deg"])),
                bandwidth=float(row["bandwidth_mbps"]),
                true_failure_rate=float(row["failure_rate"]),
                kind=row["kind"].strip()))
    if len({d.id for d in dishes}) != len(dishes):
        raise ValueError(f"{path}: duplicate dish ids")
    return dishes


def write_dish_catalog(path, dishes: Iterable[DishSite]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["dish_id", "lat_deg", "lon_deg", "bandwidth_mbps", "failure_rate", "kind"])
        for d in dishes:
            w.writerow([d.id, d.location.latitude, d.location.longitude, d.bandwidth,
                        d.true_failure_rate, d.kind])
