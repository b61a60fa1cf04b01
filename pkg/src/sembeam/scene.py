"""Street-scene construction: oriented cuboids, poses, and the vehicle sequence sampler."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

MATERIALS = ("metal", "concrete")

# (length, width, height) in meters; three passenger cars, a van, a bus
VEHICLE_TYPES = (
    (4.81, 2.17, 1.52),
    (4.90, 2.06, 1.48),
    (4.15, 2.00, 1.38),
    (5.20, 2.62, 2.48),
    (11.08, 3.25, 3.33),
)


class SceneGenerationError(RuntimeError):
    """Raised when a feasible vehicle placement cannot be found."""


@dataclass
class Cuboid:
    """Axis-aligned box rotated by yaw about +z. Extents are half-sizes in the local frame."""

    center: np.ndarray
    half_extents: np.ndarray
    yaw: float = 0.0
    material: str = "metal"

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float)
        self.half_extents = np.asarray(self.half_extents, dtype=float)
        if self.center.shape != (3,) or self.half_extents.shape != (3,):
            raise ValueError("center and half_extents must be 3-vectors")
        if np.any(self.half_extents <= 0):
            raise ValueError("half extents must be positive")
        if self.material not in MATERIALS:
            raise ValueError("unknown material %r" % (self.material,))

    def to_local(self, points: np.ndarray) -> np.ndarray:
        """World points (..., 3) into the box frame."""
        d = np.asarray(points, dtype=float) - self.center
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        x = c * d[..., 0] + s * d[..., 1]
        y = -s * d[..., 0] + c * d[..., 1]
        return np.stack([x, y, d[..., 2]], axis=-1)

    def to_world(self, points: np.ndarray) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        x = c * p[..., 0] - s * p[..., 1]
        y = s * p[..., 0] + c * p[..., 1]
        return np.stack([x, y, p[..., 2]], axis=-1) + self.center

    def contains(self, point: np.ndarray, margin: float = 0.0) -> bool:
        local = self.to_local(point)
        return bool(np.all(np.abs(local) <= self.half_extents + margin))

    def corners(self) -> np.ndarray:
        """The 8 corners in world coordinates, (8, 3)."""
        signs = np.array(
            [[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)], dtype=float
        )
        return self.to_world(signs * self.half_extents)


@dataclass(frozen=True)
class Area:
    """Coverage rectangle; the street runs along x in [0, length], y spans [-width/2, width/2]."""

    width: float = 48.0
    length: float = 192.0


@dataclass
class Scene:
    """One time snapshot: terminal poses plus every cuboid obstacle."""

    bs_position: np.ndarray
    bs_yaw: float
    ms_position: np.ndarray  # antenna position, above the carrier vehicle's roof
    ms_yaw: float
    vehicles: list
    ms_vehicle_index: int
    walls: list  # static cuboids: buildings and the ground slab
    area: Area
    sequence_id: int = 0
    time_index: int = 0

    def __post_init__(self):
        self.bs_position = np.asarray(self.bs_position, dtype=float)
        self.ms_position = np.asarray(self.ms_position, dtype=float)

    def all_cuboids(self) -> list:
        return list(self.vehicles) + list(self.walls)


@dataclass
class SceneSamplerConfig:
    """Street layout and traffic statistics.

    Area, terminal heights, vehicle sizes, and snapshot period are fixed
    constants of the setup; lane and building layout are free choices.
    """

    area: Area = field(default_factory=Area)
    vehicle_types: tuple = VEHICLE_TYPES
    time_step: float = 0.5  # s between snapshots
    min_vehicles: int = 4  # other vehicles besides the antenna carrier
    max_vehicles: int = 9
    speed_min: float = 6.0  # m/s
    speed_max: float = 12.0
    bs_height: float = 3.0
    bs_setback: float = 10.0  # BS stands at y = -bs_setback, facing the road
    road_half_width: float = 8.0
    n_lanes: int = 4
    building_face: float = 12.0  # inner building walls at y = +/- building_face
    building_depth: float = 8.0
    building_height: float = 15.0
    antenna_height: float = 0.1  # above the carrier's roof
    edge_margin: float = 2.0  # keep vehicle centers this far inside the area ends
    placement_retries: int = 50

    def __post_init__(self):
        if not 0 < self.n_lanes:
            raise ValueError("need at least one lane")
        if self.speed_min <= 0 or self.speed_max < self.speed_min:
            raise ValueError("bad speed range")
        if self.min_vehicles < 0 or self.max_vehicles < self.min_vehicles:
            raise ValueError("bad vehicle count range")
        if self.time_step <= 0:
            raise ValueError("time step must be positive")

    def lane_centers(self) -> np.ndarray:
        lane_width = 2.0 * self.road_half_width / self.n_lanes
        return -self.road_half_width + lane_width * (np.arange(self.n_lanes) + 0.5)

    def lane_direction(self, lane: int) -> float:
        # right-hand traffic: lanes below the centerline head +x
        return 1.0 if self.lane_centers()[lane] < 0 else -1.0

    def bs_position(self) -> np.ndarray:
        return np.array([self.area.length / 2.0, -self.bs_setback, self.bs_height])

    def bs_yaw(self) -> float:
        return math.pi / 2  # boresight across the street

    def static_walls(self) -> list:
        a = self.area
        ground = Cuboid(
            center=[a.length / 2.0, 0.0, -0.5],
            half_extents=[a.length / 2.0 + 5.0, a.width / 2.0 + 5.0, 0.5],
            material="concrete",
        )
        wall_y = self.building_face + self.building_depth / 2.0
        south = Cuboid(
            center=[a.length / 2.0, -wall_y, self.building_height / 2.0],
            half_extents=[a.length / 2.0, self.building_depth / 2.0, self.building_height / 2.0],
            material="concrete",
        )
        north = Cuboid(
            center=[a.length / 2.0, wall_y, self.building_height / 2.0],
            half_extents=[a.length / 2.0, self.building_depth / 2.0, self.building_height / 2.0],
            material="concrete",
        )
        return [ground, south, north]


@dataclass
class _MovingVehicle:
    type_index: int
    lane: int
    x0: float
    speed: float  # signed, m/s

    def x_at(self, cfg: SceneSamplerConfig, t: int) -> float:
        return self.x0 + self.speed * cfg.time_step * t


def _sequence_rng(seed: int, sequence_id: int) -> np.random.Generator:
    # counter-based stream per (seed, sequence) so sequences can be produced in any order
    key = np.array([seed & 0xFFFFFFFFFFFFFFFF, sequence_id & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _vehicle_cuboid(cfg: SceneSamplerConfig, v: _MovingVehicle, t: int) -> Cuboid:
    length, width, height = cfg.vehicle_types[v.type_index]
    x = v.x_at(cfg, t)
    y = cfg.lane_centers()[v.lane]
    yaw = 0.0 if v.speed >= 0 else math.pi
    return Cuboid(center=[x, y, height / 2.0], half_extents=[length / 2.0, width / 2.0, height / 2.0], yaw=yaw, material="metal")


def sample_sequence(cfg: SceneSamplerConfig, length: int, seed: int, sequence_id: int = 0) -> list:
    """Sample one vehicle-motion sequence and return its `length` scene snapshots.

    The antenna carrier stays inside the area for every snapshot; other traffic
    may enter or leave. Raises SceneGenerationError when no feasible placement
    exists within the configured retry budget.
    """
    if length < 1:
        raise ValueError("sequence length must be >= 1")
    rng = _sequence_rng(seed, sequence_id)
    lanes = cfg.lane_centers()
    walls = cfg.static_walls()
    bs_pos, bs_yaw = cfg.bs_position(), cfg.bs_yaw()

    ms_type = int(rng.integers(len(cfg.vehicle_types)))
    ms_lane = int(rng.integers(cfg.n_lanes))
    ms_speed = float(rng.uniform(cfg.speed_min, cfg.speed_max)) * cfg.lane_direction(ms_lane)
    ms_len = cfg.vehicle_types[ms_type][0]

    margin = ms_len / 2.0 + cfg.edge_margin
    travel = abs(ms_speed) * cfg.time_step * (length - 1)
    lo, hi = margin, cfg.area.length - margin - travel
    if hi < lo:
        raise SceneGenerationError(
            "sequence of %d steps at %.1f m/s does not fit a %.0f m area" % (length, abs(ms_speed), cfg.area.length)
        )
    start = float(rng.uniform(lo, hi))
    ms_x0 = start if ms_speed >= 0 else cfg.area.length - start
    ms_vehicle = _MovingVehicle(ms_type, ms_lane, ms_x0, ms_speed)

    others = []
    n_others = int(rng.integers(cfg.min_vehicles, cfg.max_vehicles + 1))
    for _ in range(n_others):
        placed = False
        for _ in range(cfg.placement_retries):
            ti = int(rng.integers(len(cfg.vehicle_types)))
            lane = int(rng.integers(cfg.n_lanes))
            speed = float(rng.uniform(cfg.speed_min, cfg.speed_max)) * cfg.lane_direction(lane)
            vlen = cfg.vehicle_types[ti][0]
            x0 = float(rng.uniform(vlen / 2.0 + cfg.edge_margin, cfg.area.length - vlen / 2.0 - cfg.edge_margin))
            candidate = _MovingVehicle(ti, lane, x0, speed)
            clear = True
            for other in [ms_vehicle] + others:
                if other.lane != lane:
                    continue
                gap = (vlen + cfg.vehicle_types[other.type_index][0]) / 2.0 + 2.0
                if abs(other.x0 - x0) < gap:
                    clear = False
                    break
            if clear:
                others.append(candidate)
                placed = True
                break
        if not placed:
            raise SceneGenerationError("could not place vehicle %d after %d retries" % (len(others), cfg.placement_retries))

    scenes = []
    all_vehicles = [ms_vehicle] + others
    ms_height = cfg.vehicle_types[ms_type][2]
    for t in range(length):
        cuboids = [_vehicle_cuboid(cfg, v, t) for v in all_vehicles]
        ms_cub = cuboids[0]
        antenna = np.array([ms_cub.center[0], ms_cub.center[1], ms_height + cfg.antenna_height])
        scenes.append(
            Scene(
                bs_position=bs_pos,
                bs_yaw=bs_yaw,
                ms_position=antenna,
                ms_yaw=ms_cub.yaw,
                vehicles=cuboids,
                ms_vehicle_index=0,
                walls=walls,
                area=cfg.area,
                sequence_id=sequence_id,
                time_index=t,
            )
        )
    return scenes
