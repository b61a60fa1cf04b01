"""Camera-plane semantic maps of dominant propagation scatterers.

Multipath components that survive a relative power cut are reduced to
point scatterers (the last bounce point, or the base station itself for
the direct path), projected through a ring of roof-mounted cameras via
their arrival angles, and rendered as per-camera two-channel heatmaps:
a detection channel with unit peaks and a strength channel scaled by
relative path power.  The inverse decode, a controllable corruption
model, and a depth-shaded silhouette renderer used as a stand-in camera
feed live here as well.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .channel import relative_powers

DEFAULT_POWER_THRESHOLD_DB = -10.0
DEFAULT_DETECTION_THRESHOLD = 0.3
DEFAULT_MATCH_TOLERANCE = 3.0  # heatmap px


def _wrap_angle(angle):
    wrapped = math.fmod(angle + math.pi, 2.0 * math.pi)
    if wrapped <= 0.0:
        wrapped += 2.0 * math.pi
    return wrapped - math.pi


def _default_ring(count):
    return tuple(_wrap_angle(2.0 * math.pi * k / count) for k in range(count))


@dataclass(frozen=True)
class CameraConfig:
    """Ring of identical cameras fixed to the receiver roof.

    Camera azimuths are in the vehicle frame (camera k of the default
    ring points along vehicle yaw plus ``k * 2pi / count``); elevations
    are zenith-referenced, pi/2 meaning horizontal.  Image rows run top
    to bottom (x), columns left to right (y); heatmaps are produced at
    ``1 / downsample`` of image resolution.
    """

    count: int = 4
    azimuths: tuple = None  # vehicle frame, rad
    elevations: tuple = None  # zenith-referenced, rad
    half_fov: float = math.pi / 4
    image_height: int = 192
    image_width: int = 512
    downsample: int = 4
    sigma: float = 1.5  # heatmap px

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("need at least one camera")
        if self.azimuths is None:
            object.__setattr__(self, "azimuths", _default_ring(self.count))
        if self.elevations is None:
            object.__setattr__(self, "elevations", (math.pi / 2,) * self.count)
        if len(self.azimuths) != self.count or len(self.elevations) != self.count:
            raise ValueError("need one azimuth and elevation per camera")
        if not 0.0 < self.half_fov < math.pi / 2:
            raise ValueError("half_fov must lie in (0, pi/2)")
        if self.image_height % self.downsample or self.image_width % self.downsample:
            raise ValueError("image size must be divisible by downsample")

    @property
    def focal_length(self):
        # px per unit tangent; square pixels, set by the horizontal FOV
        return self.image_width / (2.0 * math.tan(self.half_fov))

    @property
    def heatmap_height(self):
        return self.image_height // self.downsample

    @property
    def heatmap_width(self):
        return self.image_width // self.downsample


@dataclass(frozen=True)
class ScattererPoint:
    """World-frame proxy for one surviving path: where its energy last came from."""

    position: np.ndarray  # world frame, m
    relative_power: float  # linear, in (0, 1]
    is_los: bool
    path_index: int  # index into the traced path list


@dataclass(frozen=True)
class EffectiveScatterer:
    """One scatterer as seen by one camera.

    ``image_point`` is continuous (row, col) in image pixels,
    ``heatmap_point`` its integer floor-division by the downsample
    factor.
    """

    camera_index: int
    image_point: tuple
    heatmap_point: tuple
    relative_power: float
    source_path: int


@dataclass
class SemanticHeatmap:
    """Per-camera detection (D) and strength (S) maps, clamped to [0, 1]."""

    distribution: np.ndarray  # (count, height, width)
    strength: np.ndarray

    def __post_init__(self):
        self.distribution = np.clip(np.asarray(self.distribution, dtype=float),
                                    0.0, 1.0)
        self.strength = np.clip(np.asarray(self.strength, dtype=float), 0.0, 1.0)
        if self.distribution.shape != self.strength.shape:
            raise ValueError("channel shape mismatch")
        if self.distribution.ndim != 3:
            raise ValueError("expected (cameras, height, width) arrays")

    @property
    def count(self):
        return self.distribution.shape[0]

    def stacked(self):
        """Single (2 * count, height, width) array: D channels then S channels."""
        return np.concatenate([self.distribution, self.strength], axis=0)

    def copy(self):
        return SemanticHeatmap(self.distribution.copy(), self.strength.copy())


def extract_effective_scatterers(paths, scene, threshold_db=DEFAULT_POWER_THRESHOLD_DB):
    """Keep paths within ``threshold_db`` of the strongest and map each to a point.

    Reflected paths contribute their last bounce point; the direct path
    contributes the base station position.  Powers are normalized to the
    strongest path before thresholding, so the strongest path always
    survives.
    """
    if not paths:
        return []
    rel = relative_powers(paths)
    out = []
    for index, (path, power) in enumerate(zip(paths, rel)):
        if 10.0 * math.log10(power) < threshold_db:
            continue
        point = scene.bs_position if path.is_los else path.last_hop_point
        out.append(ScattererPoint(
            position=np.asarray(point, dtype=float).copy(),
            relative_power=float(power),
            is_los=bool(path.is_los),
            path_index=index,
        ))
    return out


def mean_effective_scatterers(projection_lists, n_cameras=4):
    """Average in-view scatterers per camera view over a set of samples."""
    if not projection_lists:
        raise ValueError("no samples")
    total = sum(len(group) for group in projection_lists)
    return total / (len(projection_lists) * n_cameras)


def project_to_camera(elevation, azimuth, camera_index, config):
    """Map an arrival direction into one camera, or None when out of view.

    Angles are zenith-referenced elevation and vehicle-frame azimuth.
    Returns continuous ``(x, y)`` with x the row coordinate and y the
    column; visibility requires the azimuth offset strictly inside the
    half FOV and the row inside ``[0, image_height)`` (the column bound
    follows from the azimuth test).
    """
    phi = _wrap_angle(azimuth - config.azimuths[camera_index])
    if abs(phi) >= config.half_fov:
        return None
    theta = elevation - config.elevations[camera_index]
    focal = config.focal_length
    x = focal * math.tan(theta) / math.cos(phi) + config.image_height / 2.0
    if not 0.0 <= x < config.image_height:
        return None
    y = focal * math.tan(phi) + config.image_width / 2.0
    return x, y


def project_scatterers(scatterers, scene, config):
    """Project world-frame scatterers into every camera that sees them.

    Returns one EffectiveScatterer per (scatterer, camera) visibility;
    a scatterer sitting on a camera's vertical axis is never visible.
    """
    out = []
    scale = float(config.downsample)
    for scatterer in scatterers:
        d = scatterer.position - scene.ms_position
        r = math.sqrt(float(d @ d))
        if r < 1e-12:
            continue
        elevation = math.acos(max(-1.0, min(1.0, d[2] / r)))
        azimuth = _wrap_angle(math.atan2(d[1], d[0]) - scene.ms_yaw)
        for cam in range(config.count):
            point = project_to_camera(elevation, azimuth, cam, config)
            if point is None:
                continue
            out.append(EffectiveScatterer(
                camera_index=cam,
                image_point=point,
                heatmap_point=(int(point[0] // scale), int(point[1] // scale)),
                relative_power=scatterer.relative_power,
                source_path=scatterer.path_index,
            ))
    return out


def _splat(dist, strength, row, col, power, sigma, row_grid, col_grid):
    # max-combine keeps every peak at its own height
    kernel = np.exp(-((row_grid - row) ** 2 + (col_grid - col) ** 2)
                    / (2.0 * sigma * sigma))
    np.maximum(dist, kernel, out=dist)
    np.maximum(strength, power * kernel, out=strength)


def _grids(height, width):
    return np.meshgrid(np.arange(height, dtype=float),
                       np.arange(width, dtype=float), indexing="ij")


def rasterize_heatmaps(scatterers, config):
    """Render projected scatterers into per-camera heatmaps.

    The detection channel carries a peak of exactly 1 at each
    scatterer's heatmap pixel, the strength channel the same kernel
    scaled by relative power; overlaps combine by elementwise maximum.
    """
    height, width = config.heatmap_height, config.heatmap_width
    dist = np.zeros((config.count, height, width))
    strength = np.zeros((config.count, height, width))
    row_grid, col_grid = _grids(height, width)
    for scatterer in scatterers:
        row, col = scatterer.heatmap_point
        _splat(dist[scatterer.camera_index], strength[scatterer.camera_index],
               row, col, scatterer.relative_power, config.sigma,
               row_grid, col_grid)
    return SemanticHeatmap(dist, strength)


def decode_heatmaps(hm, threshold=DEFAULT_DETECTION_THRESHOLD):
    """Recover scatterer detections by strict 3x3 local maxima.

    A cell is a detection when its D value meets ``threshold`` and
    beats its neighborhood; exact ties go to the lower (row, col) cell.
    Returns ``(camera, row, col, score)`` tuples in scan order.
    """
    height, width = hm.distribution.shape[1], hm.distribution.shape[2]
    detections = []
    for cam in range(hm.count):
        dist = hm.distribution[cam]
        padded = np.full((height + 2, width + 2), -np.inf)
        padded[1:-1, 1:-1] = dist
        center = padded[1:-1, 1:-1]
        keep = center >= threshold
        # strict against earlier cells, non-strict against later ones
        for dr, dc in ((-1, -1), (-1, 0), (-1, 1), (0, -1)):
            keep &= center > padded[1 + dr:height + 1 + dr, 1 + dc:width + 1 + dc]
        for dr, dc in ((0, 1), (1, -1), (1, 0), (1, 1)):
            keep &= center >= padded[1 + dr:height + 1 + dr, 1 + dc:width + 1 + dc]
        for row, col in np.argwhere(keep):
            detections.append((cam, int(row), int(col), float(dist[row, col])))
    return detections


def _as_match_point(item):
    if isinstance(item, EffectiveScatterer):
        return (item.camera_index, item.heatmap_point[0], item.heatmap_point[1],
                item.relative_power)
    return item


def precision_recall(detections, ground_truth, tolerance=DEFAULT_MATCH_TOLERANCE):
    """Greedy one-to-one matching of detections against ground truth.

    Detections are consumed in descending score order and each may
    claim the nearest unclaimed truth point in the same camera within
    ``tolerance`` heatmap px.  Empty detections score precision 1 only
    when there was nothing to find; empty ground truth scores recall 1.
    """
    detections = [_as_match_point(d) for d in detections]
    ground_truth = [_as_match_point(g) for g in ground_truth]
    if not detections:
        return (1.0 if not ground_truth else 0.0,
                1.0 if not ground_truth else 0.0)
    if not ground_truth:
        return 0.0, 1.0

    def sort_key(item):
        score = item[3] if len(item) > 3 else 0.0
        return (-score, item[0], item[1], item[2])

    matched = 0
    used = set()
    for pred in sorted(detections, key=sort_key):
        candidates = []
        for j, ref in enumerate(ground_truth):
            if j in used or ref[0] != pred[0]:
                continue
            dist = math.hypot(pred[1] - ref[1], pred[2] - ref[2])
            if dist <= tolerance:
                candidates.append((dist, j))
        if candidates:
            _, j = min(candidates)
            used.add(j)
            matched += 1
    return matched / len(detections), matched / len(ground_truth)


def corrupt_heatmaps(hm, noise, rng, config=None, drop_prob=None):
    """Degrade heatmaps by dropping, displacing, and rescaling peaks.

    Peaks are decoded, each dropped with probability
    ``min(1, 0.05 * noise)`` (or ``drop_prob`` when given), the
    survivors jittered by a normal of std ``noise`` heatmap px per axis
    and their strengths rescaled by ``1 + N(0, 0.05 * noise)``, then
    re-rendered.  ``noise = 0`` with no drop override returns an exact
    copy.
    """
    if noise < 0.0:
        raise ValueError("noise must be non-negative")
    if noise == 0.0 and drop_prob is None:
        return hm.copy()
    if config is None:
        config = CameraConfig(count=hm.count)
    p_drop = min(1.0, 0.05 * noise) if drop_prob is None else drop_prob
    height, width = hm.distribution.shape[1], hm.distribution.shape[2]
    dist = np.zeros_like(hm.distribution)
    strength = np.zeros_like(hm.strength)
    row_grid, col_grid = _grids(height, width)
    for cam, row, col, _ in decode_heatmaps(hm):
        if rng.uniform() < p_drop:
            continue
        r0 = int(np.clip(round(row + rng.normal(0.0, noise)), 0, height - 1))
        c0 = int(np.clip(round(col + rng.normal(0.0, noise)), 0, width - 1))
        power = float(np.clip(hm.strength[cam, row, col]
                              * (1.0 + rng.normal(0.0, 0.05 * noise)), 0.0, 1.0))
        _splat(dist[cam], strength[cam], r0, c0, power, config.sigma,
               row_grid, col_grid)
    return SemanticHeatmap(dist, strength)


def _convex_hull(points):
    # monotone chain; returns ccw hull or None when degenerate
    pts = sorted({(float(p[0]), float(p[1])) for p in points})
    if len(pts) < 3:
        return None

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower = []
    for p in pts:
        while len(lower) > 1 and cross(lower[-2], lower[-1], p) <= 0.0:
            lower.pop()
        lower.append(p)
    upper = []
    for p in reversed(pts):
        while len(upper) > 1 and cross(upper[-2], upper[-1], p) <= 0.0:
            upper.pop()
        upper.append(p)
    hull = lower[:-1] + upper[:-1]
    if len(hull) < 3:
        return None
    return hull


def rasterize_pseudo_image(scene, config):
    """Depth-shaded convex silhouettes of scene cuboids, one map per camera.

    Stands in for a camera feed when training the image front end.
    Each cuboid in front of a camera is drawn as the convex hull of its
    projected corners at heatmap resolution, filled with intensity
    ``1 / (1 + dist / 10)`` to the cuboid center, max-combined over
    cuboids.  The receiver's own vehicle and the ground slab are
    skipped.
    """
    height, width = config.heatmap_height, config.heatmap_width
    image = np.zeros((config.count, height, width))
    row_grid, col_grid = _grids(height, width)
    cam_pos = np.asarray(scene.ms_position, dtype=float)
    scale = float(config.downsample)
    focal = config.focal_length
    az_limit = 0.45 * math.pi  # keep tan bounded; drops corners nearly abeam
    for idx, cuboid in enumerate(scene.all_cuboids()):
        if idx == scene.ms_vehicle_index:
            continue
        if cuboid.center[2] < 0.0:
            continue  # ground slab
        dist = float(np.linalg.norm(np.asarray(cuboid.center) - cam_pos))
        intensity = 1.0 / (1.0 + dist / 10.0)
        delta = cuboid.corners() - cam_pos
        r = np.linalg.norm(delta, axis=1)
        r[r < 1e-12] = 1e-12
        corner_elev = np.arccos(np.clip(delta[:, 2] / r, -1.0, 1.0))
        world_az = np.arctan2(delta[:, 1], delta[:, 0])
        for cam in range(config.count):
            yaw = scene.ms_yaw + config.azimuths[cam]
            azimuth = np.array([_wrap_angle(a - yaw) for a in world_az])
            front = np.abs(azimuth) < az_limit
            if front.sum() < 3:
                continue
            theta = corner_elev[front] - config.elevations[cam]
            x = (focal * np.tan(theta) / np.cos(azimuth[front])
                 + config.image_height / 2.0) / scale
            y = (focal * np.tan(azimuth[front]) + config.image_width / 2.0) / scale
            hull = _convex_hull(np.column_stack([x, y]))
            if hull is None:
                continue
            inside = np.ones((height, width), dtype=bool)
            for k in range(len(hull)):
                ax, ay = hull[k]
                bx, by = hull[(k + 1) % len(hull)]
                edge = ((bx - ax) * (col_grid - ay)
                        - (by - ay) * (row_grid - ax))
                inside &= edge >= -1e-9
            np.maximum(image[cam], intensity * inside, out=image[cam])
    return image
