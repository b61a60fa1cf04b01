import math

import numpy as np
import pytest

from sembeam.channel import PathComponent
from sembeam.scene import Area, Cuboid, Scene, SceneSamplerConfig, sample_sequence
from sembeam.raytrace import RayTraceConfig, trace_paths
from sembeam.semantics import (
    CameraConfig,
    EffectiveScatterer,
    ScattererPoint,
    SemanticHeatmap,
    corrupt_heatmaps,
    decode_heatmaps,
    extract_effective_scatterers,
    mean_effective_scatterers,
    precision_recall,
    project_scatterers,
    project_to_camera,
    rasterize_heatmaps,
    rasterize_pseudo_image,
)

CFG = CameraConfig()


def make_scene(ms_position=(0.0, 0.0, 0.0), ms_yaw=0.0, vehicles=None,
               ms_vehicle_index=-1, walls=None, bs_position=(96.0, -10.0, 3.0)):
    return Scene(
        bs_position=np.array(bs_position),
        bs_yaw=math.pi / 2,
        ms_position=np.array(ms_position, dtype=float),
        ms_yaw=ms_yaw,
        vehicles=list(vehicles or []),
        ms_vehicle_index=ms_vehicle_index,
        walls=list(walls or []),
        area=Area(),
    )


def make_path(amplitude, is_los, last_hop, bounces=1):
    return PathComponent(
        gain=complex(amplitude, 0.0),
        aoa_elevation=math.pi / 2, aoa_azimuth=0.0,
        aod_elevation=math.pi / 2, aod_azimuth=0.0,
        path_length=50.0,
        bounce_count=0 if is_los else bounces,
        last_hop_point=np.array(last_hop, dtype=float),
        is_los=is_los,
    )


def aoa(point, origin=(0.0, 0.0, 0.0), yaw=0.0):
    """Zenith elevation and vehicle-frame azimuth of a point seen from origin."""
    d = np.asarray(point, dtype=float) - np.asarray(origin, dtype=float)
    r = float(np.linalg.norm(d))
    return math.acos(d[2] / r), math.atan2(d[1], d[0]) - yaw


def es(cam, row, col, power, path=0):
    return EffectiveScatterer(
        camera_index=cam,
        image_point=(4.0 * row, 4.0 * col),
        heatmap_point=(row, col),
        relative_power=power,
        source_path=path,
    )


def heatmap_of(dist):
    dist = np.asarray(dist, dtype=float)
    return SemanticHeatmap(dist, np.zeros_like(dist))


# ---------------------------------------------------------------- projection

def test_projection_center():
    x, y = project_to_camera(*aoa((10.0, 0.0, 0.0)), 0, CFG)
    assert x == 96.0
    assert y == 256.0


def test_projection_azimuth_offset():
    az = math.radians(20.0)
    x, y = project_to_camera(math.pi / 2, az, 0, CFG)
    assert x == pytest.approx(96.0, abs=1e-9)
    assert y == pytest.approx(256.0 * math.tan(az) + 256.0, abs=1e-9)


def test_projection_elevation():
    # one meter up at ten meters out: row moves up by focal / 10
    x, y = project_to_camera(*aoa((10.0, 0.0, 1.0)), 0, CFG)
    assert x == pytest.approx(96.0 - 25.6, abs=1e-9)
    assert y == pytest.approx(256.0, abs=1e-9)


def test_projection_fov_bounds():
    assert project_to_camera(math.pi / 2, math.radians(44.0), 0, CFG) is not None
    assert project_to_camera(math.pi / 2, math.radians(46.0), 0, CFG) is None
    # row bound: too high or too low leaves the frame
    assert project_to_camera(*aoa((10.0, 0.0, 4.0)), 0, CFG) is None
    assert project_to_camera(*aoa((10.0, 0.0, -4.0)), 0, CFG) is None
    assert project_to_camera(*aoa((10.0, 0.0, 3.0)), 0, CFG) is not None


def test_projection_behind_and_overhead():
    assert project_to_camera(*aoa((-10.0, 0.0, 0.0)), 0, CFG) is None
    # straight up passes the azimuth test but lands far off-frame
    assert project_to_camera(*aoa((0.0, 0.0, 5.0)), 0, CFG) is None


def test_projection_in_view_implies_in_bounds():
    rng = np.random.default_rng(7)
    for _ in range(300):
        elevation = rng.uniform(0.05 * math.pi, 0.95 * math.pi)
        azimuth = rng.uniform(-math.pi, math.pi)
        cam = int(rng.integers(0, 4))
        point = project_to_camera(elevation, azimuth, cam, CFG)
        if point is not None:
            assert 0.0 <= point[0] < CFG.image_height
            assert 0.0 <= point[1] < CFG.image_width


def test_camera_ring():
    assert CFG.azimuths[0] == 0.0
    assert CFG.azimuths[1] == pytest.approx(math.pi / 2)
    assert CFG.azimuths[2] == pytest.approx(math.pi)
    assert CFG.azimuths[3] == pytest.approx(-math.pi / 2)
    assert CFG.elevations == (math.pi / 2,) * 4
    # straight left in the vehicle frame is camera 1's axis
    x, y = project_to_camera(math.pi / 2, math.pi / 2, 1, CFG)
    assert x == pytest.approx(96.0, abs=1e-9)
    assert y == pytest.approx(256.0, abs=1e-9)
    assert project_to_camera(math.pi / 2, math.pi / 2, 0, CFG) is None


def test_camera_config_validation():
    with pytest.raises(ValueError):
        CameraConfig(count=0)
    with pytest.raises(ValueError):
        CameraConfig(count=3, azimuths=(0.0, 1.0))
    with pytest.raises(ValueError):
        CameraConfig(image_height=190)
    with pytest.raises(ValueError):
        CameraConfig(half_fov=math.pi / 2)


def test_project_scatterers_floor_division():
    # image row 42.2: floor lands at heatmap row 10, rounding would say 11
    scene = make_scene()
    point = ScattererPoint(np.array([10.0, 0.0, 2.1015625]), 0.6, False, 3)
    out = project_scatterers([point], scene, CFG)
    assert len(out) == 1
    hit = out[0]
    assert hit.camera_index == 0
    assert hit.image_point[0] == pytest.approx(42.2, abs=1e-9)
    assert hit.image_point[1] == pytest.approx(256.0, abs=1e-9)
    assert hit.heatmap_point == (10, 64)
    assert hit.relative_power == 0.6
    assert hit.source_path == 3


def test_project_scatterers_cameras_and_yaw():
    # vehicle faces +y, so a point at +y ahead is camera 0's view
    scene = make_scene(ms_yaw=math.pi / 2)
    ahead = ScattererPoint(np.array([0.0, 12.0, 0.0]), 1.0, True, 0)
    left = ScattererPoint(np.array([-12.0, 0.0, 0.0]), 0.5, False, 1)
    out = project_scatterers([ahead, left], scene, CFG)
    cams = {hit.source_path: hit.camera_index for hit in out}
    assert cams == {0: 0, 1: 1}
    at_antenna = ScattererPoint(np.zeros(3), 1.0, False, 0)
    assert project_scatterers([at_antenna], scene, CFG) == []


def test_project_scatterers_heatmap_points_consistent():
    rng = np.random.default_rng(19)
    scene = make_scene(ms_position=(5.0, -1.0, 1.6), ms_yaw=0.7)
    points = [ScattererPoint(scene.ms_position + rng.uniform(-30.0, 30.0, 3),
                             float(rng.uniform(0.1, 1.0)), False, k)
              for k in range(60)]
    hits = project_scatterers(points, scene, CFG)
    assert hits
    for hit in hits:
        x, y = hit.image_point
        assert 0.0 <= x < CFG.image_height
        assert 0.0 <= y < CFG.image_width
        assert hit.heatmap_point == (math.floor(x / 4.0), math.floor(y / 4.0))
        assert hit.heatmap_point[0] < CFG.heatmap_height
        assert hit.heatmap_point[1] < CFG.heatmap_width


# ---------------------------------------------------------------- extraction

def test_extraction_threshold_keeps_levels_above_cut():
    # relative powers 0 dB, -6 dB, -12 dB
    scene = make_scene()
    paths = [
        make_path(1.0, True, scene.bs_position),
        make_path(10.0 ** -0.3, False, (5.0, 12.0, 1.0)),
        make_path(10.0 ** -0.6, False, (9.0, -12.0, 2.0)),
    ]
    kept = extract_effective_scatterers(paths, scene, threshold_db=-10.0)
    assert len(kept) == 2
    assert np.array_equal(kept[0].position, scene.bs_position)
    assert np.array_equal(kept[1].position, np.array([5.0, 12.0, 1.0]))
    assert kept[0].relative_power == pytest.approx(1.0)
    assert kept[1].relative_power == pytest.approx(10.0 ** -0.6)
    assert kept[0].is_los and not kept[1].is_los
    assert [s.path_index for s in kept] == [0, 1]
    # strongest path always survives, even at a tight cut
    assert len(extract_effective_scatterers(paths, scene, threshold_db=-1.0)) == 1
    assert len(extract_effective_scatterers(paths, scene, threshold_db=-20.0)) == 3


def test_extraction_empty():
    assert extract_effective_scatterers([], make_scene()) == []


def test_extraction_monotone_in_threshold():
    rng = np.random.default_rng(11)
    scene = make_scene()
    for _ in range(20):
        n = int(rng.integers(1, 9))
        paths = [make_path(float(rng.uniform(0.01, 1.0)), False,
                           rng.uniform(-20.0, 20.0, size=3)) for _ in range(n)]
        counts = [len(extract_effective_scatterers(paths, scene, threshold_db=db))
                  for db in (-1.0, -5.0, -10.0, -15.0)]
        assert counts == sorted(counts)


def test_mean_effective_scatterers():
    one = es(0, 10, 20, 1.0)
    # one sample, four cameras, two in-view projections
    assert mean_effective_scatterers([[one, one]], n_cameras=4) == 0.5
    assert mean_effective_scatterers([[], [one]], n_cameras=4) == 0.125
    with pytest.raises(ValueError):
        mean_effective_scatterers([])


# ---------------------------------------------------------------- rasterize

def test_rasterize_single_peak_kernel_values():
    maps = rasterize_heatmaps([es(0, 10, 20, 0.7)], CFG)
    assert maps.distribution.shape == (4, 48, 128)
    dist, strength = maps.distribution[0], maps.strength[0]
    assert dist[10, 20] == 1.0
    assert dist[10, 21] == pytest.approx(math.exp(-1.0 / 4.5), rel=1e-12)
    assert dist[11, 21] == pytest.approx(math.exp(-2.0 / 4.5), rel=1e-12)
    assert np.array_equal(strength, 0.7 * dist)
    assert np.all(maps.distribution[1:] == 0.0)
    assert np.all(maps.strength[1:] == 0.0)
    # kernel falls strictly with distance from the peak
    row = dist[10, 20:26]
    assert np.all(np.diff(row) < 0.0)


def test_rasterize_max_combine():
    maps = rasterize_heatmaps([es(0, 10, 20, 1.0), es(0, 10, 22, 0.5)], CFG)
    dist, strength = maps.distribution[0], maps.strength[0]
    assert dist[10, 20] == 1.0
    assert dist[10, 22] == 1.0
    assert dist[10, 21] == pytest.approx(math.exp(-1.0 / 4.5), rel=1e-12)
    assert strength[10, 20] == 1.0
    assert strength[10, 22] == 0.5  # 0.5 beats the tail of the full-power peak
    assert strength[10, 21] == dist[10, 21]  # full-power tail wins over 0.5 peak side


def test_heatmap_type_clamps_and_stacks():
    dist = np.full((2, 4, 6), 1.5)
    strength = np.full((2, 4, 6), -0.5)
    hm = SemanticHeatmap(dist, strength)
    assert hm.distribution.max() == 1.0
    assert hm.strength.min() == 0.0
    stacked = hm.stacked()
    assert stacked.shape == (4, 4, 6)
    assert np.array_equal(stacked[:2], hm.distribution)
    assert np.array_equal(stacked[2:], hm.strength)
    with pytest.raises(ValueError):
        SemanticHeatmap(np.zeros((2, 4, 6)), np.zeros((2, 4, 5)))


# ------------------------------------------------------------------- decode

def test_decode_roundtrip_simple():
    layout = [es(0, 10, 20, 0.9), es(0, 30, 100, 0.4), es(2, 5, 64, 0.6)]
    detections = decode_heatmaps(rasterize_heatmaps(layout, CFG))
    assert [(d[0], d[1], d[2]) for d in detections] == \
        [(0, 10, 20), (0, 30, 100), (2, 5, 64)]
    assert all(d[3] == 1.0 for d in detections)


def test_decode_threshold():
    dist = np.zeros((1, 5, 5))
    dist[0, 2, 2] = 0.4
    hm = heatmap_of(dist)
    assert decode_heatmaps(hm, threshold=0.5) == []
    assert [(d[0], d[1], d[2]) for d in decode_heatmaps(hm)] == [(0, 2, 2)]
    faint = np.zeros((1, 5, 5))
    faint[0, 2, 2] = 0.25
    assert decode_heatmaps(heatmap_of(faint)) == []


def test_decode_tie_goes_to_lower_row_col():
    dist = np.zeros((1, 6, 6))
    dist[0, 1, 1] = 0.8
    dist[0, 1, 2] = 0.8
    assert [(d[1], d[2]) for d in decode_heatmaps(heatmap_of(dist))] == [(1, 1)]
    dist = np.zeros((1, 6, 6))
    dist[0, 2, 2] = 0.8
    dist[0, 3, 3] = 0.8
    assert [(d[1], d[2]) for d in decode_heatmaps(heatmap_of(dist))] == [(2, 2)]


def test_decode_border_peak():
    dist = np.zeros((1, 6, 6))
    dist[0, 0, 0] = 0.9
    assert decode_heatmaps(heatmap_of(dist)) == [(0, 0, 0, 0.9)]


def naive_decode(hm, threshold):
    out = []
    count, height, width = hm.distribution.shape
    for cam in range(count):
        dist = hm.distribution[cam]
        for r in range(height):
            for c in range(width):
                v = dist[r, c]
                if v < threshold:
                    continue
                ok = True
                for dr in (-1, 0, 1):
                    for dc in (-1, 0, 1):
                        if dr == 0 and dc == 0:
                            continue
                        rr, cc = r + dr, c + dc
                        if not (0 <= rr < height and 0 <= cc < width):
                            continue
                        n = dist[rr, cc]
                        earlier = dr < 0 or (dr == 0 and dc < 0)
                        if (not v > n) if earlier else (not v >= n):
                            ok = False
                if ok:
                    out.append((cam, r, c, float(v)))
    return out


def test_decode_matches_brute_force_scan():
    rng = np.random.default_rng(31)
    for _ in range(50):
        dist = rng.integers(0, 6, size=(2, 8, 12)) / 5.0  # coarse grid forces ties
        hm = heatmap_of(dist)
        assert decode_heatmaps(hm, threshold=0.4) == naive_decode(hm, 0.4)


# ------------------------------------------------------------ precision/recall

def test_pr_conventions():
    assert precision_recall([], []) == (1.0, 1.0)
    assert precision_recall([], [(0, 1.0, 1.0)]) == (0.0, 0.0)
    assert precision_recall([(0, 1, 1, 1.0)], []) == (0.0, 1.0)


def test_pr_partial_recall():
    truth = [(0, 10.0, 20.0), (1, 5.0, 5.0)]
    assert precision_recall([(0, 10, 20, 1.0)], truth) == (1.0, 0.5)


def test_pr_exact_and_spurious():
    truth = [(0, 10.0, 20.0), (1, 5.0, 5.0)]
    preds = [(0, 10, 20, 1.0), (1, 5, 5, 1.0)]
    assert precision_recall(preds, truth) == (1.0, 1.0)
    preds.append((2, 7, 7, 1.0))
    precision, recall = precision_recall(preds, truth)
    assert precision == pytest.approx(2.0 / 3.0)
    assert recall == 1.0


def test_pr_accepts_scatterer_objects():
    truth = [es(0, 10, 20, 0.9)]
    assert precision_recall([(0, 10, 20, 1.0)], truth) == (1.0, 1.0)


def test_pr_tolerance_boundary():
    truth = [(0, 0.0, 0.0)]
    assert precision_recall([(0, 0.0, 3.0, 1.0)], truth) == (1.0, 1.0)
    assert precision_recall([(0, 0.0, 3.2, 1.0)], truth) == (0.0, 0.0)


def test_pr_greedy_by_score_then_nearest():
    truth = [(0, 5.0, 5.0)]
    preds = [(0, 5.0, 4.0, 0.5), (0, 5.0, 6.0, 0.9)]
    precision, recall = precision_recall(preds, truth)
    assert precision == 0.5
    assert recall == 1.0
    # nearest unclaimed truth is taken, leaving the far one for the next pred
    truth = [(0, 5.0, 6.0), (0, 5.0, 7.0)]
    preds = [(0, 5.0, 5.0, 1.0), (0, 5.0, 7.5, 0.9)]
    assert precision_recall(preds, truth) == (1.0, 1.0)


def test_pr_camera_must_match():
    assert precision_recall([(1, 3.0, 3.0, 1.0)], [(0, 3.0, 3.0)]) == (0.0, 0.0)


def test_roundtrip_property():
    rng = np.random.default_rng(23)
    for _ in range(200):
        layout = []
        cells = {cam: [] for cam in range(4)}
        n = int(rng.integers(1, 7))
        while sum(len(v) for v in cells.values()) < n:
            cam = int(rng.integers(0, 4))
            cell = (int(rng.integers(2, 46)), int(rng.integers(2, 126)))
            if all(max(abs(cell[0] - r), abs(cell[1] - c)) >= 3
                   for r, c in cells[cam]):
                cells[cam].append(cell)
                layout.append(es(cam, cell[0], cell[1],
                                 float(rng.uniform(0.1, 1.0))))
        detections = decode_heatmaps(rasterize_heatmaps(layout, CFG))
        assert sorted((d[0], d[1], d[2]) for d in detections) == \
            sorted((s.camera_index,) + s.heatmap_point for s in layout)
        assert precision_recall(detections, layout) == (1.0, 1.0)


# ------------------------------------------------------------------ corrupt

def test_corrupt_identity_at_zero_noise():
    maps = rasterize_heatmaps([es(0, 10, 20, 0.8)], CFG)
    out = corrupt_heatmaps(maps, 0.0, np.random.default_rng(0))
    assert out is not maps
    assert np.array_equal(out.distribution, maps.distribution)
    assert np.array_equal(out.strength, maps.strength)


def test_corrupt_zero_noise_zero_drop_reproduces_via_decode():
    layout = [es(0, 10, 20, 0.8), es(3, 40, 90, 0.3)]
    maps = rasterize_heatmaps(layout, CFG)
    out = corrupt_heatmaps(maps, 0.0, np.random.default_rng(0), drop_prob=0.0)
    assert np.array_equal(out.distribution, maps.distribution)
    assert np.array_equal(out.strength, maps.strength)


def test_corrupt_drop_everything():
    maps = rasterize_heatmaps([es(0, 10, 20, 0.8)], CFG)
    out = corrupt_heatmaps(maps, 1.0, np.random.default_rng(0), drop_prob=1.0)
    assert np.all(out.distribution == 0.0)
    assert np.all(out.strength == 0.0)


def test_corrupt_deterministic_and_degrading():
    layout = [es(0, 10, 20, 0.9), es(1, 30, 60, 0.7), es(2, 20, 100, 0.5),
              es(3, 40, 30, 0.8), es(0, 35, 90, 0.6)]
    maps = rasterize_heatmaps(layout, CFG)
    a = corrupt_heatmaps(maps, 6.0, np.random.default_rng(42))
    b = corrupt_heatmaps(maps, 6.0, np.random.default_rng(42))
    assert np.array_equal(a.distribution, b.distribution)
    assert np.array_equal(a.strength, b.strength)
    pr = precision_recall(decode_heatmaps(a), layout)
    assert pr != (1.0, 1.0)
    with pytest.raises(ValueError):
        corrupt_heatmaps(maps, -1.0, np.random.default_rng(0))


# ------------------------------------------------------------- pseudo image

def test_pseudo_image_single_box_ahead():
    own = Cuboid(np.array([0.0, 0.0, 0.75]), np.array([2.0, 1.0, 0.75]))
    target = Cuboid(np.array([10.0, 0.0, 1.0]), np.array([1.0, 1.0, 1.0]))
    scene = make_scene(ms_position=(0.0, 0.0, 1.6), vehicles=[own, target],
                       ms_vehicle_index=0)
    image = rasterize_pseudo_image(scene, CFG)
    assert image.shape == (4, 48, 128)
    dist = math.dist((10.0, 0.0, 1.0), (0.0, 0.0, 1.6))
    assert image[0].max() == pytest.approx(1.0 / (1.0 + dist / 10.0))
    assert np.all(image[1:] == 0.0)


def test_pseudo_image_skips_own_vehicle_and_ground():
    own = Cuboid(np.array([0.0, 0.0, 0.75]), np.array([2.0, 1.0, 0.75]))
    ground = Cuboid(np.array([0.0, 0.0, -0.5]), np.array([100.0, 30.0, 0.5]),
                    material="concrete")
    scene = make_scene(ms_position=(0.0, 0.0, 1.6), vehicles=[own],
                       ms_vehicle_index=0, walls=[ground])
    assert np.all(rasterize_pseudo_image(scene, CFG) == 0.0)


def test_pseudo_image_nearer_is_brighter():
    near = Cuboid(np.array([8.0, 0.0, 1.0]), np.array([1.0, 1.0, 1.0]))
    far = Cuboid(np.array([30.0, 0.0, 1.0]), np.array([1.0, 1.0, 1.0]))
    scene = make_scene(ms_position=(0.0, 0.0, 1.6), vehicles=[near, far])
    image = rasterize_pseudo_image(scene, CFG)
    d_near = math.dist((8.0, 0.0, 1.0), (0.0, 0.0, 1.6))
    assert image[0].max() == pytest.approx(1.0 / (1.0 + d_near / 10.0))
    assert np.all(image[0] <= 1.0 / (1.0 + d_near / 10.0) + 1e-12)


# -------------------------------------------------------------- integration

def test_full_scene_pipeline():
    cfg = SceneSamplerConfig()
    tracer = RayTraceConfig()
    scene = paths = None
    for sid in range(10):
        candidate = sample_sequence(cfg, 1, seed=5, sequence_id=sid)[0]
        found = trace_paths(candidate, tracer)
        if found:
            scene, paths = candidate, found
            break
    assert paths is not None
    scatterers = extract_effective_scatterers(paths, scene)
    assert scatterers
    projections = project_scatterers(scatterers, scene, CFG)
    for hit in projections:
        x, y = hit.image_point
        assert 0.0 <= x < CFG.image_height
        assert 0.0 <= y < CFG.image_width
        assert hit.heatmap_point == (math.floor(x / 4.0), math.floor(y / 4.0))
    maps = rasterize_heatmaps(projections, CFG)
    assert maps.distribution.shape == (4, 48, 128)
    assert maps.distribution.max() <= 1.0
    assert np.all(maps.strength <= maps.distribution + 1e-12)
    if projections:
        assert decode_heatmaps(maps)
        image = rasterize_pseudo_image(scene, CFG)
        assert image.shape == (4, 48, 128)
        assert image.max() > 0.0
