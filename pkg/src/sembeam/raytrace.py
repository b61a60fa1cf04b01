"""Specular propagation paths over cuboid scenes via the image method.

Line of sight plus reflections up to a configured order. Diffraction and
transmission through obstacles are not modeled: a blocked path is simply absent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .channel import PathComponent
from .scene import Scene

SPEED_OF_LIGHT = 299_792_458.0

_T_EPS = 1e-9  # blockage tests ignore this much of each sub-segment at the endpoints
_FACE_MARGIN = 1e-9  # reflection points must be strictly inside a face by this margin, m


@dataclass
class RayTraceConfig:
    max_reflections: int = 2  # the sweep cost grows with faces^order; >2 gets slow fast
    carrier_frequency: float = 60e9  # Hz
    max_paths: int = 25
    reflection_coeff: dict = field(default_factory=lambda: {"metal": 0.95, "concrete": 0.6})

    def __post_init__(self):
        if not 0 <= self.max_reflections <= 6:
            raise ValueError("max_reflections must be within [0, 6]")
        if self.carrier_frequency <= 0:
            raise ValueError("carrier frequency must be positive")
        if self.max_paths < 1:
            raise ValueError("max_paths must be >= 1")
        for mat, coeff in self.reflection_coeff.items():
            if not 0 < coeff <= 1:
                raise ValueError("reflection coefficient for %r must be in (0, 1]" % mat)

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_frequency


def path_gain(length: float, bounce_count: int, materials, cfg: RayTraceConfig) -> complex:
    """Complex path gain: free-space spreading, per-bounce loss, propagation phase."""
    if length <= 0:
        raise ValueError("path length must be positive")
    materials = list(materials)
    if len(materials) != bounce_count:
        raise ValueError("expected %d bounce materials, got %d" % (bounce_count, len(materials)))
    lam = cfg.wavelength
    mag = lam / (4.0 * math.pi * length)
    for mat in materials:
        mag *= cfg.reflection_coeff[mat]
    return mag * complex(math.cos(-2.0 * math.pi * length / lam), math.sin(-2.0 * math.pi * length / lam))


class _Geometry:
    """Face and box tables for one scene, laid out for vectorized sweeps."""

    def __init__(self, cuboids):
        self.n_boxes = len(cuboids)
        self.box_centers = np.array([c.center for c in cuboids]).reshape(self.n_boxes, 3)
        self.box_half = np.array([c.half_extents for c in cuboids]).reshape(self.n_boxes, 3)
        self.box_cos = np.array([math.cos(c.yaw) for c in cuboids])
        self.box_sin = np.array([math.sin(c.yaw) for c in cuboids])

        centers, normals, us, vs, hu, hv, owner, mats = [], [], [], [], [], [], [], []
        for idx, c in enumerate(cuboids):
            cy, sy = math.cos(c.yaw), math.sin(c.yaw)
            ex = np.array([cy, sy, 0.0])
            ey = np.array([-sy, cy, 0.0])
            ez = np.array([0.0, 0.0, 1.0])
            hx, hy_, hz = c.half_extents
            for axis, (n, u, v, hn, h1, h2) in enumerate(
                [
                    (ex, ey, ez, hx, hy_, hz),
                    (ey, ex, ez, hy_, hx, hz),
                    (ez, ex, ey, hz, hx, hy_),
                ]
            ):
                for sign in (1.0, -1.0):
                    centers.append(c.center + sign * hn * n)
                    normals.append(sign * n)
                    us.append(u)
                    vs.append(v)
                    hu.append(h1)
                    hv.append(h2)
                    owner.append(idx)
                    mats.append(c.material)
        self.n_faces = len(centers)
        self.face_centers = np.array(centers).reshape(self.n_faces, 3)
        self.face_normals = np.array(normals).reshape(self.n_faces, 3)
        self.face_u = np.array(us).reshape(self.n_faces, 3)
        self.face_v = np.array(vs).reshape(self.n_faces, 3)
        self.face_hu = np.array(hu)
        self.face_hv = np.array(hv)
        self.face_owner = np.array(owner, dtype=int)
        self.face_material = mats

    def to_box_local(self, points: np.ndarray) -> np.ndarray:
        """(M, 3) world points -> (M, n_boxes, 3) box-frame coordinates."""
        d = points[:, None, :] - self.box_centers[None, :, :]
        c, s = self.box_cos[None, :], self.box_sin[None, :]
        x = c * d[..., 0] + s * d[..., 1]
        y = -s * d[..., 0] + c * d[..., 1]
        return np.stack([x, y, d[..., 2]], axis=-1)

    def blocked(self, p0: np.ndarray, p1: np.ndarray, excl_a=None, excl_b=None) -> np.ndarray:
        """Whether each segment p0[m] -> p1[m] intersects any box.

        excl_a / excl_b give one box index per segment to skip (-1 for none);
        used for the cuboids whose faces the segment endpoints lie on, which a
        convex box can only touch at the endpoint itself.
        """
        p0 = np.atleast_2d(p0)
        p1 = np.atleast_2d(p1)
        if self.n_boxes == 0:
            return np.zeros(len(p0), dtype=bool)
        a = self.to_box_local(p0)
        b = self.to_box_local(p1)
        d = b - a
        half = self.box_half[None, :, :]
        parallel = np.abs(d) < 1e-12
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = (-half - a) / d
            t2 = (half - a) / d
        tmin = np.minimum(t1, t2)
        tmax = np.maximum(t1, t2)
        inside_par = np.abs(a) <= half
        tmin = np.where(parallel, np.where(inside_par, -np.inf, np.inf), tmin)
        tmax = np.where(parallel, np.where(inside_par, np.inf, -np.inf), tmax)
        t_enter = tmin.max(axis=-1)
        t_exit = tmax.min(axis=-1)
        hit = (t_enter <= t_exit) & (t_exit >= _T_EPS) & (t_enter <= 1.0 - _T_EPS)
        box_idx = np.arange(self.n_boxes)[None, :]
        for excl in (excl_a, excl_b):
            if excl is not None:
                hit &= box_idx != np.asarray(excl, dtype=int)[:, None]
        return hit.any(axis=1)

    def mirror(self, points: np.ndarray, face_idx) -> np.ndarray:
        """Mirror points across the planes of the given faces (broadcasting over rows)."""
        c = self.face_centers[face_idx]
        n = self.face_normals[face_idx]
        dist = np.sum((points - c) * n, axis=-1, keepdims=True)
        return points - 2.0 * dist * n

    def inside_face(self, points: np.ndarray, face_idx) -> np.ndarray:
        d = points - self.face_centers[face_idx]
        pu = np.sum(d * self.face_u[face_idx], axis=-1)
        pv = np.sum(d * self.face_v[face_idx], axis=-1)
        return (np.abs(pu) < self.face_hu[face_idx] - _FACE_MARGIN) & (
            np.abs(pv) < self.face_hv[face_idx] - _FACE_MARGIN
        )


def _wrap_angle(a: float) -> float:
    w = (a + math.pi) % (2.0 * math.pi) - math.pi
    return math.pi if w == -math.pi else w


def _spherical(direction: np.ndarray):
    r = float(np.linalg.norm(direction))
    el = math.acos(max(-1.0, min(1.0, direction[2] / r)))
    az = math.atan2(direction[1], direction[0])
    return el, az


def _plane_crossing(geom, src, target, face_idx):
    """Crossing of segment src->target with each face plane: (t, point, valid)."""
    n = geom.face_normals[face_idx]
    c = geom.face_centers[face_idx]
    denom = np.sum((target - src) * n, axis=-1)
    numer = np.sum((c - src) * n, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = numer / denom
    valid = (np.abs(denom) > 1e-15) & (t > 1e-12) & (t < 1.0 - 1e-12)
    t_safe = np.where(valid, t, 0.5)
    point = src + t_safe[..., None] * (target - src)
    return t, point, valid


def _build_path(scene: Scene, chain, materials, cfg: RayTraceConfig) -> PathComponent:
    chain = [np.asarray(p, dtype=float) for p in chain]
    length = 0.0
    for a, b in zip(chain[:-1], chain[1:]):
        length += float(np.linalg.norm(b - a))
    el_d, az_d = _spherical(chain[1] - chain[0])
    el_a, az_a = _spherical(chain[-2] - chain[-1])
    bounce = len(materials)
    return PathComponent(
        gain=path_gain(length, bounce, materials, cfg),
        aoa_elevation=el_a,
        aoa_azimuth=_wrap_angle(az_a - scene.ms_yaw),
        aod_elevation=el_d,
        aod_azimuth=_wrap_angle(az_d - scene.bs_yaw),
        path_length=length,
        bounce_count=bounce,
        last_hop_point=chain[-2].copy(),
        is_los=bounce == 0,
    )


def line_of_sight_clear(scene: Scene, geom: _Geometry | None = None) -> bool:
    """Pure predicate: is the direct segment between the terminals unobstructed?

    The vehicle carrying the antenna is not counted as an obstruction of its
    own mount.
    """
    if geom is None:
        geom = _Geometry(scene.all_cuboids())
    own = np.array([scene.ms_vehicle_index])
    return not bool(
        geom.blocked(scene.bs_position[None, :], scene.ms_position[None, :], excl_a=own)[0]
    )


def _one_bounce(scene, geom, cfg):
    bs, ms = scene.bs_position, scene.ms_position
    faces = np.arange(geom.n_faces)
    front = np.sum((bs - geom.face_centers) * geom.face_normals, axis=-1) > 0
    ms_front = np.sum((ms - geom.face_centers) * geom.face_normals, axis=-1) > 0
    cand = faces[front & ms_front]
    if cand.size == 0:
        return []
    images = geom.mirror(bs[None, :], cand)
    _, points, valid = _plane_crossing(geom, images, ms[None, :], cand)
    valid &= geom.inside_face(points, cand)
    cand, points = cand[valid], points[valid]
    if cand.size == 0:
        return []
    owner = geom.face_owner[cand]
    no_excl = np.full(len(cand), -1)
    blocked_in = geom.blocked(np.broadcast_to(bs, (len(cand), 3)), points, excl_a=owner, excl_b=no_excl)
    blocked_out = geom.blocked(points, np.broadcast_to(ms, (len(cand), 3)), excl_a=owner, excl_b=no_excl)
    ok = ~(blocked_in | blocked_out)
    out = []
    for f, r in zip(cand[ok], points[ok]):
        out.append(_build_path(scene, [bs, r, ms], [geom.face_material[f]], cfg))
    return out


def _two_bounce(scene, geom, cfg):
    bs, ms = scene.bs_position, scene.ms_position
    F = geom.n_faces
    fc, fn = geom.face_centers, geom.face_normals
    front1 = np.sum((bs - fc) * fn, axis=-1) > 0  # (F,) bs in front of first face
    i1 = geom.mirror(bs[None, :], np.arange(F))  # (F, 3) first images

    a_idx, b_idx = np.meshgrid(np.arange(F), np.arange(F), indexing="ij")
    a_idx, b_idx = a_idx.ravel(), b_idx.ravel()
    keep = (a_idx != b_idx) & front1[a_idx]
    # first image must be in front of the second face, receiver too
    keep &= np.sum((i1[a_idx] - fc[b_idx]) * fn[b_idx], axis=-1) > 0
    keep &= np.sum((ms - fc[b_idx]) * fn[b_idx], axis=-1) > 0
    a_idx, b_idx = a_idx[keep], b_idx[keep]
    if a_idx.size == 0:
        return []

    i2 = geom.mirror(i1[a_idx], b_idx)
    _, r2, v2 = _plane_crossing(geom, i2, ms[None, :], b_idx)
    v2 &= geom.inside_face(r2, b_idx)
    # the middle segment must leave the first face frontward
    v2 &= np.sum((r2 - fc[a_idx]) * fn[a_idx], axis=-1) > 0
    a_idx, b_idx, r2 = a_idx[v2], b_idx[v2], r2[v2]
    if a_idx.size == 0:
        return []

    _, r1, v1 = _plane_crossing(geom, i1[a_idx], r2, a_idx)
    v1 &= geom.inside_face(r1, a_idx)
    a_idx, b_idx, r1, r2 = a_idx[v1], b_idx[v1], r1[v1], r2[v1]
    if a_idx.size == 0:
        return []

    own_a, own_b = geom.face_owner[a_idx], geom.face_owner[b_idx]
    none = np.full(len(a_idx), -1)
    n = len(a_idx)
    blocked = geom.blocked(np.broadcast_to(bs, (n, 3)), r1, excl_a=own_a, excl_b=none)
    blocked |= geom.blocked(r1, r2, excl_a=own_a, excl_b=own_b)
    blocked |= geom.blocked(r2, np.broadcast_to(ms, (n, 3)), excl_a=own_b, excl_b=none)
    ok = ~blocked
    out = []
    for fa, fb, p1, p2 in zip(a_idx[ok], b_idx[ok], r1[ok], r2[ok]):
        out.append(
            _build_path(scene, [bs, p1, p2, ms], [geom.face_material[fa], geom.face_material[fb]], cfg)
        )
    return out


def _generic_bounce(scene, geom, cfg, order):
    """Reference image-method enumeration for any reflection order (slow, plain loops)."""
    bs, ms = scene.bs_position, scene.ms_position
    out = []

    def backtrace(seq, images):
        target = ms
        points = []
        for level in range(order, 0, -1):
            f = np.array([seq[level - 1]])
            src = images[level][None, :]
            _, point, valid = _plane_crossing(geom, src, target[None, :], f)
            if not valid[0] or not geom.inside_face(point, f)[0]:
                return None
            if np.sum((target - geom.face_centers[f[0]]) * geom.face_normals[f[0]]) <= 0:
                return None
            target = point[0]
            points.append(target)
        points.reverse()
        chain = [bs] + points + [ms]
        owners = [geom.face_owner[f] for f in seq]
        for k in range(len(chain) - 1):
            excl_a = np.array([owners[k - 1] if k >= 1 else -1])
            excl_b = np.array([owners[k] if k < order else -1])
            if geom.blocked(chain[k][None, :], chain[k + 1][None, :], excl_a=excl_a, excl_b=excl_b)[0]:
                return None
        return _build_path(scene, chain, [geom.face_material[f] for f in seq], cfg)

    def recurse(seq, images):
        if len(seq) == order:
            path = backtrace(seq, images)
            if path is not None:
                out.append(path)
            return
        for f in range(geom.n_faces):
            if seq and f == seq[-1]:
                continue
            if np.sum((images[-1] - geom.face_centers[f]) * geom.face_normals[f]) <= 0:
                continue
            recurse(seq + [f], images + [geom.mirror(images[-1][None, :], np.array([f]))[0]])

    recurse([], [bs])
    return out


def trace_paths(scene: Scene, cfg: RayTraceConfig) -> list:
    """All surviving specular paths, strongest first, truncated to cfg.max_paths.

    Enumeration order (line of sight, then ascending reflection order, each in
    face-table order) breaks |gain| ties deterministically via the stable sort.
    """
    cuboids = scene.all_cuboids()
    geom = _Geometry(cuboids)
    paths = []
    if line_of_sight_clear(scene, geom):
        paths.append(_build_path(scene, [scene.bs_position, scene.ms_position], [], cfg))
    if geom.n_faces:
        if cfg.max_reflections >= 1:
            paths.extend(_one_bounce(scene, geom, cfg))
        if cfg.max_reflections >= 2:
            paths.extend(_two_bounce(scene, geom, cfg))
        for order in range(3, cfg.max_reflections + 1):
            paths.extend(_generic_bounce(scene, geom, cfg, order))
    mags = np.array([abs(p.gain) for p in paths])
    order_idx = np.argsort(-mags, kind="stable")[: cfg.max_paths]
    return [paths[int(i)] for i in order_idx]
