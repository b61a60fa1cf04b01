"""Dataset generation, persistence, and training-sample assembly.

A dataset is a directory holding one line-delimited JSON record per
scene snapshot plus a manifest echoing every configuration key, so a
run is reproducible byte-for-byte from its manifest and diffs stay
line-scoped.  Records store traced paths, the projected scatterers,
and the swept optimal beam pair; gains over a candidate set are cheap
to recompute from the stored paths, so they are never persisted.
"""

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .channel import ArrayGeometry, PathComponent, channel_from_paths, steering_vector
from .codebook import beam_pair_gains, build_codebook, optimal_pair
from .features import assemble_location_vector
from .raytrace import RayTraceConfig, trace_paths
from .scene import Area, Cuboid, Scene, SceneSamplerConfig, sample_sequence
from .semantics import (CameraConfig, EffectiveScatterer,
                        extract_effective_scatterers, project_scatterers)

FORMAT_VERSION = 1
RECORDS_NAME = "records.jsonl"
MANIFEST_NAME = "manifest.json"
SPLITS_NAME = "splits.json"


@dataclass
class GenerationConfig:
    """Everything that determines a dataset, seeds included."""

    n_sequences: int = 100
    sequence_length: int = 10
    seed: int = 0
    power_threshold_db: float = -10.0
    tx_rows: int = 8
    tx_cols: int = 64
    rx_rows: int = 8
    rx_cols: int = 64
    codebook_size: int = 64
    tx_elevation_deg: float = 92.0  # downtilt at the transmit array
    rx_elevation_deg: float = 88.0  # uptilt at the receive array
    scene: SceneSamplerConfig = field(default_factory=SceneSamplerConfig)
    tracer: RayTraceConfig = field(default_factory=RayTraceConfig)
    camera: CameraConfig = field(default_factory=CameraConfig)

    def __post_init__(self):
        if self.n_sequences < 1 or self.sequence_length < 1:
            raise ValueError("need at least one sequence of length one")
        if min(self.tx_rows, self.tx_cols, self.rx_rows, self.rx_cols) < 1:
            raise ValueError("array dimensions must be positive")
        if self.codebook_size < 1:
            raise ValueError("codebook size must be positive")


def build_codebooks(config=None):
    """Transmit and receive codebooks for a generation config (default if None)."""
    if config is None:
        config = GenerationConfig()
    tx = build_codebook(ArrayGeometry(config.tx_rows, config.tx_cols),
                        config.codebook_size,
                        math.radians(config.tx_elevation_deg))
    rx = build_codebook(ArrayGeometry(config.rx_rows, config.rx_cols),
                        config.codebook_size,
                        math.radians(config.rx_elevation_deg))
    return tx, rx


@dataclass
class DatasetRecord:
    """One scene snapshot with its traced paths and beam-sweep label.

    ``outage`` records (no paths survived) keep the scene for bookkeeping
    but carry no label and are dropped from training and evaluation.
    """

    sequence_id: int
    time_index: int
    scene: Scene
    paths: list
    scatterers: list  # projected EffectiveScatterer at the generation threshold
    outage: bool
    is_los: bool
    optimal_pair: tuple  # None on outage
    optimal_gain: float  # None on outage


def generate_records(config):
    """Yield records for every snapshot of every sequence, in order."""
    tx_cb, rx_cb = build_codebooks(config)
    rx_geom, tx_geom = rx_cb.geometry, tx_cb.geometry
    for sid in range(config.n_sequences):
        scenes = sample_sequence(config.scene, config.sequence_length,
                                 seed=config.seed, sequence_id=sid)
        for t, scene in enumerate(scenes):
            paths = trace_paths(scene, config.tracer)
            if not paths:
                yield DatasetRecord(sid, t, scene, [], [], outage=True,
                                    is_los=False, optimal_pair=None,
                                    optimal_gain=None)
                continue
            h = channel_from_paths(paths, rx_geom, tx_geom)
            gains = beam_pair_gains(h, tx_cb, rx_cb)
            pair = optimal_pair(gains)
            scatterers = extract_effective_scatterers(
                paths, scene, config.power_threshold_db)
            projections = project_scatterers(scatterers, scene, config.camera)
            yield DatasetRecord(sid, t, scene, paths, projections,
                                outage=False,
                                is_los=any(p.is_los for p in paths),
                                optimal_pair=pair,
                                optimal_gain=float(gains[pair]))


# ------------------------------------------------------------- serialization

def _cuboid_fields(c):
    return [float(c.center[0]), float(c.center[1]), float(c.center[2]),
            float(c.half_extents[0]), float(c.half_extents[1]),
            float(c.half_extents[2]), float(c.yaw), c.material]


def _cuboid_from(fields):
    return Cuboid(center=np.array(fields[0:3], dtype=float),
                  half_extents=np.array(fields[3:6], dtype=float),
                  yaw=float(fields[6]), material=fields[7])


def _path_fields(p):
    return [float(p.gain.real), float(p.gain.imag),
            float(p.aoa_elevation), float(p.aoa_azimuth),
            float(p.aod_elevation), float(p.aod_azimuth),
            float(p.path_length), int(p.bounce_count),
            float(p.last_hop_point[0]), float(p.last_hop_point[1]),
            float(p.last_hop_point[2]), int(p.is_los)]


def _path_from(fields):
    return PathComponent(gain=complex(fields[0], fields[1]),
                         aoa_elevation=float(fields[2]),
                         aoa_azimuth=float(fields[3]),
                         aod_elevation=float(fields[4]),
                         aod_azimuth=float(fields[5]),
                         path_length=float(fields[6]),
                         bounce_count=int(fields[7]),
                         last_hop_point=np.array(fields[8:11], dtype=float),
                         is_los=bool(fields[11]))


def _scatterer_fields(s):
    return [int(s.camera_index), float(s.image_point[0]),
            float(s.image_point[1]), int(s.heatmap_point[0]),
            int(s.heatmap_point[1]), float(s.relative_power),
            int(s.source_path)]


def _scatterer_from(fields):
    return EffectiveScatterer(camera_index=int(fields[0]),
                              image_point=(float(fields[1]), float(fields[2])),
                              heatmap_point=(int(fields[3]), int(fields[4])),
                              relative_power=float(fields[5]),
                              source_path=int(fields[6]))


def encode_record(record):
    """One record as a compact JSON line (no trailing newline)."""
    scene = record.scene
    payload = {
        "sequence_id": record.sequence_id,
        "time_index": record.time_index,
        "outage": record.outage,
        "is_los": record.is_los,
        "optimal_pair": (None if record.optimal_pair is None
                         else [int(record.optimal_pair[0]),
                               int(record.optimal_pair[1])]),
        "optimal_gain": (None if record.optimal_gain is None
                         else float(record.optimal_gain)),
        "scene": {
            "bs_position": [float(v) for v in scene.bs_position],
            "bs_yaw": float(scene.bs_yaw),
            "ms_position": [float(v) for v in scene.ms_position],
            "ms_yaw": float(scene.ms_yaw),
            "ms_vehicle_index": int(scene.ms_vehicle_index),
            "vehicles": [_cuboid_fields(c) for c in scene.vehicles],
            "walls": [_cuboid_fields(c) for c in scene.walls],
            "area": [float(scene.area.width), float(scene.area.length)],
        },
        "paths": [_path_fields(p) for p in record.paths],
        "scatterers": [_scatterer_fields(s) for s in record.scatterers],
    }
    return json.dumps(payload, separators=(",", ":"))


def decode_record(line):
    payload = json.loads(line)
    scene_p = payload["scene"]
    scene = Scene(
        bs_position=np.array(scene_p["bs_position"], dtype=float),
        bs_yaw=float(scene_p["bs_yaw"]),
        ms_position=np.array(scene_p["ms_position"], dtype=float),
        ms_yaw=float(scene_p["ms_yaw"]),
        vehicles=[_cuboid_from(f) for f in scene_p["vehicles"]],
        ms_vehicle_index=int(scene_p["ms_vehicle_index"]),
        walls=[_cuboid_from(f) for f in scene_p["walls"]],
        area=Area(width=float(scene_p["area"][0]),
                  length=float(scene_p["area"][1])),
        sequence_id=int(payload["sequence_id"]),
        time_index=int(payload["time_index"]),
    )
    pair = payload["optimal_pair"]
    return DatasetRecord(
        sequence_id=int(payload["sequence_id"]),
        time_index=int(payload["time_index"]),
        scene=scene,
        paths=[_path_from(f) for f in payload["paths"]],
        scatterers=[_scatterer_from(f) for f in payload["scatterers"]],
        outage=bool(payload["outage"]),
        is_los=bool(payload["is_los"]),
        optimal_pair=None if pair is None else (int(pair[0]), int(pair[1])),
        optimal_gain=(None if payload["optimal_gain"] is None
                      else float(payload["optimal_gain"])),
    )


# ------------------------------------------------------- config flattening

_PREFIXES = {"scene_": "scene", "tracer_": "tracer", "camera_": "camera"}
_SKIP_FIELDS = {"scene": {"area", "vehicle_types"},
                "tracer": {"reflection_coeff"},
                "camera": {"azimuths", "elevations"}}


def flatten_config(config):
    """Generation config as a flat string-keyed dict (the manifest's view)."""
    out = {}
    for f in dataclasses.fields(GenerationConfig):
        if f.name in ("scene", "tracer", "camera"):
            continue
        out[f.name] = getattr(config, f.name)
    for prefix, attr in _PREFIXES.items():
        nested = getattr(config, attr)
        for f in dataclasses.fields(nested):
            if f.name in _SKIP_FIELDS[attr]:
                continue
            out[prefix + f.name] = getattr(nested, f.name)
    out["scene_area_width"] = config.scene.area.width
    out["scene_area_length"] = config.scene.area.length
    for mat, coeff in sorted(config.tracer.reflection_coeff.items()):
        out["tracer_reflection_" + mat] = coeff
    return out


def config_from_items(items, base=None):
    """Apply flat key=value overrides (strings or typed) on a base config.

    Accepts exactly the keys that flatten_config emits, so a manifest's
    config block round-trips.  Unknown keys and unparsable values raise
    ValueError.
    """
    config = base if base is not None else GenerationConfig()
    top = dict((f.name, f) for f in dataclasses.fields(GenerationConfig))
    updates = {"": {}, "scene": {}, "tracer": {}, "camera": {}}
    area = {"width": config.scene.area.width,
            "length": config.scene.area.length}
    coeffs = dict(config.tracer.reflection_coeff)

    def coerce(value, current):
        if isinstance(current, bool):
            raise ValueError("boolean config fields are not supported")
        kind = type(current)
        try:
            return kind(value)
        except (TypeError, ValueError):
            raise ValueError("cannot parse %r as %s" % (value, kind.__name__))

    for key, value in items.items():
        if key in top and key not in ("scene", "tracer", "camera"):
            updates[""][key] = coerce(value, getattr(config, key))
            continue
        if key == "scene_area_width":
            area["width"] = coerce(value, area["width"])
            continue
        if key == "scene_area_length":
            area["length"] = coerce(value, area["length"])
            continue
        if key.startswith("tracer_reflection_"):
            mat = key[len("tracer_reflection_"):]
            if mat not in coeffs:
                raise ValueError("unknown material %r" % mat)
            coeffs[mat] = coerce(value, coeffs[mat])
            continue
        for prefix, attr in _PREFIXES.items():
            name = key[len(prefix):]
            nested = getattr(config, attr)
            if key.startswith(prefix) and hasattr(nested, name) \
                    and name not in _SKIP_FIELDS[attr]:
                updates[attr][name] = coerce(value, getattr(nested, name))
                break
        else:
            raise ValueError("unknown config key %r" % key)

    scene = dataclasses.replace(config.scene, area=Area(**area),
                                **updates["scene"])
    tracer = dataclasses.replace(config.tracer, reflection_coeff=coeffs,
                                 **updates["tracer"])
    cam_updates = updates["camera"]
    if cam_updates.get("count", config.camera.count) != config.camera.count:
        # a new count invalidates the stored per-camera angle tuples;
        # rebuild so the default ring is derived for the new count
        scalars = {f.name: cam_updates.get(f.name,
                                           getattr(config.camera, f.name))
                   for f in dataclasses.fields(CameraConfig)
                   if f.name not in ("azimuths", "elevations")}
        camera = CameraConfig(**scalars)
    else:
        camera = dataclasses.replace(config.camera, **cam_updates)
    return dataclasses.replace(config, scene=scene, tracer=tracer,
                               camera=camera, **updates[""])


def parse_config_text(text):
    """Flat key=value lines into an ordered dict; '#' starts a comment."""
    items = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError("line %d: expected key=value, got %r"
                             % (lineno, raw.strip()))
        key, value = line.split("=", 1)
        key, value = key.strip(), value.strip()
        if not key:
            raise ValueError("line %d: empty key" % lineno)
        items[key] = value
    return items


# ------------------------------------------------------------------ dataset IO

def generate_dataset(config, out_dir, config_items=None):
    """Write records.jsonl and manifest.json under out_dir; returns the manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    counts = {"records": 0, "outage": 0, "los": 0, "nlos": 0}
    with open(out / RECORDS_NAME, "w") as fh:
        for record in generate_records(config):
            fh.write(encode_record(record))
            fh.write("\n")
            counts["records"] += 1
            if record.outage:
                counts["outage"] += 1
            elif record.is_los:
                counts["los"] += 1
            else:
                counts["nlos"] += 1
    manifest = {
        "format_version": FORMAT_VERSION,
        "records_file": RECORDS_NAME,
        "config": flatten_config(config),
        "config_file": dict(config_items or {}),
        "counts": counts,
    }
    with open(out / MANIFEST_NAME, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def load_manifest(dataset_dir):
    with open(Path(dataset_dir) / MANIFEST_NAME) as fh:
        return json.load(fh)


def load_records(dataset_dir):
    """All records of a dataset directory, in file order."""
    path = Path(dataset_dir) / RECORDS_NAME
    records = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(decode_record(line))
    return records


def recompute_optimal(record, tx_codebook, rx_codebook):
    """Label oracle: full sweep over the stored paths, as at generation time."""
    h = channel_from_paths(record.paths, rx_codebook.geometry,
                           tx_codebook.geometry)
    gains = beam_pair_gains(h, tx_codebook, rx_codebook)
    pair = optimal_pair(gains)
    return pair, float(gains[pair])


# ------------------------------------------------------------------- splits

def split_by_sequence(records, train_fraction, seed):
    """Sequence-disjoint train/test partition, deterministic given seed."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train fraction must lie strictly between 0 and 1")
    ids = sorted({r.sequence_id for r in records})
    if len(ids) < 2:
        raise ValueError("need at least two sequences to split")
    order = np.random.default_rng(seed).permutation(len(ids))
    n_train = int(round(train_fraction * len(ids)))
    n_train = max(1, min(len(ids) - 1, n_train))
    train_ids = {ids[k] for k in order[:n_train]}
    train = [r for r in records if r.sequence_id in train_ids]
    test = [r for r in records if r.sequence_id not in train_ids]
    return train, test


def write_splits(dataset_dir, train_records, test_records, train_fraction, seed):
    payload = {
        "train_fraction": train_fraction,
        "seed": seed,
        "train_sequences": sorted({r.sequence_id for r in train_records}),
        "test_sequences": sorted({r.sequence_id for r in test_records}),
    }
    with open(Path(dataset_dir) / SPLITS_NAME, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return payload


def load_splits(dataset_dir, records):
    """Partition records along a stored split; errors if the file is missing."""
    path = Path(dataset_dir) / SPLITS_NAME
    if not path.exists():
        raise FileNotFoundError(
            "no split stored at %s; run the split step first" % path)
    with open(path) as fh:
        payload = json.load(fh)
    train_ids = set(payload["train_sequences"])
    test_ids = set(payload["test_sequences"])
    known = {r.sequence_id for r in records}
    if not known <= (train_ids | test_ids):
        raise ValueError("split file does not cover every sequence")
    train = [r for r in records if r.sequence_id in train_ids]
    test = [r for r in records if r.sequence_id in test_ids]
    return train, test


# ------------------------------------------------------------------- samples

@dataclass
class TrainingSample:
    """One labeled sample: model inputs plus candidate-restricted gains.

    ``optimal_index`` is -1 when the sweep optimum is not a candidate;
    such samples can never be top-K hits and are excluded from training.
    """

    sequence_id: int
    projections: list
    location: np.ndarray
    gains: np.ndarray
    optimal_index: int
    optimal_pair: tuple
    optimal_gain: float
    is_los: bool
    scene: Scene


def candidate_gains(paths, candidates, tx_codebook, rx_codebook, extra_pair):
    """Gains over the candidate pairs plus one extra pair, one summation route.

    Factorized per-path beam responses make this linear in the number
    of candidates.  The extra pair (normally the stored optimum) runs
    through the same vectorized expression, so equal pairs give
    bit-equal gains and achieved/optimal ratios are exact.
    """
    alpha = np.array([p.gain for p in paths])
    a_rx = np.stack([steering_vector(rx_codebook.geometry, p.aoa_elevation,
                                     p.aoa_azimuth) for p in paths])
    a_tx = np.stack([steering_vector(tx_codebook.geometry, p.aod_elevation,
                                     p.aod_azimuth) for p in paths])
    u = a_rx @ rx_codebook.vectors.conj().T  # (P, C_rx): w_j^H a_rx per path
    v = a_tx.conj() @ tx_codebook.vectors.T  # (P, C_tx): a_tx^H w_i per path
    tx_idx = np.array([p[0] for p in candidates.pairs] + [extra_pair[0]])
    rx_idx = np.array([p[1] for p in candidates.pairs] + [extra_pair[1]])
    amps = (alpha[:, None] * v[:, tx_idx] * u[:, rx_idx]).sum(axis=0)
    gains = np.abs(amps) ** 2
    return gains[:-1], float(gains[-1])


def build_samples(records, candidates, tx_codebook, rx_codebook, camera,
                  power_threshold_db=None, drop_unlisted=True):
    """Assemble training samples from records.

    Outage records are always dropped.  With ``power_threshold_db``
    given, scatterers are re-extracted from the stored paths at that
    threshold instead of using the stored projections.  With
    ``drop_unlisted`` False, samples whose optimum is outside the
    candidate set are kept with optimal_index -1 (automatic misses).
    """
    samples = []
    for record in records:
        if record.outage:
            continue
        gains, optimal_gain = candidate_gains(
            record.paths, candidates, tx_codebook, rx_codebook,
            record.optimal_pair)
        index = candidates.index_of(record.optimal_pair)
        if index is None:
            if drop_unlisted:
                continue
            index = -1
        if power_threshold_db is None:
            projections = record.scatterers
        else:
            scatterers = extract_effective_scatterers(
                record.paths, record.scene, power_threshold_db)
            projections = project_scatterers(scatterers, record.scene, camera)
        samples.append(TrainingSample(
            sequence_id=record.sequence_id,
            projections=projections,
            location=assemble_location_vector(record.scene),
            gains=gains,
            optimal_index=index,
            optimal_pair=record.optimal_pair,
            optimal_gain=optimal_gain,
            is_los=record.is_los,
            scene=record.scene,
        ))
    return samples
