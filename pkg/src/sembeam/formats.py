"""File formats: metric and trace CSVs, PGM heatmap dumps, model binaries.

Floats are written with repr so every CSV round-trips exactly.  Model
files are a flat sequence of named float64 tensors behind a "BSNET1"
magic; network hyperparameters, the candidate set, and the camera
geometry ride along as meta tensors so a model file is self-contained.
"""

import csv
import struct

import numpy as np

from .codebook import CandidateSet
from .nets import build_net
from .semantics import CameraConfig

MODEL_MAGIC = b"BSNET1"

METRICS_HEADER = ["K", "A", "T", "A_los", "T_los", "A_nlos", "T_nlos"]
TRACE_HEADER = ["epoch", "split", "loss", "top1"]
SWEEP_HEADER = ["P_th", "A1", "T1", "N_E"]
PR_HEADER = ["threshold", "precision", "recall"]


def _fmt(value):
    return repr(float(value))


# ---------------------------------------------------------------------- CSV

def write_metrics_csv(report, path):
    """A/T table with LOS/NLOS strata, one row per K."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(METRICS_HEADER)
        for k in range(report.kmax):
            writer.writerow([k + 1] + [_fmt(col[k]) for col in (
                report.accuracy, report.throughput,
                report.accuracy_los, report.throughput_los,
                report.accuracy_nlos, report.throughput_nlos)])


def read_metrics_csv(path):
    """The six metric columns back as arrays: dict of header name -> (kmax,)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != METRICS_HEADER:
            raise ValueError("unexpected metrics header %r" % header)
        rows = [[float(v) for v in row] for row in reader if row]
    if not rows:
        raise ValueError("metrics file has no rows")
    data = np.array(rows)
    if np.any(data[:, 0] != np.arange(1, len(rows) + 1)):
        raise ValueError("K column must run 1..kmax")
    return {name: data[:, i] for i, name in enumerate(METRICS_HEADER)}


def write_trace_csv(trace, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_HEADER)
        for row in trace:
            writer.writerow([row["epoch"], row["split"],
                             _fmt(row["loss"]), _fmt(row["top1"])])


def read_trace_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != TRACE_HEADER:
            raise ValueError("unexpected trace header %r" % header)
        return [{"epoch": int(row[0]), "split": row[1],
                 "loss": float(row[2]), "top1": float(row[3])}
                for row in reader if row]


def write_sweep_csv(rows, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SWEEP_HEADER)
        for row in rows:
            writer.writerow([_fmt(row.threshold_db), _fmt(row.accuracy1),
                             _fmt(row.throughput1), _fmt(row.n_effective)])


def read_sweep_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != SWEEP_HEADER:
            raise ValueError("unexpected sweep header %r" % header)
        return [tuple(float(v) for v in row) for row in reader if row]


def write_pr_csv(points, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(PR_HEADER)
        for threshold, precision, recall in points:
            writer.writerow([_fmt(threshold), _fmt(precision), _fmt(recall)])


def read_pr_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != PR_HEADER:
            raise ValueError("unexpected PR header %r" % header)
        return [tuple(float(v) for v in row) for row in reader if row]


# ---------------------------------------------------------------------- PGM

def write_pgm(values, path):
    """A [0, 1] float image as binary PGM (P5), maxval 255."""
    values = np.asarray(values, dtype=float)
    if values.ndim != 2:
        raise ValueError("PGM wants a 2-D array")
    if values.size and (values.min() < 0.0 or values.max() > 1.0):
        raise ValueError("values must lie in [0, 1]")
    height, width = values.shape
    data = np.round(values * 255.0).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (width, height))
        fh.write(data.tobytes())


def read_pgm(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    fields = []
    pos = 0
    while len(fields) < 4:  # magic, width, height, maxval
        while pos < len(blob) and blob[pos:pos + 1].isspace():
            pos += 1
        if blob[pos:pos + 1] == b"#":
            pos = blob.index(b"\n", pos) + 1
            continue
        start = pos
        while pos < len(blob) and not blob[pos:pos + 1].isspace():
            pos += 1
        fields.append(blob[start:pos])
    pos += 1  # single whitespace byte after maxval
    if fields[0] != b"P5" or fields[3] != b"255":
        raise ValueError("expected binary PGM with maxval 255")
    width, height = int(fields[1]), int(fields[2])
    data = np.frombuffer(blob, dtype=np.uint8, count=width * height, offset=pos)
    return data.reshape(height, width).astype(float) / 255.0


# --------------------------------------------------------------------- model

def _write_tensor(fh, name, array):
    encoded = name.encode("utf-8")
    array = np.ascontiguousarray(array, dtype="<f8")
    fh.write(struct.pack("<I", len(encoded)))
    fh.write(encoded)
    fh.write(struct.pack("<I", array.ndim))
    for dim in array.shape:
        fh.write(struct.pack("<I", dim))
    fh.write(array.tobytes())


def _read_tensor(fh):
    head = fh.read(4)
    if not head:
        return None
    (name_len,) = struct.unpack("<I", head)
    name = fh.read(name_len).decode("utf-8")
    (rank,) = struct.unpack("<I", fh.read(4))
    shape = tuple(struct.unpack("<I", fh.read(4))[0] for _ in range(rank))
    count = int(np.prod(shape)) if shape else 1
    data = np.frombuffer(fh.read(8 * count), dtype="<f8").reshape(shape)
    return name, data.astype(float)


def _camera_meta(camera):
    return np.array([camera.count, camera.image_height, camera.image_width,
                     camera.half_fov, camera.downsample, camera.sigma])


def _camera_from_meta(values):
    return CameraConfig(count=int(values[0]), image_height=int(values[1]),
                        image_width=int(values[2]), half_fov=float(values[3]),
                        downsample=int(values[4]), sigma=float(values[5]))


def save_model(net, path, candidates=None, camera=None):
    """Serialize a net with enough metadata to rebuild and evaluate it."""
    camera = camera or CameraConfig()
    arch_codes = np.array([float(ord(c)) for c in net.arch])
    n_choices = float(getattr(net, "n_choices", 0))
    pairs = np.zeros((0, 2)) if candidates is None else \
        np.array(candidates.pairs, dtype=float).reshape(-1, 2)
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        _write_tensor(fh, "meta/arch", arch_codes)
        _write_tensor(fh, "meta/n_choices", np.array([n_choices]))
        _write_tensor(fh, "meta/candidates", pairs)
        _write_tensor(fh, "meta/camera", _camera_meta(camera))
        for name, param in net.named_parameters():
            _write_tensor(fh, name, param.data)


def load_model(path):
    """Rebuild (net, candidates, camera) from a model file.

    Candidates come back as None when the file stored none (nets that
    do not classify beam pairs).
    """
    with open(path, "rb") as fh:
        magic = fh.read(len(MODEL_MAGIC))
        if magic != MODEL_MAGIC:
            raise ValueError("not a model file (bad magic %r)" % magic)
        tensors = {}
        order = []
        while True:
            item = _read_tensor(fh)
            if item is None:
                break
            tensors[item[0]] = item[1]
            order.append(item[0])
    for key in ("meta/arch", "meta/n_choices", "meta/candidates",
                "meta/camera"):
        if key not in tensors:
            raise ValueError("model file is missing %s" % key)
    arch = "".join(chr(int(round(c))) for c in tensors["meta/arch"])
    n_choices = int(round(float(tensors["meta/n_choices"][0])))
    camera = _camera_from_meta(tensors["meta/camera"])
    pairs = tensors["meta/candidates"]
    candidates = None
    if pairs.size:
        candidates = CandidateSet(
            pairs=[(int(round(i)), int(round(j))) for i, j in pairs])
    net = build_net(arch, n_choices, seed=0, n_cameras=camera.count,
                    map_height=camera.heatmap_height,
                    map_width=camera.heatmap_width)
    params = dict(net.named_parameters())
    stored = [name for name in order if not name.startswith("meta/")]
    if sorted(stored) != sorted(params):
        raise ValueError("model parameters do not match the %r architecture"
                         % arch)
    for name in stored:
        if params[name].data.shape != tensors[name].shape:
            raise ValueError("shape mismatch for %s" % name)
        params[name].data = tensors[name].copy()
    return net, candidates, camera
