"""Beam-selection quality metrics and the power-threshold sweep.

Accuracy A(K) counts a sample as a hit when the swept optimal pair
appears in the model's K highest-probability candidates.  Throughput
ratio T(K) averages, per sample, the best power gain among those K
candidates divided by the optimal gain, so T(K) >= A(K) holds at every
K by construction.  Both are reported overall and stratified by LOS.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .dataset import build_samples
from .semantics import (DEFAULT_DETECTION_THRESHOLD, CameraConfig,
                        corrupt_heatmaps, decode_heatmaps,
                        extract_effective_scatterers,
                        mean_effective_scatterers, precision_recall,
                        project_scatterers, rasterize_heatmaps)
from .train import predict_beam, train_beam_selector

PR_THRESHOLDS = (0.1, 0.2, 0.3, 0.5, 0.7, 0.9)


@dataclass
class MetricsReport:
    """Evaluation summary over one test set."""

    kmax: int
    accuracy: np.ndarray  # (kmax,), A(K) for K = 1..kmax
    throughput: np.ndarray
    accuracy_los: np.ndarray  # NaN-filled when the stratum is empty
    throughput_los: np.ndarray
    accuracy_nlos: np.ndarray
    throughput_nlos: np.ndarray
    n_effective: float
    precision: float
    recall: float
    pr_points: list = field(default_factory=list)  # (threshold, P, R)
    n_samples: int = 0
    n_los: int = 0
    n_nlos: int = 0


def _hits_and_ratios(probs, samples, kmax):
    """Per-sample hit indicators and gain ratios for K = 1..kmax."""
    n = len(samples)
    hits = np.zeros((n, kmax))
    ratios = np.zeros((n, kmax))
    for idx, sample in enumerate(samples):
        order = np.argsort(-probs[idx], kind="stable")[:kmax]
        best = np.maximum.accumulate(sample.gains[order])
        # the same factorized route produced both numbers, so a hit's
        # ratio is exactly 1; the clip only guards last-ulp drift
        ratio = np.minimum(best / sample.optimal_gain, 1.0)
        hit = np.zeros(kmax)
        if sample.optimal_index >= 0:
            where = np.nonzero(order == sample.optimal_index)[0]
            if where.size:
                hit[int(where[0]):] = 1.0
        k_have = len(order)
        hits[idx, :k_have] = hit[:k_have]
        hits[idx, k_have:] = hit[k_have - 1]
        ratios[idx, :k_have] = ratio
        ratios[idx, k_have:] = ratio[-1]
    return hits, ratios


def _stratum_mean(values, mask, kmax):
    if not np.any(mask):
        return np.full(kmax, np.nan)
    return values[mask].mean(axis=0)


def _heatmap_quality(samples, camera, map_noise, noise_seed, thresholds):
    """Mean detection precision/recall against the samples' own scatterers."""
    per_threshold = np.zeros((len(thresholds), 2))
    floor = min(thresholds)
    for idx, sample in enumerate(samples):
        maps = rasterize_heatmaps(sample.projections, camera)
        if map_noise > 0.0:
            rng = np.random.default_rng((noise_seed, idx))
            maps = corrupt_heatmaps(maps, map_noise, rng, config=camera)
        detections = decode_heatmaps(maps, threshold=floor)
        for t_idx, threshold in enumerate(thresholds):
            kept = [d for d in detections if d[3] >= threshold]
            per_threshold[t_idx] += precision_recall(kept, sample.projections)
    per_threshold /= len(samples)
    return [(float(t), float(p), float(r))
            for t, (p, r) in zip(thresholds, per_threshold)]


def evaluate(net, samples, kmax=10, camera=None, map_noise=0.0, noise_seed=0,
             pr_thresholds=PR_THRESHOLDS):
    """Score a trained net on test samples.

    ``map_noise`` > 0 feeds the net corrupted heatmaps (deterministic
    per ``noise_seed``) and scores detection PR on the same corrupted
    maps, emulating an imperfect first stage.
    """
    if not samples:
        raise ValueError("no evaluation samples")
    if kmax < 1:
        raise ValueError("kmax must be >= 1")
    camera = camera or CameraConfig()
    transform = None
    if map_noise > 0.0:
        def transform(maps, index):
            rng = np.random.default_rng((noise_seed, index))
            return corrupt_heatmaps(maps, map_noise, rng, config=camera)
    probs = predict_beam(net, samples, camera=camera, map_transform=transform)
    hits, ratios = _hits_and_ratios(probs, samples, kmax)
    los = np.array([s.is_los for s in samples], dtype=bool)
    thresholds = sorted(set(pr_thresholds) | {DEFAULT_DETECTION_THRESHOLD})
    pr_points = _heatmap_quality(samples, camera, map_noise, noise_seed,
                                 thresholds)
    summary = next(p for p in pr_points
                   if p[0] == DEFAULT_DETECTION_THRESHOLD)
    return MetricsReport(
        kmax=kmax,
        accuracy=hits.mean(axis=0),
        throughput=ratios.mean(axis=0),
        accuracy_los=_stratum_mean(hits, los, kmax),
        throughput_los=_stratum_mean(ratios, los, kmax),
        accuracy_nlos=_stratum_mean(hits, ~los, kmax),
        throughput_nlos=_stratum_mean(ratios, ~los, kmax),
        n_effective=mean_effective_scatterers(
            [s.projections for s in samples], camera.count),
        precision=summary[1],
        recall=summary[2],
        pr_points=pr_points,
        n_samples=len(samples),
        n_los=int(los.sum()),
        n_nlos=int((~los).sum()),
    )


def uniform_accuracy(n_candidates):
    """Top-1 accuracy of picking uniformly at random among the candidates."""
    if n_candidates < 1:
        raise ValueError("need at least one candidate")
    return 1.0 / n_candidates


@dataclass
class SweepRow:
    threshold_db: float
    accuracy1: float
    throughput1: float
    n_effective: float


def dataset_n_effective(records, camera, threshold_db):
    """Average in-view scatterers per camera over all non-outage records."""
    groups = []
    for record in records:
        if record.outage:
            continue
        scatterers = extract_effective_scatterers(record.paths, record.scene,
                                                  threshold_db)
        groups.append(project_scatterers(scatterers, record.scene, camera))
    if not groups:
        raise ValueError("every record is an outage")
    return mean_effective_scatterers(groups, camera.count)


def sweep_threshold(train_records, test_records, thresholds, candidates,
                    tx_codebook, rx_codebook, train_config):
    """Retrain and score the selector at each power threshold.

    Scatterers and heatmaps are re-extracted from stored paths at every
    threshold; the candidate set and beam labels do not depend on the
    threshold and stay fixed.  N_E is measured over all records.
    """
    if not thresholds:
        raise ValueError("no thresholds to sweep")
    rows = []
    camera = train_config.camera
    for threshold_db in thresholds:
        train_samples = build_samples(train_records, candidates, tx_codebook,
                                      rx_codebook, camera,
                                      power_threshold_db=threshold_db,
                                      drop_unlisted=True)
        test_samples = build_samples(test_records, candidates, tx_codebook,
                                     rx_codebook, camera,
                                     power_threshold_db=threshold_db,
                                     drop_unlisted=False)
        net, _ = train_beam_selector(train_samples, train_config)
        report = evaluate(net, test_samples, kmax=1, camera=camera)
        n_effective = dataset_n_effective(
            list(train_records) + list(test_records), camera, threshold_db)
        rows.append(SweepRow(threshold_db=float(threshold_db),
                             accuracy1=float(report.accuracy[0]),
                             throughput1=float(report.throughput[0]),
                             n_effective=float(n_effective)))
    return rows
