"""Seeded minibatch training for the beam and heatmap predictors.

Heatmaps and silhouette images are rasterized per batch from the
lightweight sample records, so datasets stay small in memory.  Every
source of randomness (parameter init, shuffling) derives from the
config seed, making runs bit-reproducible.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import autograd as ag
from .losses import loss_all, loss_beam, loss_heatmap
from .nets import build_net
from .semantics import CameraConfig, rasterize_heatmaps, rasterize_pseudo_image


@dataclass
class TrainConfig:
    epochs: int = 30
    batch_size: int = 32
    learning_rate: float = 0.05
    momentum: float = 0.9
    beta: float = 0.8  # soft-target weight in the beam loss
    seed: int = 0
    plateau_patience: int = 5  # epochs without improvement before halving lr; 0 disables
    camera: CameraConfig = field(default_factory=CameraConfig)

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("bad epoch or batch settings")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError("beta must lie in [0, 1]")


class MomentumSGD:
    """Classical momentum; velocity carries straight across epochs."""

    def __init__(self, parameters, learning_rate, momentum=0.9):
        self.parameters = list(parameters)
        self.velocity = [np.zeros_like(p.data) for p in self.parameters]
        self.learning_rate = float(learning_rate)
        self.momentum = float(momentum)

    def step(self):
        for param, vel in zip(self.parameters, self.velocity):
            if param.grad is None:
                continue
            vel *= self.momentum
            vel += param.grad
            param.data -= self.learning_rate * vel


def _sample_maps(sample, camera, index=0, map_transform=None):
    maps = rasterize_heatmaps(sample.projections, camera)
    if map_transform is not None:
        maps = map_transform(maps, index)
    return maps.stacked()


def _beam_inputs(samples, indices, camera, with_maps, map_transform=None):
    maps = None
    if with_maps:
        maps = np.stack([_sample_maps(samples[i], camera, i, map_transform)
                         for i in indices])
    locations = np.stack([samples[i].location for i in indices])
    gains = np.stack([samples[i].gains for i in indices])
    optimal = np.array([samples[i].optimal_index for i in indices], dtype=int)
    return maps, locations, gains, optimal


def _forward_beam(net, maps, locations):
    if net.arch == "location":
        return net(ag.Tensor(locations))
    return net(ag.Tensor(maps), ag.Tensor(locations))


def predict_beam(net, samples, camera=None, batch_size=64, map_transform=None):
    """Class probabilities for every sample, shape (n_samples, n_choices).

    ``map_transform(heatmap, sample_index)`` can rewrite each sample's
    heatmaps before they reach the net (used for robustness studies).
    """
    camera = camera or CameraConfig()
    with_maps = net.arch != "location"
    rows = []
    for start in range(0, len(samples), batch_size):
        indices = range(start, min(start + batch_size, len(samples)))
        maps, locations, _, _ = _beam_inputs(samples, indices, camera,
                                             with_maps, map_transform)
        rows.append(_forward_beam(net, maps, locations).data)
    return np.concatenate(rows, axis=0)


def _trace_row(epoch, split, loss, top1):
    return {"epoch": epoch, "split": split, "loss": float(loss),
            "top1": float(top1)}


def _run_plateau(state, epoch_loss, optimizer, patience):
    if patience <= 0:
        return
    if epoch_loss < state["best"] - 1e-12:
        state["best"] = epoch_loss
        state["stale"] = 0
    else:
        state["stale"] += 1
        if state["stale"] >= patience:
            optimizer.learning_rate *= 0.5
            state["stale"] = 0


def train_beam_selector(samples, config, val_samples=None, arch="beam_selector"):
    """Train a beam predictor ('beam_selector' or 'location') from samples.

    Returns the trained net and a list of per-epoch trace rows with
    mean per-sample loss and top-1 accuracy for each split.
    """
    if not samples:
        raise ValueError("no training samples")
    n_choices = len(samples[0].gains)
    net = build_net(arch, n_choices, config.seed,
                    n_cameras=config.camera.count,
                    map_height=config.camera.heatmap_height,
                    map_width=config.camera.heatmap_width)
    rng = np.random.default_rng(config.seed + 1)
    optimizer = MomentumSGD([p for _, p in net.named_parameters()],
                            config.learning_rate, config.momentum)
    with_maps = arch != "location"
    trace = []
    plateau = {"best": math.inf, "stale": 0}
    for epoch in range(config.epochs):
        order = rng.permutation(len(samples))
        total_loss = 0.0
        total_hits = 0
        for start in range(0, len(samples), config.batch_size):
            indices = order[start:start + config.batch_size]
            maps, locations, gains, optimal = _beam_inputs(
                samples, indices, config.camera, with_maps)
            pred = _forward_beam(net, maps, locations)
            loss = ag.mul(loss_beam(pred, gains, optimal, beta=config.beta),
                          1.0 / len(indices))
            loss.backward()
            optimizer.step()
            total_loss += loss.item() * len(indices)
            total_hits += int(np.sum(pred.data.argmax(axis=1) == optimal))
        epoch_loss = total_loss / len(samples)
        trace.append(_trace_row(epoch, "train", epoch_loss,
                                total_hits / len(samples)))
        if val_samples:
            val_loss, val_top1 = _score_beam(net, val_samples, config)
            trace.append(_trace_row(epoch, "val", val_loss, val_top1))
        _run_plateau(plateau, epoch_loss, optimizer, config.plateau_patience)
    return net, trace


def _score_beam(net, samples, config):
    with_maps = net.arch != "location"
    total_loss = 0.0
    hits = 0
    for start in range(0, len(samples), config.batch_size):
        indices = range(start, min(start + config.batch_size, len(samples)))
        maps, locations, gains, optimal = _beam_inputs(
            samples, indices, config.camera, with_maps)
        pred = _forward_beam(net, maps, locations)
        loss = loss_beam(pred, gains, optimal, beta=config.beta)
        total_loss += loss.item()
        hits += int(np.sum(pred.data.argmax(axis=1) == optimal))
    return total_loss / len(samples), hits / len(samples)


def _semantic_inputs(samples, indices, camera):
    images = np.stack([rasterize_pseudo_image(samples[i].scene, camera)
                       for i in indices])
    locations = np.stack([samples[i].location for i in indices])
    targets = np.stack([_sample_maps(samples[i], camera) for i in indices])
    return images, locations, targets


def train_semantics(samples, config):
    """Train the heatmap predictor on silhouette images; returns (net, trace)."""
    if not samples:
        raise ValueError("no training samples")
    net = build_net("semantics", 0, config.seed,
                    n_cameras=config.camera.count,
                    map_height=config.camera.heatmap_height,
                    map_width=config.camera.heatmap_width)
    rng = np.random.default_rng(config.seed + 1)
    optimizer = MomentumSGD([p for _, p in net.named_parameters()],
                            config.learning_rate, config.momentum)
    trace = []
    plateau = {"best": math.inf, "stale": 0}
    for epoch in range(config.epochs):
        order = rng.permutation(len(samples))
        total_loss = 0.0
        for start in range(0, len(samples), config.batch_size):
            indices = order[start:start + config.batch_size]
            images, locations, targets = _semantic_inputs(
                samples, indices, config.camera)
            pred = net(ag.Tensor(images), ag.Tensor(locations))
            loss = ag.mul(loss_heatmap(pred, targets,
                                       n_cameras=config.camera.count),
                          1.0 / len(indices))
            loss.backward()
            optimizer.step()
            total_loss += loss.item() * len(indices)
        epoch_loss = total_loss / len(samples)
        trace.append(_trace_row(epoch, "train", epoch_loss, math.nan))
        _run_plateau(plateau, epoch_loss, optimizer, config.plateau_patience)
    return net, trace


def train_joint(samples, config, val_samples=None):
    """Train the end-to-end image+location predictor; returns (net, trace)."""
    if not samples:
        raise ValueError("no training samples")
    n_choices = len(samples[0].gains)
    net = build_net("joint", n_choices, config.seed,
                    n_cameras=config.camera.count,
                    map_height=config.camera.heatmap_height,
                    map_width=config.camera.heatmap_width)
    rng = np.random.default_rng(config.seed + 1)
    optimizer = MomentumSGD([p for _, p in net.named_parameters()],
                            config.learning_rate, config.momentum)
    trace = []
    plateau = {"best": math.inf, "stale": 0}
    for epoch in range(config.epochs):
        order = rng.permutation(len(samples))
        total_loss = 0.0
        total_hits = 0
        for start in range(0, len(samples), config.batch_size):
            indices = order[start:start + config.batch_size]
            images, locations, targets = _semantic_inputs(
                samples, indices, config.camera)
            gains = np.stack([samples[i].gains for i in indices])
            optimal = np.array([samples[i].optimal_index for i in indices],
                               dtype=int)
            maps, pred = net(ag.Tensor(images), ag.Tensor(locations))
            loss = ag.mul(loss_all(pred, gains, optimal, maps, targets,
                                   beta=config.beta,
                                   n_cameras=config.camera.count),
                          1.0 / len(indices))
            loss.backward()
            optimizer.step()
            total_loss += loss.item() * len(indices)
            total_hits += int(np.sum(pred.data.argmax(axis=1) == optimal))
        epoch_loss = total_loss / len(samples)
        trace.append(_trace_row(epoch, "train", epoch_loss,
                                total_hits / len(samples)))
        _run_plateau(plateau, epoch_loss, optimizer, config.plateau_patience)
    return net, trace
