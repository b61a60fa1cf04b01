"""Input feature construction for the predictors."""

import math

import numpy as np


def positional_encoding(value, n_octaves=5):
    """Interleaved sin/cos encoding: (sin(pi v), cos(pi v), sin(2 pi v), ...).

    Frequencies double per octave starting at pi; the input should be
    pre-scaled to roughly [-1, 1].
    """
    if n_octaves < 1:
        raise ValueError("need at least one octave")
    out = np.empty(2 * n_octaves)
    for k in range(n_octaves):
        angle = (2.0 ** k) * math.pi * value
        out[2 * k] = math.sin(angle)
        out[2 * k + 1] = math.cos(angle)
    return out


def assemble_location_vector(scene, n_octaves=5):
    """Receiver pose as a 23-dim vector: encoded x, encoded y, z, cos/sin yaw.

    Coordinates are taken relative to the base station, then the planar
    ones are scaled by the area half-dimensions so the encodings see
    values in roughly [-1, 1]; height stays in meters.
    """
    delta = np.asarray(scene.ms_position, dtype=float) - scene.bs_position
    x_norm = delta[0] / (scene.area.length / 2.0)
    y_norm = delta[1] / (scene.area.width / 2.0)
    return np.concatenate([
        positional_encoding(x_norm, n_octaves),
        positional_encoding(y_norm, n_octaves),
        [delta[2], math.cos(scene.ms_yaw), math.sin(scene.ms_yaw)],
    ])
