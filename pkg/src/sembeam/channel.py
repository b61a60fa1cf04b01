"""Geometric multipath channel: planar-array steering vectors and channel assembly."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class NoPathsError(ValueError):
    """Raised when an operation that needs at least one propagation path gets none."""


@dataclass(frozen=True)
class ArrayGeometry:
    """Uniform planar array, n_a elements along the vertical axis, n_b along the horizontal."""

    n_a: int
    n_b: int

    def __post_init__(self):
        if self.n_a < 1 or self.n_b < 1:
            raise ValueError("array dimensions must be positive, got %dx%d" % (self.n_a, self.n_b))

    @property
    def size(self) -> int:
        return self.n_a * self.n_b


@dataclass
class PathComponent:
    """One specular propagation path between the two terminals.

    Angles are in radians. Elevation is measured from the zenith (+z), so values
    slightly above 90 degrees point slightly below the horizon. Azimuth is measured
    from +x, counter-clockwise. Arrival azimuth is expressed in the receiver's local
    (vehicle) frame and departure azimuth in the transmitter's local frame, so both
    line up with locally mounted arrays and cameras. last_hop_point stays in world
    coordinates; for a line-of-sight path it is the transmitter position.
    """

    gain: complex
    aoa_elevation: float
    aoa_azimuth: float
    aod_elevation: float
    aod_azimuth: float
    path_length: float
    bounce_count: int
    last_hop_point: np.ndarray
    is_los: bool


def steering_vector(geom: ArrayGeometry, elevation: float, azimuth: float) -> np.ndarray:
    """Unit-norm steering vector of a half-wavelength-spaced planar array.

    Element (a, b) sits at flat index a * n_b + b and carries phase
    pi * (a*cos(elevation) + b*sin(elevation)*sin(azimuth)).
    """
    a = np.arange(geom.n_a)[:, None]
    b = np.arange(geom.n_b)[None, :]
    phase = np.pi * (a * np.cos(elevation) + b * np.sin(elevation) * np.sin(azimuth))
    v = np.exp(1j * phase) / np.sqrt(geom.size)
    return v.reshape(geom.size)


def channel_from_paths(paths, rx: ArrayGeometry, tx: ArrayGeometry) -> np.ndarray:
    """Narrowband channel matrix: sum over paths of gain * a_rx a_tx^H.

    Returns an (rx.size, tx.size) complex array. Paths are accumulated in list
    order, so the result is an exact floating-point sum in a fixed order.
    """
    paths = list(paths)
    if not paths:
        raise NoPathsError("cannot assemble a channel from zero paths")
    h = np.zeros((rx.size, tx.size), dtype=complex)
    for p in paths:
        a_rx = steering_vector(rx, p.aoa_elevation, p.aoa_azimuth)
        a_tx = steering_vector(tx, p.aod_elevation, p.aod_azimuth)
        h += p.gain * np.outer(a_rx, a_tx.conj())
    return h


def relative_powers(paths) -> np.ndarray:
    """Per-path power relative to the strongest path: |gain|^2 / max |gain|^2."""
    paths = list(paths)
    if not paths:
        raise NoPathsError("no paths to normalize")
    p = np.array([abs(pc.gain) ** 2 for pc in paths], dtype=float)
    peak = p.max()
    if peak == 0.0:
        raise ValueError("all path gains are zero")
    return p / peak
