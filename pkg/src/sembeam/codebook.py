"""Beam codebooks on an azimuth grid, pair gain sweeps, and candidate-set pruning."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .channel import ArrayGeometry, steering_vector


@dataclass
class Codebook:
    """A bank of steering vectors at a fixed elevation, one per grid azimuth."""

    vectors: np.ndarray  # (size, n_elements) complex, unit-norm rows
    azimuths: np.ndarray  # (size,) radians
    fixed_elevation: float
    geometry: ArrayGeometry

    @property
    def size(self) -> int:
        return self.vectors.shape[0]

    @property
    def n_elements(self) -> int:
        return self.vectors.shape[1]


def build_codebook(geom: ArrayGeometry, size: int, fixed_elevation: float) -> Codebook:
    """Steering vectors on the azimuth grid (2i - C - 1) / (2C) * pi, i = 1..C.

    The grid is symmetric about broadside and stays strictly inside
    (-pi/2, pi/2). Beam index 0 is the most negative azimuth.
    """
    if size < 1:
        raise ValueError("codebook size must be >= 1, got %d" % size)
    i = np.arange(1, size + 1)
    azimuths = (2 * i - size - 1) / (2 * size) * np.pi
    vectors = np.stack([steering_vector(geom, fixed_elevation, az) for az in azimuths])
    return Codebook(vectors=vectors, azimuths=azimuths, fixed_elevation=fixed_elevation, geometry=geom)


def beam_pair_gains(h: np.ndarray, tx_codebook: Codebook, rx_codebook: Codebook) -> np.ndarray:
    """Power gain |w_rx^H H w_tx|^2 for every beam pair.

    Returns gains with shape (tx_codebook.size, rx_codebook.size); gains[i, j]
    pairs transmit beam i with receive beam j. The receive projection w^H H is
    formed once per receive beam, so the sweep costs two matrix products rather
    than a quadratic number of quadratic forms.
    """
    n_rx, n_tx = h.shape
    if rx_codebook.n_elements != n_rx or tx_codebook.n_elements != n_tx:
        raise ValueError(
            "channel is %dx%d but codebooks have %d rx / %d tx elements"
            % (n_rx, n_tx, rx_codebook.n_elements, tx_codebook.n_elements)
        )
    proj = rx_codebook.vectors.conj() @ h  # (C_rx, n_tx)
    amps = proj @ tx_codebook.vectors.T  # (C_rx, C_tx); [j, i] = w_j^H H w_i
    return np.abs(amps.T) ** 2


@dataclass
class CandidateSet:
    """Beam pairs that were optimal often enough to stay in the classifier's label space."""

    pairs: list = field(default_factory=list)  # [(tx, rx)] sorted ascending, unique
    min_count: int = 3

    def __post_init__(self):
        self.pairs = [tuple(int(v) for v in p) for p in self.pairs]
        if len(set(self.pairs)) != len(self.pairs):
            raise ValueError("candidate pairs must be unique")
        if self.pairs != sorted(self.pairs):
            raise ValueError("candidate pairs must be sorted by (tx, rx)")
        self._index = {p: k for k, p in enumerate(self.pairs)}

    def __len__(self) -> int:
        return len(self.pairs)

    def index_of(self, pair):
        """Position of a pair in the candidate ordering, or None if not a candidate."""
        return self._index.get(tuple(int(v) for v in pair))


def build_candidate_set(labels, min_count: int = 3) -> CandidateSet:
    """Keep every pair that appears as an optimal label strictly more than min_count times."""
    if min_count < 0:
        raise ValueError("min_count must be >= 0")
    counts = Counter(tuple(int(v) for v in lab) for lab in labels)
    pairs = sorted(p for p, c in counts.items() if c > min_count)
    if not pairs:
        raise ValueError(
            "no beam pair was optimal more than %d times; lower min_count or add data" % min_count
        )
    return CandidateSet(pairs=pairs, min_count=min_count)


def _eligible_pairs(gains: np.ndarray, candidates: CandidateSet | None):
    if candidates is None:
        n_tx, n_rx = gains.shape
        return [(i, j) for i in range(n_tx) for j in range(n_rx)]
    for i, j in candidates.pairs:
        if not (0 <= i < gains.shape[0] and 0 <= j < gains.shape[1]):
            raise ValueError("candidate pair (%d, %d) is outside the gain grid" % (i, j))
    return candidates.pairs


def optimal_pair(gains: np.ndarray, candidates: CandidateSet | None = None):
    """Best (tx, rx) beam pair; ties resolve to the smallest tx index, then rx.

    With a candidate set, the argmax is restricted to candidate pairs.
    """
    if candidates is None:
        flat = int(np.argmax(gains))  # first max in row-major order == smallest (tx, rx)
        return (flat // gains.shape[1], flat % gains.shape[1])
    pairs = _eligible_pairs(gains, candidates)
    vals = np.array([gains[i, j] for i, j in pairs])
    return pairs[int(np.argmax(vals))]  # pairs are (tx, rx)-sorted, argmax keeps the first


def top_k_pairs(gains: np.ndarray, k: int, candidates: CandidateSet | None = None):
    """k best beam pairs in descending gain order, ties toward smaller (tx, rx).

    The result is prefix-consistent: top_k_pairs(g, k) == top_k_pairs(g, k+1)[:k].
    """
    pairs = _eligible_pairs(gains, candidates)
    if not 1 <= k <= len(pairs):
        raise ValueError("k must be in [1, %d], got %d" % (len(pairs), k))
    vals = np.array([gains[i, j] for i, j in pairs])
    order = np.argsort(-vals, kind="stable")[:k]  # stable sort keeps (tx, rx) order on ties
    return [pairs[int(idx)] for idx in order]
