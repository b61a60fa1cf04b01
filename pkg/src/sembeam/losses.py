"""Training objectives for heatmap prediction and beam selection.

All losses are plain sums over their elements (no averaging), so batch
handling is the caller's choice.  Heatmap tensors carry the detection
channels first and the strength channels second along the channel axis.
"""

import numpy as np

from . import autograd as ag

EPS = 1e-7


def loss_distribution(pred, target):
    """Penalty-reduced focal loss on the detection channels.

    Cells where the target is exactly 1 contribute
    ``(1 - p)^2 log p``; all others contribute
    ``(1 - t)^4 p^2 log(1 - p)``.  The result is the negated sum.
    """
    pred = ag.ensure_tensor(pred)
    target = np.asarray(target, dtype=np.float64)
    if pred.data.shape != target.shape:
        raise ValueError("shape mismatch")
    positive = (target == 1.0).astype(np.float64)
    p = ag.clip(pred, EPS, 1.0 - EPS)
    pos_term = ag.mul(positive, ag.mul(ag.power(1.0 - p, 2.0), ag.log(p)))
    neg_weight = (1.0 - positive) * (1.0 - target) ** 4
    neg_term = ag.mul(neg_weight, ag.mul(ag.power(p, 2.0), ag.log(1.0 - p)))
    return ag.mul(ag.tensor_sum(ag.add(pos_term, neg_term)), -1.0)


def loss_strength(pred, target):
    """Sum of squared errors on the strength channels."""
    pred = ag.ensure_tensor(pred)
    target = np.asarray(target, dtype=np.float64)
    if pred.data.shape != target.shape:
        raise ValueError("shape mismatch")
    return ag.tensor_sum(ag.power(pred - target, 2.0))


def loss_heatmap(pred, target, n_cameras=4):
    """Focal loss on the first ``n_cameras`` channels plus squared error on the rest."""
    pred = ag.ensure_tensor(pred)
    target = np.asarray(target, dtype=np.float64)
    if pred.data.shape != target.shape:
        raise ValueError("shape mismatch")
    axis = pred.data.ndim - 3
    if pred.data.shape[axis] != 2 * n_cameras:
        raise ValueError("expected %d heatmap channels" % (2 * n_cameras,))
    pred_d = ag.narrow(pred, axis, 0, n_cameras)
    pred_s = ag.narrow(pred, axis, n_cameras, n_cameras)
    index = [slice(None)] * target.ndim
    index[axis] = slice(0, n_cameras)
    target_d = target[tuple(index)]
    index[axis] = slice(n_cameras, 2 * n_cameras)
    target_s = target[tuple(index)]
    return ag.add(loss_distribution(pred_d, target_d),
                  loss_strength(pred_s, target_s))


def loss_beam(pred, gains, optimal_index, beta=0.8):
    """Weighted cross entropy against the one-hot optimum and the gain profile.

    ``pred`` holds softmax rows of shape (batch, n_choices); ``gains``
    the matching non-negative power gains, normalized per row to a
    distribution; ``optimal_index`` the per-row argmax class.  ``beta``
    blends the soft target (weight ``beta``) with the hard one-hot
    target (weight ``1 - beta``).
    """
    if not 0.0 <= beta <= 1.0:
        raise ValueError("beta must lie in [0, 1]")
    pred = ag.ensure_tensor(pred)
    gains = np.asarray(gains, dtype=np.float64)
    if pred.data.ndim != 2 or pred.data.shape != gains.shape:
        raise ValueError("pred and gains must be matching 2-D arrays")
    if np.any(gains < 0.0):
        raise ValueError("gains must be non-negative")
    totals = gains.sum(axis=1)
    if np.any(totals <= 0.0):
        raise ValueError("every row needs positive total gain")
    soft = gains / totals[:, None]
    rows = np.arange(pred.data.shape[0])
    classes = np.asarray(optimal_index, dtype=int)
    if np.any(classes < 0) or np.any(classes >= gains.shape[1]):
        raise ValueError("optimal_index out of range")
    hard = np.zeros_like(gains)
    hard[rows, classes] = 1.0
    logp = ag.log(ag.clip(pred, EPS, 1.0))
    hard_term = ag.tensor_sum(ag.mul(hard, logp))
    soft_term = ag.tensor_sum(ag.mul(soft, logp))
    return ag.add(ag.mul(hard_term, -(1.0 - beta)), ag.mul(soft_term, -beta))


def loss_all(pred_beam, gains, optimal_index, pred_maps, target_maps,
             beta=0.8, n_cameras=4):
    """Joint objective: beam selection plus heatmap prediction."""
    return ag.add(loss_beam(pred_beam, gains, optimal_index, beta=beta),
                  loss_heatmap(pred_maps, target_maps, n_cameras=n_cameras))
