"""Activation-map visualization over the last group-convolution stage.

The heatmap is a channel-weighted sum of the group-pooled final stage
activations: classification maps use the class row of the classification
head, retrieval maps back-project a retrieved database embedding through
the embedding head. For group variants the map rotates with the input.
"""

from __future__ import annotations

import numpy as np

from .gconv import group_pool
from .model import Model
from .tensor import no_grad


def compute_cam(model: Model, image: np.ndarray, target) -> np.ndarray:
    """Heatmap in [0, 1] of shape H' x W' (the final stage resolution).

    target is ("class", k) for classification maps or
    ("retrieval", embedding) to show the regions supporting a retrieved
    database embedding. A constant map normalizes to all zeros (min-max
    convention).
    """
    img = np.asarray(image.data if hasattr(image, "data") else image, dtype=np.float32)
    if img.ndim == 3:
        img = img[None]
    with no_grad():
        fm, _, _ = model.forward_features(img, training=False)
        maps = group_pool(fm).data[0]  # (C, H', W')
    kind = target[0]
    if kind == "class":
        k = int(target[1])
        weight = model.head_cls.weight.data
        if not 0 <= k < weight.shape[0]:
            raise ValueError(f"class {k} outside the classification head")
        coeff = weight[k]
    elif kind == "retrieval":
        emb = np.asarray(target[1], dtype=model.head_emb.weight.data.dtype).reshape(-1)
        weight = model.head_emb.weight.data  # (D, C)
        if emb.shape[0] != weight.shape[0]:
            raise ValueError("retrieval embedding does not match the embedding head")
        coeff = weight.T @ emb
    else:
        raise ValueError(f"unknown CAM target kind {kind!r}")
    cam = np.einsum("c,chw->hw", coeff.astype(np.float64), maps.astype(np.float64))
    lo, hi = cam.min(), cam.max()
    if hi - lo <= 0:
        return np.zeros_like(cam)
    return (cam - lo) / (hi - lo)


def colorize_heatmap(heatmap: np.ndarray) -> np.ndarray:
    """Blue-to-red colormap as a 3 x H x W image: R=x, B=1-x, G=min(x, 1-x)."""
    h = np.asarray(heatmap, dtype=np.float64)
    if h.min() < 0 or h.max() > 1:
        raise ValueError("heatmap values must lie in [0, 1]")
    return np.stack([h, np.minimum(h, 1.0 - h), 1.0 - h]).astype(np.float32)
