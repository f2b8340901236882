"""Metric-learning losses and within-batch triplet mining."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .tensor import Tensor, _node, relu


def triplet_loss(emb_a: Tensor, emb_p: Tensor, emb_n: Tensor, margin: float) -> Tensor:
    """Mean hinge on squared-distance difference with the given margin.

    The hinge gradient is zero at the kink (it is a relu).
    """
    if margin <= 0:
        raise ValueError("margin must be positive")
    if emb_a.shape != emb_p.shape or emb_a.shape != emb_n.shape:
        raise ValueError("triplet embeddings must share a shape")
    dp = emb_a - emb_p
    dn = emb_a - emb_n
    d_pos = (dp * dp).sum(axis=1)
    d_neg = (dn * dn).sum(axis=1)
    return relu(d_pos - d_neg + margin).mean()


def contrastive_loss(emb_1: Tensor, emb_2: Tensor, same: np.ndarray,
                     margin: float) -> Tensor:
    """Pull same-label pairs together, push different pairs past the margin.

    same pairs contribute squared distance, different pairs
    max(0, margin - distance)^2. Fused op: the distance root is never
    differentiated at zero (kink gradient defined as 0).
    """
    if margin <= 0:
        raise ValueError("margin must be positive")
    if emb_1.shape != emb_2.shape:
        raise ValueError("contrastive embeddings must share a shape")
    same = np.asarray(same, dtype=bool)
    n = emb_1.shape[0]
    if same.shape != (n,):
        raise ValueError("same must be a boolean vector matching the batch")
    diff = emb_1.data - emb_2.data
    d2 = (diff ** 2).sum(axis=1)
    d = np.sqrt(d2)
    hinge = np.maximum(margin - d, 0.0)
    per_pair = np.where(same, d2, hinge ** 2)
    out = _node(np.asarray(per_pair.mean(), dtype=emb_1.dtype), (emb_1, emb_2))
    if out.requires_grad:

        def bwd(g):
            with np.errstate(divide="ignore", invalid="ignore"):
                push = np.where(d > 0, -2.0 * hinge / d, 0.0)
            coef = np.where(same, 2.0, push) * (g / n)
            g1 = coef[:, None] * diff
            if emb_1.requires_grad:
                emb_1.accumulate_grad(g1)
            if emb_2.requires_grad:
                emb_2.accumulate_grad(-g1)

        out._backward = bwd
    return out


@dataclass
class TripletBatch:
    """Mined (anchor, positive, negative) index triples and their margin."""

    triples: list[tuple[int, int, int]]
    margin: float

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        if not self.triples:
            empty = np.zeros(0, dtype=np.int64)
            return empty, empty.copy(), empty.copy()
        t = np.asarray(self.triples, dtype=np.int64)
        return t[:, 0], t[:, 1], t[:, 2]


def dense_triplet_mine(embeddings, labels: np.ndarray, margin: float) -> TripletBatch:
    """Enumerate every valid (a, p, n) triple and keep the violating ones.

    A triple is valid when anchor and positive share a label (a != p) and
    the negative has a different label; it is kept when its hinge value is
    nonzero. Enumeration order is ascending (a, p, n). Raises when the
    batch admits no valid triple at all - that is a sampler bug, not an
    empty mining result.
    """
    emb = embeddings.data if isinstance(embeddings, Tensor) else np.asarray(embeddings)
    labels = np.asarray(labels)
    b = emb.shape[0]
    if labels.shape != (b,):
        raise ValueError("labels must match the batch size")
    counts = {}
    for lab in labels.tolist():
        counts[lab] = counts.get(lab, 0) + 1
    has_pair = any(c >= 2 for c in counts.values())
    if not has_pair or len(counts) < 2:
        raise DataError("batch admits no (anchor, positive, negative) triple; "
                        "check the batch sampler")
    d2 = ((emb[:, None, :] - emb[None, :, :]) ** 2).sum(axis=2)
    triples = []
    for a in range(b):
        for p in range(b):
            if p == a or labels[p] != labels[a]:
                continue
            for n_i in range(b):
                if labels[n_i] == labels[a]:
                    continue
                if d2[a, p] - d2[a, n_i] + margin > 0:
                    triples.append((a, p, n_i))
    return TripletBatch(triples, margin)
