"""Two-phase training: classification pretrain, then triplet fine-tune.

Phase one minimizes cross entropy over class labels (SGD, lr 0.01,
momentum 0.9 by default). Phase two resumes from a phase-one model and
descends the triplet loss at lr 0.001 on identity-labelled batches sampled
as P identities x K views, mined densely within the batch. Everything is
seeded; single-threaded runs are bit-reproducible.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset
from .errors import DataError, NumericError
from .groups import group_spec, rotate_feature_map
from .losses import dense_triplet_mine, triplet_loss
from .model import Model
from .nn import cross_entropy
from .optim import Sgd
from .prng import Prng, derive_seed
from .tensor import no_grad


@dataclass
class TrainConfig:
    phase: str = "classify"
    epochs: int = 30
    batch_size: int = 32
    lr: float = 0.01
    momentum: float = 0.9
    margin: float = 0.2
    split_ratio: float = 0.7
    seed: int = 777
    rotation_augment: bool = False
    identities_per_batch: int = 8
    views_per_identity: int = 4
    allow_cold_start: bool = False

    def __post_init__(self):
        if self.phase not in ("classify", "retrieve"):
            raise ValueError(f"unknown phase {self.phase!r}")
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if not 0.0 < self.split_ratio < 1.0:
            raise ValueError("split_ratio must be in (0, 1)")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")


@dataclass
class EpochMetrics:
    epoch: int
    phase: str
    loss: float
    score: float  # validation accuracy (classify) or violating fraction (retrieve)
    wall_seconds: float = 0.0


def metrics_to_tsv(rows: list[EpochMetrics], log_timing: bool = False) -> str:
    """Five tab-separated columns; the timing column is '-' unless enabled,
    keeping the log byte-identical across reruns of the same seed."""
    lines = []
    for r in rows:
        wall = f"{r.wall_seconds:.3f}" if log_timing else "-"
        lines.append(f"{r.epoch}\t{r.phase}\t{r.loss:.6f}\t{r.score:.6f}\t{wall}")
    return "\n".join(lines) + "\n"


def split_dataset(ds: Dataset, ratio: float, seed: int) -> tuple[Dataset, Dataset]:
    """Per-class stratified split: seeded shuffle then prefix split."""
    if len(ds) == 0:
        raise DataError("cannot split an empty dataset")
    train_idx: list[int] = []
    val_idx: list[int] = []
    for c in np.unique(ds.class_ids).tolist():
        members = np.nonzero(ds.class_ids == c)[0].tolist()
        if len(members) < 2:
            raise DataError(f"class {c} has {len(members)} sample(s); "
                            "cannot stratify a split")
        prng = Prng(derive_seed(seed, 11, c))
        prng.shuffle(members)
        cut = int(np.floor(ratio * len(members) + 0.5))
        cut = min(max(cut, 1), len(members) - 1)
        train_idx.extend(members[:cut])
        val_idx.extend(members[cut:])
    return ds.subset(sorted(train_idx)), ds.subset(sorted(val_idx))


def augment_rotate(images: np.ndarray, prng: Prng) -> np.ndarray:
    """Rotate each sample independently by a uniform draw from the four
    90-degree multiples. Exact index permutation, no interpolation."""
    if images.shape[-1] != images.shape[-2]:
        raise ValueError("rotation augmentation requires square images")
    spec = group_spec("p4")
    out = np.empty_like(images)
    for i in range(images.shape[0]):
        out[i] = rotate_feature_map(images[i], spec, prng.randint(4))
    return out


def _check_finite(loss_value: float, context: str) -> None:
    if not np.isfinite(loss_value):
        raise NumericError(f"non-finite loss during {context}; aborting")


def train_classification(model: Model, dataset: Dataset, cfg: TrainConfig
                         ) -> list[EpochMetrics]:
    if cfg.phase != "classify":
        raise ValueError("train_classification requires phase == 'classify'")
    train_ds, val_ds = split_dataset(dataset, cfg.split_ratio, derive_seed(cfg.seed, 1))
    # Phase one trains the trunk and the classification head only.
    params = {name: p for name, p in model.named_parameters().items()
              if not name.startswith("head_emb.")}
    opt = Sgd(params, cfg.lr, cfg.momentum)
    metrics = []
    for epoch in range(cfg.epochs):
        t0 = time.perf_counter()
        order = list(range(len(train_ds)))
        Prng(derive_seed(cfg.seed, 2, epoch)).shuffle(order)
        aug_prng = Prng(derive_seed(cfg.seed, 3, epoch))
        losses = []
        for start in range(0, len(order), cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            images = train_ds.images[idx]
            if cfg.rotation_augment:
                images = augment_rotate(images, aug_prng)
            logits = model.forward_classify(images, training=True)
            loss = cross_entropy(logits, train_ds.class_ids[idx])
            _check_finite(loss.item(), "classification training")
            model.zero_grad()
            loss.backward()
            opt.step()
            losses.append(loss.item())
        val_acc = evaluate_accuracy(model, val_ds, cfg.batch_size)
        metrics.append(EpochMetrics(epoch, "classify", float(np.mean(losses)),
                                    val_acc, time.perf_counter() - t0))
    model.phase1_done = True
    return metrics


def evaluate_accuracy(model: Model, ds: Dataset, batch_size: int = 32) -> float:
    correct = 0
    with no_grad():
        for start in range(0, len(ds), batch_size):
            logits = model.forward_classify(ds.images[start : start + batch_size],
                                            training=False)
            pred = logits.data.argmax(axis=1)
            correct += int((pred == ds.class_ids[start : start + batch_size]).sum())
    return correct / max(len(ds), 1)


def _identity_views(ds: Dataset) -> dict[int, list[int]]:
    groups: dict[int, list[int]] = {}
    for i, ident in enumerate(ds.instance_ids.tolist()):
        groups.setdefault(ident, []).append(i)
    return {k: v for k, v in groups.items() if len(v) >= 2}


def train_retrieval(model: Model, dataset: Dataset, cfg: TrainConfig
                    ) -> list[EpochMetrics]:
    if cfg.phase != "retrieve":
        raise ValueError("train_retrieval requires phase == 'retrieve'")
    if not model.phase1_done and not cfg.allow_cold_start:
        raise DataError("retrieval fine-tuning requires a classification-pretrained "
                        "model (two-step training); pass allow_cold_start to override")
    groups = _identity_views(dataset)
    if len(groups) < 2:
        raise DataError("retrieval training needs >= 2 identities with >= 2 views each")
    # Fine-tune the trunk and the embedding head; the classification head
    # stays as phase one left it.
    params = {name: p for name, p in model.named_parameters().items()
              if not name.startswith("head_cls.")}
    opt = Sgd(params, cfg.lr, cfg.momentum)
    identities = sorted(groups)
    metrics = []
    for epoch in range(cfg.epochs):
        t0 = time.perf_counter()
        prng = Prng(derive_seed(cfg.seed, 5, epoch))
        order = identities[:]
        prng.shuffle(order)
        losses = []
        kept_total = 0
        candidates_total = 0
        for start in range(0, len(order) - len(order) % cfg.identities_per_batch,
                           cfg.identities_per_batch):
            chosen = order[start : start + cfg.identities_per_batch]
            batch_idx = []
            for ident in chosen:
                views = groups[ident][:]
                prng.shuffle(views)
                batch_idx.extend(views[: cfg.views_per_identity])
            images = dataset.images[batch_idx]
            if cfg.rotation_augment:
                images = augment_rotate(images, prng)
            labels = dataset.instance_ids[batch_idx]
            emb = model.forward_embed(images, training=True)
            batch = dense_triplet_mine(emb.data, labels, cfg.margin)
            candidates_total += _candidate_count(labels)
            kept_total += len(batch.triples)
            if not batch.triples:
                losses.append(0.0)
                continue
            a, p, n = batch.arrays()
            loss = triplet_loss(emb.index_select(a), emb.index_select(p),
                                emb.index_select(n), cfg.margin)
            _check_finite(loss.item(), "retrieval training")
            model.zero_grad()
            loss.backward()
            opt.step()
            losses.append(loss.item())
        viol = kept_total / max(candidates_total, 1)
        metrics.append(EpochMetrics(epoch, "retrieve", float(np.mean(losses)),
                                    viol, time.perf_counter() - t0))
    return metrics


def _candidate_count(labels: np.ndarray) -> int:
    _, counts = np.unique(labels, return_counts=True)
    total = len(labels)
    count = 0
    for c in counts:
        count += c * (c - 1) * (total - c)
    return int(count)
