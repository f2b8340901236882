"""Embedding database, exact nearest-neighbor search and Recall@n.

Search is exhaustive squared-Euclidean distance over unit-norm rows
(rank-equivalent to cosine), with deterministic ascending-id tie breaks.
The rotated protocol embeds the database as-is and each query after a
seeded 90-degree-multiple rotation, reporting the paired unrotated table
from the same seed alongside.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import DataError
from .groups import group_spec, rotate_feature_map
from .prng import Prng
from .tensor import no_grad


@dataclass
class EmbeddingIndex:
    embeddings: np.ndarray  # (M, D), unit-norm (or zero) rows
    ids: np.ndarray  # (M,) unique
    labels: np.ndarray  # (M,) identity labels

    def __len__(self) -> int:
        return self.embeddings.shape[0]


@dataclass
class RetrievalResult:
    query_id: int
    ranked_ids: np.ndarray
    distances: np.ndarray
    ranked_labels: np.ndarray


def build_index(embeddings, ids, labels) -> EmbeddingIndex:
    emb = np.asarray(embeddings, dtype=np.float64)
    ids = np.asarray(ids, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    if emb.ndim != 2 or emb.shape[0] != ids.shape[0] or ids.shape != labels.shape:
        raise ValueError("embeddings, ids and labels must have consistent lengths")
    if len(np.unique(ids)) != len(ids):
        raise DataError("duplicate ids in the embedding index")
    norms = np.linalg.norm(emb, axis=1, keepdims=True)
    emb = emb / np.where(norms > 0, norms, 1.0)
    return EmbeddingIndex(emb, ids, labels)


def query(index: EmbeddingIndex, embedding, n: int, query_id: int = -1) -> RetrievalResult:
    """Top-n by ascending squared Euclidean distance (exhaustive, exact)."""
    if len(index) == 0:
        raise DataError("query against an empty index")
    if n < 1:
        raise ValueError("n must be >= 1")
    q = np.asarray(embedding, dtype=np.float64).reshape(-1)
    d = ((index.embeddings - q) ** 2).sum(axis=1)
    order = np.lexsort((index.ids, d))  # distance first, id breaks ties
    top = order[: min(n, len(index))]
    return RetrievalResult(query_id, index.ids[top], d[top], index.labels[top])


def recall_at_n(results: list[RetrievalResult], query_labels,
                index: EmbeddingIndex, n_values: list[int]) -> dict[int, float]:
    """Percent of queries whose top-n contains their identity label."""
    query_labels = np.asarray(query_labels, dtype=np.int64)
    if len(results) != len(query_labels):
        raise ValueError("one label per query result required")
    if len(results) == 0:
        raise DataError("no queries to evaluate")
    present = set(index.labels.tolist())
    for lab in query_labels.tolist():
        if lab not in present:
            raise DataError(f"query label {lab} has no positive in the database")
    out = {}
    for n in n_values:
        if n < 1:
            raise ValueError("n values must be >= 1")
        hits = sum(1 for res, lab in zip(results, query_labels)
                   if lab in res.ranked_labels[:n])
        out[n] = 100.0 * hits / len(results)
    return out


def embed_dataset(model, images: np.ndarray, batch_size: int = 32) -> np.ndarray:
    """Eval-mode embeddings for a stack of images."""
    chunks = []
    with no_grad():
        for start in range(0, images.shape[0], batch_size):
            emb = model.forward_embed(images[start : start + batch_size], training=False)
            chunks.append(emb.data.astype(np.float64))
    return np.concatenate(chunks, axis=0)


def rotate_images(images: np.ndarray, rotations: np.ndarray) -> np.ndarray:
    """Apply per-image rotations given as indices into {0, 90, 180, 270}."""
    spec = group_spec("p4")
    out = np.empty_like(images)
    for i, g in enumerate(rotations.tolist()):
        out[i] = rotate_feature_map(images[i], spec, g)
    return out


def draw_rotations(count: int, seed: int) -> np.ndarray:
    prng = Prng(seed)
    return np.array([prng.randint(4) for _ in range(count)], dtype=np.int64)


def rotated_protocol(model, database: Dataset, queries: Dataset, seed: int,
                     n_values: list[int], batch_size: int = 32) -> dict:
    """Recall tables for rotated and unrotated queries under one seed.

    Database images are embedded as stored; each query is rotated by a
    seeded draw from the four 90-degree multiples. Ground truth is the
    shared identity label.
    """
    if len(queries) == 0:
        raise DataError("empty query set")
    if queries.images.shape[2] != queries.images.shape[3]:
        raise DataError("rotated protocol requires square images")
    db_emb = embed_dataset(model, database.images, batch_size)
    index = build_index(db_emb, np.arange(len(database)), database.instance_ids)
    rotations = draw_rotations(len(queries), seed)
    rotated = rotate_images(queries.images, rotations)
    tables = {}
    for tag, imgs in (("unrotated", queries.images), ("rotated", rotated)):
        emb = embed_dataset(model, imgs, batch_size)
        results = [query(index, emb[i], max(n_values), query_id=i)
                   for i in range(len(queries))]
        tables[tag] = recall_at_n(results, queries.instance_ids, index, n_values)
    tables["rotations"] = rotations
    return tables


def format_recall_table(method: str, table: dict[int, float]) -> str:
    """TSV rows: method, n, recall_percent."""
    lines = [f"{method}\t{n}\t{table[n]:.4f}" for n in sorted(table)]
    return "\n".join(lines) + "\n"
