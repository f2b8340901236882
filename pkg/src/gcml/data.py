"""Seeded synthetic dataset of orientation-bearing grayscale patterns.

Each class is a procedural pattern family (stripes, crosses, L-shapes,
checkers, blob constellations, ...) whose orientation carries information,
so rotation invariance is not vacuous. An instance draws its geometry
(positions, angles, phases) once; its views differ by brightness scale,
pixel noise and integer translation jitter. Everything is a pure function
of the spec, image by image, so generation order cannot matter.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .netpbm import load_pgm_ppm, save_pgm
from .prng import Prng, derive_seed, normal_field


@dataclass(frozen=True)
class SyntheticSpec:
    num_classes: int = 10
    instances_per_class: int = 20
    views_per_instance: int = 4
    image_size: int = 32
    noise_sigma: float = 0.03
    jitter_px: int = 2
    seed: int = 20240

    def __post_init__(self):
        if self.image_size % 2:
            raise ValueError("image_size must be even")
        if self.image_size < 12:
            raise DataError("image_size too small for the pattern geometry")
        if min(self.num_classes, self.instances_per_class, self.views_per_instance) < 1:
            raise ValueError("counts must be positive")
        if self.jitter_px < 0 or self.noise_sigma < 0:
            raise ValueError("noise_sigma and jitter_px must be non-negative")


@dataclass
class ManifestRow:
    relative_path: str
    class_id: int
    instance_id: int
    view_id: int
    rotation_deg: int = 0


@dataclass
class Dataset:
    images: np.ndarray  # (M, 1, S, S) float32 in [0, 1]
    class_ids: np.ndarray
    instance_ids: np.ndarray  # global identity label
    view_ids: np.ndarray
    rows: list[ManifestRow] = field(default_factory=list)

    def __len__(self) -> int:
        return self.images.shape[0]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(self.images[idx], self.class_ids[idx],
                       self.instance_ids[idx], self.view_ids[idx],
                       [self.rows[i] for i in idx.tolist()] if self.rows else [])


def _coords(size: int):
    lin = (np.arange(size) + 0.5) / size * 2.0 - 1.0
    return np.meshgrid(lin, lin, indexing="ij")  # (Y, X): rows, cols


def _soft(x: np.ndarray, sharp: float = 60.0) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-sharp * x))


def _wave(t: np.ndarray) -> np.ndarray:
    return 0.5 + 0.5 * np.cos(t)


def _ramp(yy, xx, p: Prng):
    # instance-fixed brightness gradient; breaks the half-turn symmetry of
    # periodic patterns so orientation always carries information
    theta = p.uniform(0, 2 * math.pi)
    t = xx * math.cos(theta) + yy * math.sin(theta)
    return 0.75 + 0.25 * np.clip(t, -1.0, 1.0)


def _stripes(yy, xx, p: Prng, scale: float):
    theta = p.uniform(0, math.pi)
    lam = p.uniform(0.35, 0.6) * scale
    phase = p.uniform(0, 2 * math.pi)
    wave = _wave(2 * math.pi * (xx * math.cos(theta) + yy * math.sin(theta)) / lam + phase)
    return wave * _ramp(yy, xx, p)


def _checker(yy, xx, p: Prng, scale: float):
    theta = p.uniform(0, math.pi / 2)
    lam1 = p.uniform(0.4, 0.7) * scale
    lam2 = p.uniform(0.4, 0.7) * scale
    u = xx * math.cos(theta) + yy * math.sin(theta)
    v = -xx * math.sin(theta) + yy * math.cos(theta)
    a = _wave(2 * math.pi * u / lam1 + p.uniform(0, 2 * math.pi))
    b = _wave(2 * math.pi * v / lam2 + p.uniform(0, 2 * math.pi))
    return a * b * _ramp(yy, xx, p)


def _bar(yy, xx, cx, cy, theta, width, length):
    u = (xx - cx) * math.cos(theta) + (yy - cy) * math.sin(theta)
    v = -(xx - cx) * math.sin(theta) + (yy - cy) * math.cos(theta)
    return _soft(width - np.abs(v)) * _soft(length - np.abs(u))


def _half_bar(yy, xx, cx, cy, theta, width, length):
    u = (xx - cx) * math.cos(theta) + (yy - cy) * math.sin(theta)
    v = -(xx - cx) * math.sin(theta) + (yy - cy) * math.cos(theta)
    return _soft(width - np.abs(v)) * _soft(u + width) * _soft(length - u)


def _cross(yy, xx, p: Prng, scale: float):
    cx, cy = p.uniform(-0.25, 0.25), p.uniform(-0.25, 0.25)
    theta = p.uniform(0, math.pi)
    w = p.uniform(0.07, 0.13) * scale
    b1 = _bar(yy, xx, cx, cy, theta, w, 0.7)
    b2 = _bar(yy, xx, cx, cy, theta + math.pi / 2, w, 0.45)
    return np.clip(b1 + b2, 0, 1)


def _lshape(yy, xx, p: Prng, scale: float):
    cx, cy = p.uniform(-0.3, 0.3), p.uniform(-0.3, 0.3)
    theta = p.uniform(0, 2 * math.pi)
    w = p.uniform(0.08, 0.13) * scale
    b1 = _half_bar(yy, xx, cx, cy, theta, w, p.uniform(0.5, 0.8))
    b2 = _half_bar(yy, xx, cx, cy, theta + math.pi / 2, w, p.uniform(0.3, 0.55))
    return np.clip(b1 + b2, 0, 1)


def _rings(yy, xx, p: Prng, scale: float):
    cx, cy = p.uniform(-0.35, 0.35), p.uniform(-0.35, 0.35)
    lam = p.uniform(0.28, 0.5) * scale
    r = np.sqrt((xx - cx) ** 2 + (yy - cy) ** 2)
    wave = _wave(2 * math.pi * r / lam + p.uniform(0, 2 * math.pi))
    return wave * _ramp(yy, xx, p)


def _blobs(yy, xx, p: Prng, scale: float):
    img = np.zeros_like(xx)
    for _ in range(5):
        bx, by = p.uniform(-0.7, 0.7), p.uniform(-0.7, 0.7)
        sig = p.uniform(0.1, 0.18) * scale
        img += np.exp(-(((xx - bx) ** 2 + (yy - by) ** 2) / (2 * sig * sig)))
    return np.clip(img, 0, 1)


def _wedge(yy, xx, p: Prng, scale: float):
    theta = p.uniform(0, 2 * math.pi)
    half = p.uniform(0.35, 0.6)
    radius = p.uniform(0.6, 0.9) * scale
    ang = np.arctan2(yy, xx) - theta
    ang = np.arctan2(np.sin(ang), np.cos(ang))  # wrap to (-pi, pi]
    r = np.sqrt(xx ** 2 + yy ** 2)
    return _soft(half - np.abs(ang), sharp=15.0) * _soft(radius - r)


def _dotgrid(yy, xx, p: Prng, scale: float):
    # anisotropic lattice: a quarter turn must change the pattern
    theta = p.uniform(0, math.pi / 2)
    lam_u = p.uniform(0.3, 0.4) * scale
    lam_v = p.uniform(0.5, 0.7) * scale
    u = xx * math.cos(theta) + yy * math.sin(theta)
    v = -xx * math.sin(theta) + yy * math.cos(theta)
    a = _wave(2 * math.pi * u / lam_u + p.uniform(0, 2 * math.pi))
    b = _wave(2 * math.pi * v / lam_v + p.uniform(0, 2 * math.pi))
    return (a * b) ** 3 * _ramp(yy, xx, p)


def _tshape(yy, xx, p: Prng, scale: float):
    cx, cy = p.uniform(-0.25, 0.25), p.uniform(-0.25, 0.25)
    theta = p.uniform(0, 2 * math.pi)
    w = p.uniform(0.07, 0.12) * scale
    top = _bar(yy, xx, cx, cy, theta, w, p.uniform(0.45, 0.7))
    stem = _half_bar(yy, xx, cx, cy, theta + math.pi / 2, w, p.uniform(0.4, 0.7))
    return np.clip(top + stem, 0, 1)


def _bardot(yy, xx, p: Prng, scale: float):
    theta = p.uniform(0, math.pi)
    w = p.uniform(0.1, 0.16) * scale
    bar = _bar(yy, xx, p.uniform(-0.2, 0.2), p.uniform(-0.2, 0.2), theta, w, 0.75)
    bx, by = p.uniform(-0.6, 0.6), p.uniform(-0.6, 0.6)
    dot = np.exp(-(((xx - bx) ** 2 + (yy - by) ** 2) / (2 * 0.02 * scale)))
    return np.clip(bar + dot, 0, 1)


_FAMILIES = [_stripes, _checker, _cross, _lshape, _rings,
             _blobs, _wedge, _dotgrid, _tshape, _bardot]


def _jitter(img: np.ndarray, dy: int, dx: int) -> np.ndarray:
    """Translate by (dy, dx) pixels, zero-filling the exposed border."""
    out = np.zeros_like(img)
    h, w = img.shape
    dst_y0, dst_y1 = max(0, dy), min(h, h + dy)
    dst_x0, dst_x1 = max(0, dx), min(w, w + dx)
    src_y0, src_y1 = max(0, -dy), min(h, h - dy)
    src_x0, src_x1 = max(0, -dx), min(w, w - dx)
    out[dst_y0:dst_y1, dst_x0:dst_x1] = img[src_y0:src_y1, src_x0:src_x1]
    return out


def render_instance(spec: SyntheticSpec, class_id: int, instance_id: int) -> np.ndarray:
    """The canonical (view-independent) pattern of one instance."""
    family = _FAMILIES[class_id % len(_FAMILIES)]
    class_prng = Prng(derive_seed(spec.seed, 101, class_id))
    scale = class_prng.uniform(0.85, 1.2)
    contrast = class_prng.uniform(0.8, 1.0)
    inst_prng = Prng(derive_seed(spec.seed, 202, class_id, instance_id))
    yy, xx = _coords(spec.image_size)
    return np.clip(family(yy, xx, inst_prng, scale) * contrast, 0.0, 1.0)


def render_view(spec: SyntheticSpec, class_id: int, instance_id: int,
                view_id: int) -> np.ndarray:
    base = render_instance(spec, class_id, instance_id)
    vp = Prng(derive_seed(spec.seed, 303, class_id, instance_id, view_id))
    bright = vp.uniform(0.9, 1.1)
    img = base * bright
    if spec.jitter_px > 0:
        dy = vp.randint(2 * spec.jitter_px + 1) - spec.jitter_px
        dx = vp.randint(2 * spec.jitter_px + 1) - spec.jitter_px
        img = _jitter(img, dy, dx)
    if spec.noise_sigma > 0:
        noise_seed = derive_seed(spec.seed, 404, class_id, instance_id, view_id)
        img = img + spec.noise_sigma * normal_field(noise_seed, img.shape)
    return np.clip(img, 0.0, 1.0)


def generate_synthetic(spec: SyntheticSpec) -> Dataset:
    n = spec.num_classes * spec.instances_per_class * spec.views_per_instance
    s = spec.image_size
    images = np.zeros((n, 1, s, s), dtype=np.float32)
    class_ids = np.zeros(n, dtype=np.int64)
    instance_ids = np.zeros(n, dtype=np.int64)
    view_ids = np.zeros(n, dtype=np.int64)
    rows: list[ManifestRow] = []
    i = 0
    for c in range(spec.num_classes):
        for inst in range(spec.instances_per_class):
            for v in range(spec.views_per_instance):
                images[i, 0] = render_view(spec, c, inst, v).astype(np.float32)
                class_ids[i] = c
                instance_ids[i] = c * spec.instances_per_class + inst
                view_ids[i] = v
                rows.append(ManifestRow(f"class_{c}/inst_{inst}/view_{v}.pgm", c, inst, v))
                i += 1
    return Dataset(images, class_ids, instance_ids, view_ids, rows)


MANIFEST_NAME = "manifest.tsv"
_MANIFEST_COLUMNS = ["relative_path", "class_id", "instance_id", "view_id", "rotation_deg"]


def write_dataset(ds: Dataset, out_dir) -> None:
    os.makedirs(out_dir, exist_ok=True)
    for i, row in enumerate(ds.rows):
        path = os.path.join(out_dir, row.relative_path)
        os.makedirs(os.path.dirname(path), exist_ok=True)
        save_pgm(path, ds.images[i])
    with open(os.path.join(out_dir, MANIFEST_NAME), "w", encoding="utf-8") as fh:
        fh.write("\t".join(_MANIFEST_COLUMNS) + "\n")
        for row in ds.rows:
            fh.write(f"{row.relative_path}\t{row.class_id}\t{row.instance_id}"
                     f"\t{row.view_id}\t{row.rotation_deg}\n")


def load_dataset(root) -> Dataset:
    """Read a directory written by write_dataset (or any matching manifest)."""
    manifest = os.path.join(root, MANIFEST_NAME) if os.path.isdir(root) else root
    root_dir = os.path.dirname(manifest)
    if not os.path.exists(manifest):
        raise DataError(f"manifest not found: {manifest}")
    rows: list[ManifestRow] = []
    with open(manifest, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split("\t")
        if header != _MANIFEST_COLUMNS:
            raise DataError(f"bad manifest columns: {header}")
        for line_no, line in enumerate(fh, start=2):
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 5:
                raise DataError(f"manifest line {line_no} has {len(parts)} columns")
            rot = int(parts[4])
            if rot not in (0, 90, 180, 270):
                raise DataError(f"manifest line {line_no}: rotation {rot} not a "
                                "multiple of 90 in [0, 270]")
            rows.append(ManifestRow(parts[0], int(parts[1]), int(parts[2]),
                                    int(parts[3]), rot))
    if not rows:
        raise DataError("empty manifest")
    seen = set()
    for row in rows:
        if row.relative_path in seen:
            raise DataError(f"duplicate path in manifest: {row.relative_path}")
        seen.add(row.relative_path)
    images = []
    for row in rows:
        img = load_pgm_ppm(os.path.join(root_dir, row.relative_path)).data
        images.append(img)
    arr = np.stack(images).astype(np.float32)
    class_ids = np.array([r.class_id for r in rows], dtype=np.int64)
    pairs = sorted({(r.class_id, r.instance_id) for r in rows})
    pair_index = {pair: i for i, pair in enumerate(pairs)}
    instance_ids = np.array([pair_index[(r.class_id, r.instance_id)] for r in rows],
                            dtype=np.int64)
    view_ids = np.array([r.view_id for r in rows], dtype=np.int64)
    return Dataset(arr, class_ids, instance_ids, view_ids, rows)


def split_by_view(ds: Dataset, views: list[int]) -> Dataset:
    mask = np.isin(ds.view_ids, views)
    return ds.subset(np.nonzero(mask)[0])


__all__ = ["SyntheticSpec", "ManifestRow", "Dataset", "generate_synthetic",
           "render_instance", "render_view", "write_dataset", "load_dataset",
           "split_by_view", "MANIFEST_NAME"]
