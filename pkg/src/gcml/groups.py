"""Finite planar symmetry groups acting exactly on pixel grids.

p4 is the four 90-degree rotations, p4m adds mirror reflections (dihedral
of order 8). Elements are indexed (mirror, rotation) pairs; index 0 is the
identity, r rotates 90 degrees counter-clockwise, m flips rows, and index
4 + j is "rotate j quarter turns, then mirror". All actions are integer
index permutations - nothing is ever resampled.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def _compose_pair(a: tuple[int, int], b: tuple[int, int]) -> tuple[int, int]:
    # (m^s1 r^j1)(m^s2 r^j2): pulling r^j1 through a mirror inverts it.
    s1, j1 = a
    s2, j2 = b
    if s2:
        return (s1 ^ 1, (j2 - j1) % 4)
    return (s1, (j1 + j2) % 4)


@dataclass(frozen=True)
class GroupSpec:
    kind: str
    elements: tuple[tuple[int, int], ...]
    compose_table: np.ndarray = field(compare=False)
    inverse_table: np.ndarray = field(compare=False)

    @property
    def order(self) -> int:
        return len(self.elements)

    def compose(self, g: int, h: int) -> int:
        self._check(g)
        self._check(h)
        return int(self.compose_table[g, h])

    def inverse(self, g: int) -> int:
        self._check(g)
        return int(self.inverse_table[g])

    def _check(self, g: int) -> None:
        if not 0 <= g < self.order:
            raise IndexError(f"group element index {g} out of range for {self.kind}")


def _build(kind: str, elements: list[tuple[int, int]]) -> GroupSpec:
    n = len(elements)
    index = {e: i for i, e in enumerate(elements)}
    table = np.zeros((n, n), dtype=np.int64)
    inv = np.zeros(n, dtype=np.int64)
    for i, a in enumerate(elements):
        for j, b in enumerate(elements):
            table[i, j] = index[_compose_pair(a, b)]
        for j, b in enumerate(elements):
            if _compose_pair(a, b) == (0, 0):
                inv[i] = j
    return GroupSpec(kind, tuple(elements), table, inv)


_ROTATIONS = [(0, 0), (0, 1), (0, 2), (0, 3)]
_MIRRORED = [(1, 0), (1, 1), (1, 2), (1, 3)]

_SPECS = {
    "c1": _build("c1", [(0, 0)]),
    "p4": _build("p4", _ROTATIONS),
    "p4m": _build("p4m", _ROTATIONS + _MIRRORED),
}


def group_spec(kind: str) -> GroupSpec:
    try:
        return _SPECS[kind]
    except KeyError:
        raise ValueError(f"unknown group kind {kind!r}; expected c1, p4 or p4m") from None


def group_order(spec: GroupSpec) -> int:
    return spec.order


def apply_spatial(arr: np.ndarray, spec: GroupSpec, g: int) -> np.ndarray:
    """Act with g on the last two axes: rotate CCW, then mirror (flip rows)."""
    mirror, rot = spec.elements[g]
    out = np.rot90(arr, rot, axes=(-2, -1)) if rot else arr
    if mirror:
        out = np.flip(out, axis=-2)
    return np.ascontiguousarray(out)


@dataclass(frozen=True)
class GridAction:
    """Permutation realizing one element's action on a k x k grid."""

    element: int
    size: int
    index_map: np.ndarray = field(compare=False)  # flat target -> flat source

    def apply(self, grid: np.ndarray) -> np.ndarray:
        k = self.size
        return grid.reshape(*grid.shape[:-2], k * k)[..., self.index_map].reshape(grid.shape)


def act_on_grid(spec: GroupSpec, g: int, k: int) -> GridAction:
    if k < 1:
        raise ValueError("grid size must be >= 1")
    base = np.arange(k * k, dtype=np.int64).reshape(k, k)
    return GridAction(g, k, apply_spatial(base, spec, g).reshape(k * k))


def regular_perm(spec: GroupSpec, g: int) -> np.ndarray:
    """Left-regular action: perm[h] = g o h (where entry h gets sent)."""
    spec._check(g)
    return spec.compose_table[g].copy()


def rotate_feature_map(x, spec: GroupSpec, g: int):
    """Transform a feature map by g.

    Planar maps (... x H x W) are acted on spatially; group-structured maps
    (N x C x |G| x H x W) additionally have their group axis permuted by the
    left-regular action. Accepts a Tensor or ndarray and returns the same
    kind (data-level utility; no gradient is recorded).
    """
    from .tensor import Tensor

    arr = x.data if isinstance(x, Tensor) else np.asarray(x)
    if arr.shape[-1] != arr.shape[-2]:
        raise ValueError("rotate_feature_map requires square spatial dims")
    if arr.ndim == 5:
        if arr.shape[2] != spec.order:
            raise ValueError("group axis does not match the group order")
        out = np.empty_like(arr)
        perm = regular_perm(spec, g)
        spat = apply_spatial(arr, spec, g)
        out[:, :, perm, :, :] = spat
    else:
        out = apply_spatial(arr, spec, g)
    return Tensor(out) if isinstance(x, Tensor) else out
