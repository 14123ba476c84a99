"""Group structure over coefficient indices.

A :class:`GroupPartition` is an exhaustive, disjoint grouping of the
coefficient indices ``{0, ..., p-1}`` with a positive weight per group.
It is immutable after validation and safe to share across workers.

Indices are 0-based everywhere inside the library; the 1-based convention
of the group-file format is converted exactly once at the I/O boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    EmptyGroup,
    InputError,
    NonPositiveWeight,
    OverlappingGroups,
    UncoveredIndex,
)


@dataclass(frozen=True)
class GroupPartition:
    """Validated partition of {0, ..., p-1} into K weighted groups.

    Attributes
    ----------
    groups : tuple of int arrays
        0-based coefficient indices of each group, in the order given.
    weights : float array, shape (K,)
        Positive per-group penalty weights.
    p : int
        Total number of coefficients.
    group_of : int array, shape (p,)
        Map from coefficient index to the index of its group.
    """

    groups: tuple
    weights: np.ndarray
    p: int
    group_of: np.ndarray = field(repr=False)
    # flat layout for vectorized group reductions: the concatenated group
    # indices, the start offset of each group, and each group's size
    order: np.ndarray = field(repr=False, default=None)
    offsets: np.ndarray = field(repr=False, default=None)

    size_arr: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if self.order is None:
            if self.groups:
                sizes = np.array([g.size for g in self.groups], dtype=np.intp)
                order = np.concatenate(self.groups)
                offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]])
            else:
                sizes = np.empty(0, dtype=np.intp)
                order = np.empty(0, dtype=np.intp)
                offsets = np.empty(0, dtype=np.intp)
            object.__setattr__(self, "order", order)
            object.__setattr__(self, "offsets", offsets)
            object.__setattr__(self, "size_arr", sizes)

    @property
    def n_groups(self) -> int:
        return len(self.groups)

    def sizes(self) -> np.ndarray:
        return np.array([g.size for g in self.groups])

    def restrict(self, v: np.ndarray, k: int) -> np.ndarray:
        """View of ``v`` on group ``k``."""
        return v[self.groups[k]]


def validate_partition(groups, weights=None, p=None) -> GroupPartition:
    """Validate a grouping and produce an immutable :class:`GroupPartition`.

    Parameters
    ----------
    groups : iterable of iterables of int
        0-based coefficient indices of each group.
    weights : sequence of float, optional
        Per-group weights.  Defaults to ``sqrt(group size)``.
    p : int, optional
        Total coefficient count.  Defaults to the number of indices seen.

    Raises
    ------
    OverlappingGroups, UncoveredIndex, EmptyGroup, NonPositiveWeight
    """
    idx_groups = tuple(np.asarray(sorted(g), dtype=np.intp) for g in groups)
    if p is None:
        p = int(sum(g.size for g in idx_groups))
    for k, g in enumerate(idx_groups):
        if g.size == 0:
            raise EmptyGroup(f"group {k} is empty")
        if g.min() < 0 or g.max() >= p:
            raise UncoveredIndex(
                f"group {k} references index {int(g.min() if g.min() < 0 else g.max())} "
                f"outside 0..{p - 1}"
            )
    group_of = np.full(p, -1, dtype=np.intp)
    for k, g in enumerate(idx_groups):
        if np.any(group_of[g] >= 0):
            j = int(g[group_of[g] >= 0][0])
            raise OverlappingGroups(f"index {j} appears in more than one group")
        group_of[g] = k
    missing = np.flatnonzero(group_of < 0)
    if missing.size:
        raise UncoveredIndex(f"index {int(missing[0])} is not covered by any group")

    if weights is None:
        w = np.sqrt(np.array([g.size for g in idx_groups], dtype=float))
    else:
        w = np.asarray(weights, dtype=float)
        if w.shape != (len(idx_groups),):
            raise InputError(
                f"expected {len(idx_groups)} weights, got shape {w.shape}"
            )
        if np.any(~np.isfinite(w)) or np.any(w <= 0):
            raise NonPositiveWeight("all group weights must be positive and finite")
    return GroupPartition(groups=idx_groups, weights=w, p=p, group_of=group_of)


def default_weights(partition: GroupPartition) -> np.ndarray:
    """Per-group weights ``w_k = sqrt(p_k)``."""
    return np.sqrt(partition.sizes().astype(float))


def singleton_partition(p: int) -> GroupPartition:
    """One group per coefficient with unit weights."""
    return validate_partition([[j] for j in range(p)], weights=np.ones(p), p=p)


# -- orthant decomposition ---------------------------------------------------

def positive_part(v: np.ndarray) -> np.ndarray:
    return np.maximum(v, 0.0)


def negative_part(v: np.ndarray) -> np.ndarray:
    return np.maximum(-v, 0.0)


def phi(v: np.ndarray, j: int) -> np.ndarray:
    """Orthant part of ``v`` selected by the sign of its ``j``-th entry.

    Returns the componentwise positive part of ``v`` when ``v[j] > 0``, the
    componentwise negative part when ``v[j] < 0``, and the zero vector when
    ``v[j] == 0``.  The result never has negative entries and is even in
    ``v``: ``phi(-v, j) == phi(v, j)``.
    """
    v = np.asarray(v, dtype=float)
    if v[j] > 0:
        return positive_part(v)
    if v[j] < 0:
        return negative_part(v)
    return np.zeros_like(v)


@dataclass(frozen=True)
class SignSplit:
    """Index sets of the strictly positive and strictly negative entries."""

    positive: np.ndarray
    negative: np.ndarray


def sign_split(v: np.ndarray) -> SignSplit:
    v = np.asarray(v, dtype=float)
    return SignSplit(
        positive=np.flatnonzero(v > 0), negative=np.flatnonzero(v < 0)
    )


def is_sign_coherent(v: np.ndarray) -> bool:
    """True when the entries are all >= 0 or all <= 0."""
    v = np.asarray(v, dtype=float)
    return not (np.any(v > 0) and np.any(v < 0))


# -- group file format -------------------------------------------------------

def read_group_file(path, p: int) -> GroupPartition:
    """Parse a group file: one line per group, comma-separated 1-based
    indices, optionally followed by ``| weight``.

    Groups without an explicit weight get the ``sqrt(p_k)`` default.
    """
    groups = []
    weights = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "|" in line:
                idx_part, _, w_part = line.partition("|")
                try:
                    w = float(w_part.strip())
                except ValueError as exc:
                    raise InputError(
                        f"{path}:{lineno}: bad weight {w_part.strip()!r}"
                    ) from exc
            else:
                idx_part, w = line, None
            try:
                idx = [int(tok) for tok in idx_part.replace(" ", "").split(",") if tok]
            except ValueError as exc:
                raise InputError(f"{path}:{lineno}: bad index list") from exc
            if any(i < 1 for i in idx):
                raise UncoveredIndex(f"{path}:{lineno}: indices are 1-based")
            groups.append([i - 1 for i in idx])
            weights.append(w)
    if not groups:
        raise InputError(f"{path}: no groups found")
    if all(w is None for w in weights):
        return validate_partition(groups, weights=None, p=p)
    sizes = [len(g) for g in groups]
    filled = [
        math.sqrt(s) if w is None else w for w, s in zip(weights, sizes)
    ]
    return validate_partition(groups, weights=filled, p=p)
