"""Backward-difference coding for ordinal covariates.

An ordered factor with L levels is expanded into L-1 design columns whose
coefficients are the increments between adjacent levels.  Penalizing those
increments as one sign-coherent group biases the fit toward monotone level
effects without imposing monotonicity.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import InputError, UnknownLevel


@dataclass(frozen=True)
class OrdinalSpec:
    """Named ordinal covariate with its ordered levels."""

    name: str
    levels: tuple

    def __post_init__(self):
        if len(self.levels) < 2:
            raise InputError(f"{self.name}: need at least 2 levels")
        if len(set(self.levels)) != len(self.levels):
            raise InputError(f"{self.name}: levels must be distinct")


def backward_difference_codings(n_levels: int) -> np.ndarray:
    """Coding matrix of shape (L, L-1) for adjacent-level contrasts.

    Column m codes the increment from level m-1 to level m: rows below the
    step carry ``-(L-m)/L``, rows at or above it ``m/L``.  Every column sums
    to zero, and the codings invert the adjacent-difference contrasts:
    ``C.T @ B = I`` where ``C[:, m]`` has -1 and +1 at levels m-1 and m.
    """
    if n_levels < 2:
        raise InputError("need at least 2 levels")
    L = n_levels
    B = np.empty((L, L - 1))
    for m in range(1, L):
        B[:, m - 1] = np.where(np.arange(L) >= m, m / L, -(L - m) / L)
    return B


def contrast_matrix(n_levels: int) -> np.ndarray:
    """Adjacent-level difference contrasts, shape (L, L-1)."""
    L = n_levels
    C = np.zeros((L, L - 1))
    for m in range(1, L):
        C[m - 1, m - 1] = -1.0
        C[m, m - 1] = 1.0
    return C


def encode(values, spec: OrdinalSpec):
    """Expand one raw column into its coded design columns.

    Returns ``(columns, group)``: an (n, L-1) array plus the local indices
    of the one coefficient group formed by the increments.
    """
    level_of = {lvl: i for i, lvl in enumerate(spec.levels)}
    B = backward_difference_codings(len(spec.levels))
    rows = []
    for v in values:
        try:
            rows.append(B[level_of[v]])
        except KeyError:
            raise UnknownLevel(
                f"{spec.name}: value {v!r} is not a declared level"
            ) from None
    return np.array(rows), np.arange(len(spec.levels) - 1)


def level_effects(increments: np.ndarray) -> np.ndarray:
    """Level effects implied by increment coefficients, relative to the
    first level (cumulative sums with a leading zero)."""
    increments = np.asarray(increments, dtype=float)
    return np.concatenate([[0.0], np.cumsum(increments)])


def is_monotone_effect(increments: np.ndarray) -> bool:
    """Sign-coherent increments are exactly the monotone effect sequences."""
    increments = np.asarray(increments, dtype=float)
    effects = level_effects(increments)
    diffs = np.diff(effects)
    return bool(np.all(diffs >= 0) or np.all(diffs <= 0))


def read_ordinal_schema(path):
    """Load ordinal declarations from JSON: a list of objects with ``name``
    and ``levels`` (strings, in order)."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, list):
        raise InputError(f"{path}: expected a JSON list of declarations")
    specs = []
    for item in doc:
        try:
            specs.append(OrdinalSpec(item["name"], tuple(item["levels"])))
        except (KeyError, TypeError) as exc:
            raise InputError(f"{path}: each entry needs name and levels") from exc
    return specs
