"""First-order Takagi-Sugeno-Kang fuzzy model over a grid of strict partitions.

Every cell ``(i_1, ..., i_m)`` of the grid holds one affine rule
``y = C + D @ u``.  ``D[k, j]`` is the sensitivity of output ``k`` to input
``j``.  With product conjunction and strict partitions the firing strengths
of the (at most ``2**m``) active cells already sum to one, so the model
output is their plain weighted sum.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .partition import FuzzyPartition, PartitionError


class ModelFormatError(ValueError):
    """Raised when a serialized model is malformed or inconsistent."""


def _locate_many(partitions: Sequence[FuzzyPartition], U: np.ndarray):
    """Left cell index and interpolation weight for every point and input.

    Returns ``(idx, w)`` of shape ``(P, m)``; memberships of the point in the
    sets ``idx`` and ``idx + 1`` are ``1 - w`` and ``w``.
    """
    P, m = U.shape
    idx = np.empty((P, m), dtype=np.intp)
    w = np.empty((P, m))
    for j, part in enumerate(partitions):
        peaks = np.asarray(part.peaks)
        u = np.clip(U[:, j], peaks[0], peaks[-1])
        i = np.searchsorted(peaks, u, side="right") - 1
        i = np.clip(i, 0, len(peaks) - 2)
        idx[:, j] = i
        w[:, j] = (u - peaks[i]) / (peaks[i + 1] - peaks[i])
    return idx, w


def _corners(m: int) -> np.ndarray:
    return np.array(list(itertools.product((0, 1), repeat=m)), dtype=np.intp)


@dataclass(frozen=True)
class TskModel:
    """Dense grid of affine rules.

    Attributes
    ----------
    partitions : tuple of FuzzyPartition
        One partition per input (for an inverse model: per output).
    C : ndarray, shape ``(N_1, ..., N_m, m)``
        Constant term of each rule.
    D : ndarray, shape ``(N_1, ..., N_m, m, m)``
        Linear term of each rule, row = output, column = input.
    B : ndarray or None, shape ``(N_1, ..., N_m, 2**m, m)``
        Kriging residuals at the cell corners, kept for diagnostics.
    """

    partitions: tuple[FuzzyPartition, ...]
    C: np.ndarray
    D: np.ndarray
    B: np.ndarray | None = None
    _corner_bits: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "partitions", tuple(self.partitions))
        m = len(self.partitions)
        grid = tuple(p.n_sets for p in self.partitions)
        C = np.array(self.C, dtype=float)
        D = np.array(self.D, dtype=float)
        if C.shape != grid + (m,):
            raise ModelFormatError(f"dimension mismatch: C has shape {C.shape}, expected {grid + (m,)}")
        if D.shape != grid + (m, m):
            raise ModelFormatError(f"dimension mismatch: D has shape {D.shape}, expected {grid + (m, m)}")
        C.setflags(write=False)
        D.setflags(write=False)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "D", D)
        if self.B is not None:
            B = np.array(self.B, dtype=float)
            if B.shape != grid + (2**m, m):
                raise ModelFormatError(f"dimension mismatch: B has shape {B.shape}")
            B.setflags(write=False)
            object.__setattr__(self, "B", B)
        object.__setattr__(self, "_corner_bits", _corners(m))

    @property
    def m(self) -> int:
        return len(self.partitions)

    @property
    def grid_shape(self) -> tuple[int, ...]:
        return tuple(p.n_sets for p in self.partitions)

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.grid_shape))

    def rule(self, index: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
        """``(C, D)`` of the cell with 1-based multi-index ``index``."""
        ix = tuple(int(i) - 1 for i in index)
        return self.C[ix], self.D[ix]

    def active_cells(self, u: Sequence[float]) -> list[tuple[tuple[int, ...], float]]:
        """Cells with nonzero firing strength at ``u`` as ``(1-based index, weight)``."""
        idx, w = _locate_many(self.partitions, np.asarray(u, dtype=float).reshape(1, -1))
        out = []
        for bits in self._corner_bits:
            weight = float(np.prod(np.where(bits == 1, w[0], 1.0 - w[0])))
            if weight > 0.0:
                out.append((tuple(int(i) + 1 for i in idx[0] + bits), weight))
        return out

    def evaluate_many(self, U: np.ndarray) -> np.ndarray:
        """Evaluate the model at every row of ``U`` (shape ``(P, m)``)."""
        U = np.atleast_2d(np.asarray(U, dtype=float))
        if U.shape[1] != self.m:
            raise ValueError(f"expected {self.m} inputs, got {U.shape[1]}")
        idx, w = _locate_many(self.partitions, U)
        bits = self._corner_bits  # (Q, m)
        weight = np.prod(np.where(bits == 1, w[:, None, :], 1.0 - w[:, None, :]), axis=2)  # (P, Q)
        cell = tuple(np.moveaxis(idx[:, None, :] + bits, -1, 0))
        local = self.C[cell] + np.einsum("pqkj,pj->pqk", self.D[cell], U)
        return np.einsum("pq,pqk->pk", weight, local)

    def evaluate(self, u: Sequence[float]) -> np.ndarray:
        return self.evaluate_many(np.asarray(u, dtype=float).reshape(1, -1))[0]

    def to_dict(self) -> dict:
        cells = []
        for ix in np.ndindex(*self.grid_shape):
            cell = {
                "index": [i + 1 for i in ix],
                "C": self.C[ix].tolist(),
                "D": self.D[ix].tolist(),
            }
            if self.B is not None:
                cell["B"] = self.B[ix].tolist()
            cells.append(cell)
        return {
            "m": self.m,
            "partitions": [p.to_dict() for p in self.partitions],
            "cells": cells,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "TskModel":
        partitions, C, D, B = _parse_cells(doc)
        return cls(partitions, C, D, B)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "TskModel":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ModelFormatError(f"malformed document: {exc}") from exc
        return cls.from_dict(doc)


def _parse_cells(doc: dict):
    """Shared reader for the forward and inverse model documents."""
    if not isinstance(doc, dict):
        raise ModelFormatError("model document must be a JSON object")
    try:
        m = int(doc["m"])
        parts = tuple(FuzzyPartition.from_dict(p) for p in doc["partitions"])
        cells = doc["cells"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"malformed model document: {exc}") from exc
    if len(parts) != m:
        raise ModelFormatError(f"dimension mismatch: m={m} but {len(parts)} partitions")
    grid = tuple(p.n_sets for p in parts)
    C = np.full(grid + (m,), np.nan)
    D = np.full(grid + (m, m), np.nan)
    has_b = bool(cells) and all("B" in c for c in cells)
    B = np.full(grid + (2**m, m), np.nan) if has_b else None
    seen = set()
    for cell in cells:
        try:
            ix = tuple(int(i) - 1 for i in cell["index"])
            c = np.asarray(cell["C"], dtype=float)
            d = np.asarray(cell["D"], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise ModelFormatError(f"malformed cell {cell!r}") from exc
        if len(ix) != m or any(not 0 <= i < n for i, n in zip(ix, grid)):
            raise ModelFormatError(f"cell index {cell['index']} outside the grid {grid}")
        if c.shape != (m,) or d.shape != (m, m):
            raise ModelFormatError(f"dimension mismatch in cell {cell['index']}")
        if ix in seen:
            raise ModelFormatError(f"duplicate cell {cell['index']}")
        seen.add(ix)
        C[ix] = c
        D[ix] = d
        if B is not None:
            b = np.asarray(cell["B"], dtype=float)
            if b.shape != (2**m, m):
                raise ModelFormatError(f"dimension mismatch in B of cell {cell['index']}")
            B[ix] = b
    expected = int(np.prod(grid))
    if len(seen) != expected:
        raise ModelFormatError(f"incomplete grid: {len(seen)} of {expected} cells present")
    return parts, C, D, B


def evaluate(model: TskModel, u: Sequence[float]) -> np.ndarray:
    return model.evaluate(u)


def active_cells(model: TskModel, u: Sequence[float]):
    return model.active_cells(u)


def serialize(model: TskModel) -> str:
    return model.to_json()


def deserialize(text: str) -> TskModel:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"malformed document: {exc}") from exc
    return TskModel.from_dict(doc)


__all__ = [
    "ModelFormatError",
    "PartitionError",
    "TskModel",
    "active_cells",
    "deserialize",
    "evaluate",
    "serialize",
]
