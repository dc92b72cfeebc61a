"""Strict triangular fuzzy partitions of a one-dimensional universe."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np


class PartitionError(ValueError):
    """Raised when a partition definition is invalid."""


@dataclass(frozen=True)
class FuzzyPartition:
    """Triangular fuzzy sets whose memberships sum to one over ``[u_min, u_max]``.

    The outer sets saturate: below ``u_min`` the first set has membership 1,
    above ``u_max`` the last one does.
    """

    u_min: float
    u_max: float
    peaks: tuple[float, ...]

    def __post_init__(self) -> None:
        peaks = tuple(float(p) for p in self.peaks)
        object.__setattr__(self, "u_min", float(self.u_min))
        object.__setattr__(self, "u_max", float(self.u_max))
        object.__setattr__(self, "peaks", peaks)
        if len(peaks) < 2:
            raise PartitionError("a partition needs at least two fuzzy sets")
        if not all(math.isfinite(p) for p in peaks):
            raise PartitionError("peaks must be finite")
        if any(b <= a for a, b in zip(peaks, peaks[1:])):
            raise PartitionError(f"peaks must be strictly increasing, got {list(peaks)}")
        if peaks[0] != self.u_min or peaks[-1] != self.u_max:
            raise PartitionError(
                f"outer peaks {peaks[0]}, {peaks[-1]} must equal the universe "
                f"bounds {self.u_min}, {self.u_max}"
            )

    @property
    def n_sets(self) -> int:
        return len(self.peaks)

    @property
    def width(self) -> float:
        return self.u_max - self.u_min

    def locate(self, u: float) -> tuple[int, float]:
        """Return ``(i, w)`` such that set ``i`` has membership ``1 - w`` and set ``i + 1`` has ``w``.

        ``i`` is a 0-based index in ``[0, N - 2]``.
        """
        peaks = self.peaks
        if u <= peaks[0]:
            return 0, 0.0
        if u >= peaks[-1]:
            return len(peaks) - 2, 1.0
        i = int(np.searchsorted(peaks, u, side="right")) - 1
        i = min(i, len(peaks) - 2)
        w = (u - peaks[i]) / (peaks[i + 1] - peaks[i])
        return i, w

    def membership(self, u: float) -> np.ndarray:
        """Membership degrees of ``u`` in each of the N sets."""
        mu = np.zeros(self.n_sets)
        i, w = self.locate(float(u))
        mu[i] += 1.0 - w
        mu[i + 1] += w
        return mu

    def tuple_abscissae(self) -> np.ndarray:
        """Experiment abscissae: the bounds plus the midpoints between adjacent peaks."""
        p = np.asarray(self.peaks)
        return np.concatenate(([self.u_min], 0.5 * (p[:-1] + p[1:]), [self.u_max]))

    def to_dict(self) -> dict:
        return {"u_min": self.u_min, "u_max": self.u_max, "peaks": list(self.peaks)}

    @classmethod
    def from_dict(cls, d: dict) -> "FuzzyPartition":
        try:
            return cls(d["u_min"], d["u_max"], tuple(d["peaks"]))
        except (KeyError, TypeError) as exc:
            raise PartitionError(f"malformed partition: {d!r}") from exc


def make_partition(u_min: float, u_max: float, peaks: Sequence[float]) -> FuzzyPartition:
    return FuzzyPartition(u_min, u_max, tuple(peaks))


def uniform_partition(u_min: float, u_max: float, n_sets: int) -> FuzzyPartition:
    """Evenly spaced peaks; the outer ones sit on the bounds."""
    return FuzzyPartition(u_min, u_max, tuple(np.linspace(u_min, u_max, n_sets)))


def membership(p: FuzzyPartition, u: float) -> np.ndarray:
    return p.membership(u)


def tuple_abscissae(p: FuzzyPartition) -> np.ndarray:
    return p.tuple_abscissae()
