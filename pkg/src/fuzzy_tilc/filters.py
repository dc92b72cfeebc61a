"""Cycle-domain IMC filters producing the corrected setpoint ``sp[k]``.

Errors follow ``e = y_T - y_d``: a positive error means the sheet came out
too hot and the setpoint must go down.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .partition import FuzzyPartition

DEFAULT_CONSEQUENTS = (0.6, 0.25, 0.0, -0.5, -1.0)
DEFAULT_PEAKS = (-1.0, -0.5, 0.0, 0.5, 1.0)
SET_NAMES = ("NB", "NS", "ZR", "PS", "PB")


@dataclass(frozen=True)
class FilterRuleTable:
    """Five constant-consequent rules over the normalized error."""

    peaks: tuple[float, ...] = DEFAULT_PEAKS
    consequents: tuple[float, ...] = DEFAULT_CONSEQUENTS
    partition: FuzzyPartition = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if len(self.peaks) != 5 or len(self.consequents) != 5:
            raise ValueError("the filter uses exactly five fuzzy sets (NB, NS, ZR, PS, PB)")
        peaks = tuple(float(p) for p in self.peaks)
        object.__setattr__(self, "peaks", peaks)
        object.__setattr__(self, "consequents", tuple(float(c) for c in self.consequents))
        object.__setattr__(self, "partition", FuzzyPartition(peaks[0], peaks[-1], peaks))

    def output(self, e_norm: float) -> float:
        """Defuzzified normalized setpoint change for a normalized error."""
        i, w = self.partition.locate(float(e_norm))
        return (1.0 - w) * self.consequents[i] + w * self.consequents[i + 1]


@dataclass
class FilterState:
    """Mutable per-controller filter memory.

    ``sp`` starts at the target ``y_d``; ``k`` counts applied updates.
    """

    sp: np.ndarray
    alpha: np.ndarray = field(default_factory=lambda: np.array([0.2701]))
    k_n: np.ndarray = field(default_factory=lambda: np.array([0.25]))
    k_d: np.ndarray = field(default_factory=lambda: np.array([1.0]))
    k: int = 0

    def __post_init__(self) -> None:
        self.sp = np.array(self.sp, dtype=float)
        m = self.sp.shape[0]
        self.alpha = np.broadcast_to(np.asarray(self.alpha, dtype=float), (m,)).copy()
        self.k_n = np.broadcast_to(np.asarray(self.k_n, dtype=float), (m,)).copy()
        self.k_d = np.broadcast_to(np.asarray(self.k_d, dtype=float), (m,)).copy()
        if np.any(self.alpha < 0) or np.any(self.alpha >= 1):
            raise ValueError("filter parameter alpha must satisfy 0 <= alpha < 1")
        if np.any(self.k_n <= 0) or np.any(self.k_d <= 0):
            raise ValueError("normalization and denormalization gains must be positive")

    @classmethod
    def initial(cls, y_d: Sequence[float], **gains) -> "FilterState":
        return cls(np.array(y_d, dtype=float), **gains)


def crisp_filter_step(state: FilterState, e: Sequence[float]) -> np.ndarray:
    """Exponential IMC filter: ``sp += (1 - alpha) * (y_d - y_T)`` per channel."""
    e = np.asarray(e, dtype=float)
    state.sp = state.sp - (1.0 - state.alpha) * e
    state.k += 1
    return state.sp.copy()


def fuzzy_delta(e: Sequence[float], k_n, k_d, table: FilterRuleTable = FilterRuleTable()) -> np.ndarray:
    """Setpoint change of the fuzzy filter for error vector ``e``."""
    e_n = np.clip(np.asarray(k_n, dtype=float) * np.asarray(e, dtype=float), -1.0, 1.0)
    du = np.array([table.output(x) for x in np.atleast_1d(e_n)])
    return np.asarray(k_d, dtype=float) * du


def fuzzy_filter_step(state: FilterState, e: Sequence[float], table: FilterRuleTable = FilterRuleTable()) -> np.ndarray:
    state.sp = state.sp + fuzzy_delta(e, state.k_n, state.k_d, table)
    state.k += 1
    return state.sp.copy()
