"""Kruskal-Wallis rank test and counter-based Gaussian noise."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import rankdata

CHI2_THRESHOLD_31_GROUPS = 43.77


@dataclass(frozen=True)
class KwResult:
    H: float
    groups: int
    n_total: int
    tie_corrected: bool

    def rejects(self, threshold: float = CHI2_THRESHOLD_31_GROUPS) -> bool:
        return self.H > threshold


def kruskal_wallis(samples: Sequence[Sequence[float]]) -> KwResult:
    """Kruskal-Wallis H statistic with midranks and tie correction.

    Raises
    ------
    ValueError
        With fewer than two groups or an empty group.
    """
    groups = [np.asarray(g, dtype=float).ravel() for g in samples]
    if len(groups) < 2:
        raise ValueError("need at least two groups")
    if any(g.size == 0 for g in groups):
        raise ValueError("empty group")
    values = np.concatenate(groups)
    n = values.size
    ranks = rankdata(values)  # midranks for ties
    _, counts = np.unique(values, return_counts=True)
    ties = float(np.sum(counts.astype(float) ** 3 - counts))
    correction = 1.0 - ties / (n**3 - n) if n > 1 else 0.0
    if correction <= 0.0:
        return KwResult(0.0, len(groups), n, ties > 0)
    h = 0.0
    start = 0
    for g in groups:
        r = ranks[start:start + g.size]
        start += g.size
        h += g.size * (r.mean() - (n + 1) / 2.0) ** 2
    h *= 12.0 / (n * (n + 1))
    return KwResult(float(h / correction), len(groups), n, ties > 0)


def _rng(seed: int, cycle: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(cycle)])


def gaussian_block(seed: int, cycle: int, channels: int) -> np.ndarray:
    """Standard normal draws for channels ``0..channels-1`` of one cycle.

    Draw ``c`` depends only on ``(seed, cycle, c)``: a longer block extends a
    shorter one without changing its values.
    """
    return _rng(seed, cycle).standard_normal(channels)


def gaussian_stream(seed: int, cycle: int, channel: int) -> float:
    return float(gaussian_block(seed, cycle, channel + 1)[channel])
