"""Terminal iterative learning controllers.

All controllers expose ``next_input(y_prev)``: ``y_prev`` is the terminal
measurement of the previous cycle (``None`` before the first cycle) and the
return value is the input held during the coming cycle.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .filters import FilterRuleTable, FilterState, crisp_filter_step, fuzzy_filter_step
from .inverse import InverseModel
from .kriging import ExperimentDatabase, SingularSystemError, solve_dense


class TilcController:
    variant = "base"

    def __init__(self, y_d: Sequence[float], u_min: Sequence[float], u_max: Sequence[float]):
        self.y_d = np.array(y_d, dtype=float)
        self.u_min = np.broadcast_to(np.asarray(u_min, dtype=float), self.y_d.shape).copy()
        self.u_max = np.broadcast_to(np.asarray(u_max, dtype=float), self.y_d.shape).copy()
        self.k = 0
        self.u: np.ndarray | None = None

    def clamp(self, u: np.ndarray) -> np.ndarray:
        return np.clip(u, self.u_min, self.u_max)

    @property
    def sp(self) -> np.ndarray:
        return self.y_d.copy()

    def next_input(self, y_prev: Sequence[float] | None) -> np.ndarray:
        self.k += 1
        if self.k > 1 and y_prev is None:
            raise ValueError(f"cycle {self.k} needs the previous terminal measurement")
        self.u = self.clamp(self._compute(None if y_prev is None else np.asarray(y_prev, dtype=float)))
        return self.u.copy()

    def _compute(self, y_prev):
        raise NotImplementedError


class FuzzyTilc(TilcController):
    """Fuzzy filter followed by the inverse fuzzy model."""

    variant = "fuzzy"

    def __init__(self, inverse: InverseModel, y_d, u_min, u_max, k_n=0.25, k_d=1.0,
                 table: FilterRuleTable = FilterRuleTable()):
        super().__init__(y_d, u_min, u_max)
        self.inverse = inverse
        self.table = table
        self.filter = FilterState.initial(self.y_d, k_n=k_n, k_d=k_d)

    @property
    def sp(self) -> np.ndarray:
        return self.filter.sp.copy()

    def _compute(self, y_prev):
        if y_prev is not None:
            fuzzy_filter_step(self.filter, y_prev - self.y_d, self.table)
        return self.inverse.evaluate(self.filter.sp)


class CrispTilc(TilcController):
    """Linear IMC controller with an exponential filter.

    The filter state starts at the linear model's prediction for the first
    input, so every later input moves by ``(1 - alpha) G^-1 (y_d - y_T)``.
    When the first input is the model inverse of ``y_d`` this is the same as
    starting the filter at ``y_d``.
    """

    variant = "crisp_imc"

    def __init__(self, G, g0, y_d, u_min, u_max, alpha=0.2701, u_first: Sequence[float] | None = None):
        super().__init__(y_d, u_min, u_max)
        self.G = np.array(G, dtype=float)
        self.g0 = np.array(g0, dtype=float)
        try:
            self._G_inv = solve_dense(self.G, np.eye(len(self.y_d)))
        except SingularSystemError as exc:
            raise ValueError("crisp TILC needs an invertible linear model") from exc
        if u_first is None:
            u_first = self._G_inv @ (self.y_d - self.g0)
        self.u_first = np.broadcast_to(np.asarray(u_first, dtype=float), self.y_d.shape).copy()
        self.filter = FilterState.initial(self.G @ self.u_first + self.g0, alpha=alpha)

    @property
    def sp(self) -> np.ndarray:
        return self.filter.sp.copy()

    def _compute(self, y_prev):
        if y_prev is None:
            return self.u_first
        crisp_filter_step(self.filter, y_prev - self.y_d)
        return self._G_inv @ (self.filter.sp - self.g0)


class FirstOrderTilc(TilcController):
    """``u[k] = u[k-1] + K (y_d - y_T[k-1])``."""

    variant = "first_order"

    def __init__(self, K, y_d, u_min, u_max, u_first: Sequence[float]):
        super().__init__(y_d, u_min, u_max)
        self.K = np.atleast_2d(np.asarray(K, dtype=float))
        self.u_first = np.broadcast_to(np.asarray(u_first, dtype=float), self.y_d.shape).copy()

    def _compute(self, y_prev):
        if y_prev is None:
            return self.u_first
        return first_order_tilc_step(self.u, y_prev, self.y_d, self.K)


def first_order_tilc_step(u_prev, y_prev, y_d, K) -> np.ndarray:
    return np.asarray(u_prev, dtype=float) + np.asarray(K, dtype=float) @ (
        np.asarray(y_d, dtype=float) - np.asarray(y_prev, dtype=float)
    )


def fit_affine(db: ExperimentDatabase) -> tuple[np.ndarray, np.ndarray]:
    """Least-squares ``y ~ G u + g0`` over every experiment of the database."""
    m = db.m
    U = db.theta.reshape(-1, m)
    Y = db.phi.reshape(-1, m)
    X = np.column_stack([np.ones(len(U)), U])
    coef, *_ = np.linalg.lstsq(X, Y, rcond=None)
    return coef[1:].T.copy(), coef[0].copy()


@dataclass
class CycleRecord:
    k: int
    sp: np.ndarray
    u: np.ndarray
    y: np.ndarray
    err_inf: float


@dataclass
class TilcRun:
    """Cycle-by-cycle trajectory of one controller."""

    variant: str
    name: str = ""
    metadata: dict = field(default_factory=dict)
    records: list[CycleRecord] = field(default_factory=list)

    def append(self, sp, u, y, y_d) -> CycleRecord:
        rec = CycleRecord(len(self.records) + 1, np.array(sp, dtype=float), np.array(u, dtype=float),
                          np.array(y, dtype=float), float(np.max(np.abs(np.asarray(y) - y_d))))
        self.records.append(rec)
        return rec

    @property
    def errors(self) -> np.ndarray:
        return np.array([r.err_inf for r in self.records])

    @property
    def inputs(self) -> np.ndarray:
        return np.array([r.u for r in self.records])

    def window(self, first: int = 10, last: int = 60) -> np.ndarray:
        """Error norms of cycles ``first..last`` inclusive."""
        return self.errors[first - 1:last]

    def to_csv(self, path: str | Path) -> None:
        m = len(self.records[0].u) if self.records else 0
        header = (["k"] + [f"sp{i + 1}" for i in range(m)] + [f"u{i + 1}" for i in range(m)]
                  + [f"y{i + 1}" for i in range(m)] + ["err_inf"])
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for r in self.records:
                w.writerow([r.k] + [repr(float(x)) for x in (*r.sp, *r.u, *r.y)] + [repr(r.err_inf)])
