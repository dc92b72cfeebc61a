"""Inversion of a square first-order TSK model.

The inverse model lives on output space.  Output ``k``'s fuzzy sets are
obtained by evaluating the forward model along the diagonal of the input box
that joins the corners where output ``k`` is extremal (case A: all-min to
all-max, case B: the anti-diagonal for the other inputs).  Each forward rule
``y = C + D u`` is then inverted in closed form, ``u = -D^-1 C + D^-1 y``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from .kriging import SingularSystemError, solve_dense
from .partition import FuzzyPartition
from .tsk import ModelFormatError, TskModel, _parse_cells

Orientation = Literal["ascending", "descending"]
Case = Literal["A", "B"]

INVERT_RTOL = 1e-10
DEGENERATE_GAP = 1e-6


class InversionError(ValueError):
    """Raised when a model does not satisfy the conditions for inversion."""


class NonMonotoneError(InversionError):
    def __init__(self, output: int, sequence: Sequence[float]):
        super().__init__(f"non-monotone output {output}: {list(map(float, sequence))}")
        self.output = output
        self.sequence = list(map(float, sequence))


class SingularCellError(InversionError):
    def __init__(self, index: Sequence[int]):
        super().__init__(f"singular cell {tuple(index)}")
        self.index = tuple(index)


def detect_cases(model: TskModel) -> list[Case]:
    """Pick, for each output, the diagonal joining its extreme corners.

    Output ``k`` uses case A (main diagonal) when the model's output range
    between the all-min and all-max corners is at least as wide as between
    the two anti-diagonal corners ``(u_k min, others max)`` and
    ``(u_k max, others min)``; otherwise case B.  The test only depends on
    which diagonal carries the extremes, so negating an output keeps its
    case and flips its orientation.
    """
    parts = model.partitions
    lo = np.array([p.u_min for p in parts])
    hi = np.array([p.u_max for p in parts])
    main = model.evaluate(hi) - model.evaluate(lo)
    cases: list[Case] = []
    for k in range(model.m):
        a = hi.copy()
        a[k] = lo[k]
        b = lo.copy()
        b[k] = hi[k]
        anti = model.evaluate(b)[k] - model.evaluate(a)[k]
        cases.append("A" if abs(main[k]) >= abs(anti) else "B")
    return cases


def probe_points(model: TskModel, cases: Sequence[Case]) -> list[np.ndarray]:
    """Diagonal probe inputs; entry ``k`` has shape ``(N_k, m)``, one row per peak of input ``k``."""
    parts = model.partitions
    m = model.m
    out = []
    for k in range(m):
        pk = parts[k]
        rows = []
        for a in pk.peaks:
            probe = np.empty(m)
            for j, pj in enumerate(parts):
                if j == k:
                    probe[j] = a
                elif cases[k] == "A":
                    probe[j] = pj.width / pk.width * (a - pk.u_min) + pj.u_min
                else:
                    probe[j] = pj.width / pk.width * (pk.u_max - a) + pj.u_min
            rows.append(probe)
        out.append(np.array(rows))
    return out


def map_peaks(model: TskModel, cases: Sequence[Case] | None = None) -> list[np.ndarray]:
    """Output-space peak sequences, one array of length ``N_k`` per output."""
    if cases is None:
        cases = detect_cases(model)
    if len(cases) != model.m:
        raise ValueError(f"expected {model.m} cases, got {len(cases)}")
    probes = probe_points(model, cases)
    return [model.evaluate_many(pr)[:, k] for k, pr in enumerate(probes)]


def check_monotonic(peaks_per_output: Sequence[Sequence[float]]) -> list[Orientation]:
    """Orientation of every output's peak sequence.

    Raises
    ------
    NonMonotoneError
        If a sequence is neither nondecreasing nor nonincreasing, or if two
        adjacent peaks are closer than ``1e-6`` of the output range.
    """
    result: list[Orientation] = []
    for k, seq in enumerate(peaks_per_output):
        a = np.asarray(seq, dtype=float)
        d = np.diff(a)
        if np.all(d >= 0):
            orient: Orientation = "ascending"
        elif np.all(d <= 0):
            orient = "descending"
        else:
            raise NonMonotoneError(k + 1, a)
        span = abs(a[-1] - a[0])
        if span == 0 or np.min(np.abs(d)) < DEGENERATE_GAP * span:
            raise NonMonotoneError(k + 1, a)
        result.append(orient)
    return result


def invert_rule(C: np.ndarray, D: np.ndarray, rtol: float = INVERT_RTOL) -> tuple[np.ndarray, np.ndarray]:
    """Invert ``y = C + D u`` into ``u = Ci + Di y``."""
    m = len(C)
    X = solve_dense(D, np.column_stack([np.eye(m), C]), rtol=rtol)
    return -X[:, m], X[:, :m]


@dataclass(frozen=True)
class InverseModel:
    """Fuzzy model from terminal outputs back to process inputs."""

    model: TskModel
    orientation: tuple[Orientation, ...]

    @property
    def m(self) -> int:
        return self.model.m

    @property
    def partitions(self) -> tuple[FuzzyPartition, ...]:
        return self.model.partitions

    def evaluate(self, y: Sequence[float]) -> np.ndarray:
        return self.model.evaluate(y)

    def evaluate_many(self, Y: np.ndarray) -> np.ndarray:
        return self.model.evaluate_many(Y)

    def to_dict(self) -> dict:
        doc = self.model.to_dict()
        doc["orientation"] = list(self.orientation)
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "InverseModel":
        parts, C, D, _ = _parse_cells(doc)
        orient = doc.get("orientation")
        if not isinstance(orient, list) or len(orient) != len(parts):
            raise ModelFormatError("inverse model needs one orientation per output")
        if any(o not in ("ascending", "descending") for o in orient):
            raise ModelFormatError(f"bad orientation {orient}")
        return cls(TskModel(parts, C, D), tuple(orient))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "InverseModel":
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ModelFormatError(f"malformed document: {exc}") from exc


def invert_model(model: TskModel, cases: Sequence[Case] | None = None) -> InverseModel:
    peaks = map_peaks(model, cases)
    orientation = check_monotonic(peaks)
    parts = []
    for a, orient in zip(peaks, orientation):
        a = np.asarray(a) if orient == "ascending" else np.asarray(a)[::-1]
        parts.append(FuzzyPartition(a[0], a[-1], tuple(a)))
    grid = model.grid_shape
    m = model.m
    Ci = np.empty(grid + (m,))
    Di = np.empty(grid + (m, m))
    for cell in np.ndindex(*grid):
        target = tuple(
            n - 1 - l if o == "descending" else l for l, n, o in zip(cell, grid, orientation)
        )
        try:
            Ci[target], Di[target] = invert_rule(model.C[cell], model.D[cell])
        except SingularSystemError as exc:
            raise SingularCellError(tuple(l + 1 for l in cell)) from exc
    return InverseModel(TskModel(parts, Ci, Di), tuple(orientation))


def evaluate_inverse(inv: InverseModel, y: Sequence[float]) -> np.ndarray:
    return inv.evaluate(y)
