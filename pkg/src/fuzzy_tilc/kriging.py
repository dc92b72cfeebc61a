"""Experiment design and kriging fit of the fuzzy model rules.

Each rule is fitted from the ``2**m`` experiments at the corners of its cell
by solving the bordered kriging system

    [ I    1   Theta ] [ B   ]   [ Y ]
    [ 1^T  0   0     ] [ C^T ] = [ 0 ]
    [ Theta^T 0  0   ] [ D^T ]   [ 0 ]

for all ``m`` outputs at once.  ``B`` holds the corner residuals; it is zero
when the data is affine over the cell.
"""

from __future__ import annotations

import csv
import itertools
import logging
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from .partition import FuzzyPartition
from .tsk import TskModel

log = logging.getLogger(__name__)

SINGULAR_RTOL = 1e-12
THETA_ATOL = 1e-6
PROGRESS_EVERY = 256


class SingularSystemError(np.linalg.LinAlgError):
    """Raised when a dense system is singular or numerically ill-conditioned."""


class DatabaseError(ValueError):
    """Raised for incomplete or inconsistent experiment databases."""


class OracleError(RuntimeError):
    """Raised when the process oracle fails on an experiment."""

    def __init__(self, index, cause: BaseException):
        super().__init__(f"oracle failed on tuple {index}: {cause!r}")
        self.index = index


def solve_dense(A: np.ndarray, rhs: np.ndarray, rtol: float = SINGULAR_RTOL) -> np.ndarray:
    """Solve ``A X = rhs`` with an LU factorization with partial pivoting.

    Raises
    ------
    SingularSystemError
        If a pivot is below ``rtol`` (default ``1e-12``) times the largest
        magnitude of its column of ``A``.
    """
    A = np.asarray(A, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"A must be square, got shape {A.shape}")
    if rhs.shape[0] != A.shape[0]:
        raise ValueError(f"rhs has {rhs.shape[0]} rows, A has {A.shape[0]}")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(A, check_finite=True)
    col_scale = np.abs(A).max(axis=0)
    pivots = np.abs(np.diag(lu))
    bad = np.flatnonzero((col_scale == 0.0) | (pivots < rtol * col_scale))
    if bad.size:
        raise SingularSystemError(
            f"singular or ill-conditioned matrix (pivot {bad[0]}: {pivots[bad[0]]:.3e})"
        )
    return scipy.linalg.lu_solve((lu, piv), rhs)


def kriging_matrix(theta: np.ndarray) -> np.ndarray:
    """Bordered kriging matrix for corner tuples ``theta`` (shape ``(2**m, m)``)."""
    q, m = theta.shape
    n = q + 1 + m
    M = np.zeros((n, n))
    M[:q, :q] = np.eye(q)
    M[:q, q] = 1.0
    M[:q, q + 1:] = theta
    M[q, :q] = 1.0
    M[q + 1:, :q] = theta.T
    return M


def fit_cell(theta: np.ndarray, Y: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Fit one cell's affine rule for all outputs.

    Parameters
    ----------
    theta : ndarray, shape ``(2**m, m)``
        Corner input tuples.
    Y : ndarray, shape ``(2**m, m)``
        Measured outputs at those tuples.

    Returns
    -------
    C : ndarray, shape ``(m,)``
    D : ndarray, shape ``(m, m)``
        ``D[k, j]`` multiplies input ``j`` in output ``k``.
    B : ndarray, shape ``(2**m, m)``
        Corner residuals ``Y - (C + theta @ D.T)``.
    """
    theta = np.asarray(theta, dtype=float)
    Y = np.asarray(Y, dtype=float)
    q, m = theta.shape
    if Y.shape != (q, m):
        raise ValueError(f"Y must have shape {(q, m)}, got {Y.shape}")
    rhs = np.zeros((q + 1 + m, m))
    rhs[:q] = Y
    X = solve_dense(kriging_matrix(theta), rhs)
    return X[q].copy(), X[q + 1:].T.copy(), X[:q].copy()


@dataclass(frozen=True)
class ExperimentDatabase:
    """Inputs ``theta`` and mean outputs ``phi`` on the experiment grid.

    Both arrays have shape ``(N_1 + 1, ..., N_m + 1, m)``; grid position
    ``(i_1 - 1, ..., i_m - 1)`` holds the experiment with 1-based multi-index
    ``(i_1, ..., i_m)``.
    """

    theta: np.ndarray
    phi: np.ndarray

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(n - 1 for n in self.theta.shape[:-1])

    @property
    def m(self) -> int:
        return self.theta.shape[-1]

    def __len__(self) -> int:
        return int(np.prod(self.theta.shape[:-1]))

    def entries(self):
        """Iterate ``(1-based index, theta, phi)``."""
        for ix in np.ndindex(*self.theta.shape[:-1]):
            yield tuple(i + 1 for i in ix), self.theta[ix], self.phi[ix]


def generate_tuples(partitions: Sequence[FuzzyPartition]) -> list[tuple[tuple[int, ...], np.ndarray]]:
    """Cartesian product of the tuple abscissae, in lexicographic index order."""
    axes = [p.tuple_abscissae() for p in partitions]
    out = []
    for ix in itertools.product(*(range(len(a)) for a in axes)):
        out.append((tuple(i + 1 for i in ix), np.array([a[i] for a, i in zip(axes, ix)])))
    return out


def _noise_rng(seed, index: Sequence[int]) -> np.random.Generator:
    base = [int(s) for s in np.atleast_1d(seed)]
    return np.random.default_rng(base + [int(i) for i in index])


def build_database(
    partitions: Sequence[FuzzyPartition],
    oracle: Callable[[np.ndarray], np.ndarray],
    repeats: int = 1,
    noise_sd: float = 0.0,
    seed: int | Sequence[int] = 0,
    *,
    batch: bool = False,
    outputs: np.ndarray | None = None,
) -> ExperimentDatabase:
    """Run the experiment design against ``oracle`` and average noisy repeats.

    The oracle is treated as a deterministic process: it is queried once per
    tuple and ``repeats`` independent Gaussian measurement errors are
    averaged on top of its answer.  The noise of each tuple comes from its
    own stream keyed by ``(seed, multi-index)``, so results do not depend on
    evaluation order.

    Parameters
    ----------
    oracle
        ``u -> y`` for a single tuple, or ``U -> Y`` on a ``(P, m)`` array
        when ``batch`` is true.
    outputs
        Precomputed noise-free oracle outputs in tuple order; skips the
        oracle entirely (used to share one set of simulations between many
        noisy designs).
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    if noise_sd < 0:
        raise ValueError("noise_sd must be >= 0")
    tuples = generate_tuples(partitions)
    m = len(partitions)
    U = np.array([t for _, t in tuples])
    if outputs is not None:
        Y = np.array(outputs, dtype=float)
        if Y.shape != U.shape:
            raise DatabaseError(f"outputs shape {Y.shape} does not match {U.shape}")
    elif batch:
        Y = np.empty_like(U)
        for start in range(0, len(U), PROGRESS_EVERY):
            stop = min(start + PROGRESS_EVERY, len(U))
            try:
                Y[start:stop] = oracle(U[start:stop])
            except Exception as exc:
                raise OracleError(tuples[start][0], exc) from exc
            log.info("experiments: %d/%d", stop, len(tuples))
    else:
        Y = np.empty_like(U)
        for n, (index, u) in enumerate(tuples):
            try:
                Y[n] = oracle(u)
            except Exception as exc:
                raise OracleError(index, exc) from exc
            if n % PROGRESS_EVERY == PROGRESS_EVERY - 1:
                log.info("experiments: %d/%d", n + 1, len(tuples))
    if noise_sd > 0:
        Y = Y.copy()
        for n, (index, _) in enumerate(tuples):
            e = _noise_rng(seed, index).standard_normal((repeats, m))
            Y[n] += noise_sd * e.mean(axis=0)
    shape = tuple(len(p.tuple_abscissae()) for p in partitions) + (m,)
    return ExperimentDatabase(U.reshape(shape), Y.reshape(shape))


def build_model(db: ExperimentDatabase, partitions: Sequence[FuzzyPartition]) -> TskModel:
    """Fit one rule per fuzzy-set combination from the surrounding experiments."""
    partitions = tuple(partitions)
    m = len(partitions)
    grid = tuple(p.n_sets for p in partitions)
    expected = tuple(n + 1 for n in grid) + (m,)
    if db.theta.shape != expected or db.phi.shape != expected:
        raise DatabaseError(f"incomplete database: shape {db.theta.shape}, expected {expected}")
    if not (np.all(np.isfinite(db.theta)) and np.all(np.isfinite(db.phi))):
        raise DatabaseError("incomplete database: missing (non-finite) entries")
    bits = np.array(list(itertools.product((0, 1), repeat=m)), dtype=np.intp)
    C = np.empty(grid + (m,))
    D = np.empty(grid + (m, m))
    B = np.empty(grid + (2**m, m))
    for cell in np.ndindex(*grid):
        corner = tuple((np.asarray(cell) + bits).T)
        C[cell], D[cell], B[cell] = fit_cell(db.theta[corner], db.phi[corner])
    return TskModel(partitions, C, D, B)


def residual_diagnostics(model: TskModel) -> np.ndarray:
    """Largest absolute kriging residual of every cell (grid-shaped)."""
    if model.B is None:
        raise ValueError("model carries no residuals")
    return np.abs(model.B).max(axis=(-2, -1))


def write_database_csv(db: ExperimentDatabase, path: str | Path) -> None:
    m = db.m
    header = [f"i{j + 1}" for j in range(m)] + [f"u{j + 1}" for j in range(m)] + [f"y{j + 1}" for j in range(m)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for index, theta, phi in db.entries():
            w.writerow(list(index) + [repr(float(x)) for x in theta] + [repr(float(x)) for x in phi])


def read_database_csv(path: str | Path, partitions: Sequence[FuzzyPartition]) -> ExperimentDatabase:
    """Load a database and check it covers the experiment design exactly."""
    m = len(partitions)
    axes = [p.tuple_abscissae() for p in partitions]
    shape = tuple(len(a) for a in axes) + (m,)
    theta = np.full(shape, np.nan)
    phi = np.full(shape, np.nan)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        want = [f"i{j + 1}" for j in range(m)] + [f"u{j + 1}" for j in range(m)] + [f"y{j + 1}" for j in range(m)]
        if header is None or [h.strip() for h in header] != want:
            raise DatabaseError(f"expected header {','.join(want)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3 * m:
                raise DatabaseError(f"line {lineno}: expected {3 * m} fields")
            try:
                index = tuple(int(x) for x in row[:m])
                u = np.array([float(x) for x in row[m:2 * m]])
                y = np.array([float(x) for x in row[2 * m:]])
            except ValueError as exc:
                raise DatabaseError(f"line {lineno}: {exc}") from exc
            ix = tuple(i - 1 for i in index)
            if any(not 0 <= i < len(a) for i, a in zip(ix, axes)):
                raise DatabaseError(f"line {lineno}: index {index} outside the design")
            target = np.array([a[i] for a, i in zip(axes, ix)])
            if np.any(np.abs(u - target) > THETA_ATOL):
                raise DatabaseError(f"line {lineno}: inputs {u.tolist()} do not match tuple {target.tolist()}")
            theta[ix] = target
            phi[ix] = y
    missing = int(np.isnan(phi[..., 0]).sum())
    if missing:
        raise DatabaseError(f"incomplete database: {missing} tuples missing")
    return ExperimentDatabase(theta, phi)
