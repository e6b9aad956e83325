"""Gated minimum-cost bipartite assignment.

Cost matrices are float arrays; ``INFEASIBLE`` (positive infinity) marks a
forbidden pair. It is never summed: :func:`solve` swaps it for a padding
cost internally and drops any pair that lands on one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels

INFEASIBLE = float("inf")


@dataclass(frozen=True)
class Assignment:
    pairs: tuple[tuple[int, int], ...]
    unmatched_rows: tuple[int, ...]
    unmatched_cols: tuple[int, ...]
    cost: float = 0.0

    def as_dict(self) -> dict[int, int]:
        return dict(self.pairs)


def as_cost_matrix(c) -> np.ndarray:
    c = np.array(c, dtype=np.float64)
    if c.ndim != 2:
        if c.size == 0:
            return c.reshape(0, 0)
        raise ValueError("cost matrix must be 2-D")
    finite = np.isfinite(c)
    if np.isnan(c).any() or (c[finite] < 0).any() or np.isneginf(c).any():
        raise ValueError("finite costs must be non-negative and not NaN")
    return c


def solve(c) -> Assignment:
    """Maximum-cardinality feasible matching of minimum total cost.

    Rectangular input is padded to square. Padding and infeasible cells
    share a cost larger than the sum of any full set of feasible entries, so
    the optimum first maximizes the number of feasible pairs and then
    minimizes their cost.
    """
    c = as_cost_matrix(c)
    n_rows, n_cols = c.shape
    feasible = np.isfinite(c)
    if n_rows == 0 or n_cols == 0 or not feasible.any():
        return Assignment((), tuple(range(n_rows)), tuple(range(n_cols)), 0.0)

    n = max(n_rows, n_cols)
    top = float(c[feasible].max())
    big = (top + 1.0) * (n + 1)
    sq = np.full((n, n), big)
    sq[:n_rows, :n_cols] = np.where(feasible, c, big)
    row_to_col = kernels.hungarian_square(sq)

    pairs = []
    total = 0.0
    for r in range(n_rows):
        col = int(row_to_col[r])
        if col < n_cols and feasible[r, col]:
            pairs.append((r, col))
            total += float(c[r, col])
    used_rows = {r for r, _ in pairs}
    used_cols = {k for _, k in pairs}
    return Assignment(
        tuple(pairs),
        tuple(r for r in range(n_rows) if r not in used_rows),
        tuple(k for k in range(n_cols) if k not in used_cols),
        total,
    )


def gate_costs(c, gate: float) -> np.ndarray:
    if gate <= 0:
        raise ValueError("gate must be positive")
    c = as_cost_matrix(c)
    return np.where(c > gate, INFEASIBLE, c)
