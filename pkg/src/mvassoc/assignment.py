"""Optimal one-to-one assignment over the affinity matrix.

The solver is the O(n^3) shortest-augmenting-path form of the Hungarian
algorithm, processing rows in increasing index so ties resolve
deterministically.  Rectangular inputs are padded to square with a
constant exceeding every real entry; padded pairs never reach the output.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .affinity import AffinityMatrix
from .dataset import Detection


@dataclass(frozen=True)
class Association:
    """Selected detection pairs of one frame plus the leftovers."""

    frame_id: int
    pairs: tuple[tuple[int, int, float], ...]
    unmatched_a: tuple[int, ...]
    unmatched_b: tuple[int, ...]

    def __post_init__(self) -> None:
        rows = [i for i, _, _ in self.pairs]
        cols = [j for _, j, _ in self.pairs]
        if len(set(rows)) != len(rows) or len(set(cols)) != len(cols):
            raise ValueError("pairs must form a partial matching")


def _solve_square(cost: np.ndarray) -> list[int]:
    """Column assigned to each row of a square matrix (JV potentials form)."""
    n = cost.shape[0]
    INF = float("inf")
    u = [0.0] * (n + 1)
    v = [0.0] * (n + 1)
    match = [0] * (n + 1)  # match[j]: 1-based row matched to column j
    way = [0] * (n + 1)
    for i in range(1, n + 1):
        match[0] = i
        j0 = 0
        minv = [INF] * (n + 1)
        used = [False] * (n + 1)
        while True:
            used[j0] = True
            i0 = match[j0]
            delta = INF
            j1 = 0
            row = cost[i0 - 1]
            for j in range(1, n + 1):
                if used[j]:
                    continue
                cur = row[j - 1] - u[i0] - v[j]
                if cur < minv[j]:
                    minv[j] = cur
                    way[j] = j0
                if minv[j] < delta:
                    delta = minv[j]
                    j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[match[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if match[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            match[j0] = match[j1]
            j0 = j1
    assigned = [0] * n
    for j in range(1, n + 1):
        if match[j]:
            assigned[match[j] - 1] = j - 1
    return assigned


def hungarian(cost) -> list[tuple[int, int]]:
    """Minimum-cost assignment; returns min(m, n) (row, col) pairs by row.

    Raises:
        ValueError: non-finite entries.
    """
    c = np.asarray(cost, dtype=float)
    if c.ndim != 2:
        raise ValueError(f"cost must be 2-D, got shape {c.shape}")
    m, n = c.shape
    if m == 0 or n == 0:
        return []
    if not np.all(np.isfinite(c)):
        raise ValueError("cost matrix contains non-finite entries")
    size = max(m, n)
    if m != n:
        pad_value = 1.0 + float(c.max())
        padded = np.full((size, size), pad_value)
        padded[:m, :n] = c
    else:
        padded = c
    assigned = _solve_square(padded)
    return [(i, j) for i, j in enumerate(assigned) if i < m and j < n]


def associate(A: AffinityMatrix, accept_threshold: float = 0.0) -> Association:
    """Hungarian assignment on cost 1 - affinity, then threshold acceptance.

    Assigned pairs whose affinity is <= ``accept_threshold`` are dropped;
    the default keeps everything with any supporting evidence.
    """
    values = A.values
    pairs = []
    if values.size:
        for i, j in hungarian(1.0 - values):
            a = float(values[i, j])
            if a > accept_threshold:
                pairs.append((i, j, a))
    matched_a = {i for i, _, _ in pairs}
    matched_b = {j for _, j, _ in pairs}
    return Association(
        frame_id=A.frame_id,
        pairs=tuple(pairs),
        unmatched_a=tuple(
            i for i in range(len(A.rows)) if i not in matched_a
        ),
        unmatched_b=tuple(
            j for j in range(len(A.cols)) if j not in matched_b
        ),
    )


def save_associations(
    path,
    assoc: Association,
    dets_a: Sequence[Detection],
    dets_b: Sequence[Detection],
) -> None:
    """Per-frame export: frame_id, person id in A, person id in B, affinity."""
    lines = []
    for i, j, a in assoc.pairs:
        lines.append(
            f"{assoc.frame_id} {dets_a[i].person_id} {dets_b[j].person_id} {a!r}"
        )
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), "utf-8")
