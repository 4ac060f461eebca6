"""Block Gibbs sampling over association matrices, one row at a time."""
from __future__ import annotations

from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..errors import InvalidInit
from .kernels import AssociationTable


def matrix_violations(matrix, n_subsets: int, reflector_rows: Sequence[bool] = ()) -> List[str]:
    """Reasons ``matrix`` is not a valid association matrix (empty if valid)."""
    m = np.asarray(matrix, dtype=int)
    if m.ndim != 2:
        return ["matrix must be 2-D"]
    bad = []
    if m.size and (m.min() < -1 or m.max() > n_subsets):
        bad.append("entry outside {-1, 0, .., S}")
    for i, row in enumerate(m):
        if np.any(row == -1) and not np.all(row == -1):
            bad.append(f"row {i} mixes death and association entries")
    pos = m[m > 0]
    if pos.size != np.unique(pos).size:
        bad.append("a subset is assigned twice")
    for i, refl in enumerate(reflector_rows):
        if refl and m.shape[1] > 1 and np.any(m[i, 1:] > 0):
            bad.append(f"reflector row {i} uses a bounce column")
    return bad


def _conflicts(table: AssociationTable, idx: Sequence[int]) -> bool:
    occ = 0
    for row, i in zip(table.rows, idx):
        mk = int(row.masks[i])
        if occ & mk:
            return True
        occ |= mk
    return False


def gibbs_indices(table: AssociationTable, n_iter: int, rng: np.random.Generator,
                  init: Optional[Sequence[int]] = None) -> List[Tuple[int, ...]]:
    """Row-value indices of ``n_iter`` Gibbs states; the first is ``init``.

    Each sweep redraws every row from its weights restricted to values that
    share no subset with the other rows.  A row whose admissible values all
    have zero weight keeps its current value.
    """
    if n_iter < 1:
        raise ValueError("need at least one iteration")
    cur = list(table.initial() if init is None else init)
    if len(cur) != len(table.rows):
        raise InvalidInit("initial state has the wrong number of rows")
    if _conflicts(table, cur):
        raise InvalidInit("initial association assigns a subset twice")
    rows = table.rows
    n = len(rows)
    out = [tuple(cur)]
    if n == 0:
        return out * n_iter
    weights = [np.exp(r.log_w - np.max(r.log_w)) if np.isfinite(np.max(r.log_w)) else np.zeros(len(r.log_w))
               for r in rows]
    row_masks = [r.masks for r in rows]
    cur_mask = [int(row_masks[i][cur[i]]) for i in range(n)]
    for _ in range(1, n_iter):
        u = rng.random(n)
        for i in range(n):
            occ = 0
            for j in range(n):
                if j != i:
                    occ |= cur_mask[j]
            p = weights[i] * ((row_masks[i] & occ) == 0).astype(bool)
            cs = np.cumsum(p)
            if cs[-1] <= 0:
                continue
            k = int(np.searchsorted(cs, u[i] * cs[-1], side="right"))
            cur[i] = min(k, len(p) - 1)
            cur_mask[i] = int(row_masks[i][cur[i]])
        out.append(tuple(cur))
    return out


def gibbs_sample(theta_init, n_iter: int, table: AssociationTable,
                 rng: Optional[np.random.Generator] = None) -> List[np.ndarray]:
    """Association matrices visited by the chain started at ``theta_init``.

    Duplicates are kept; callers deduplicate.
    """
    if n_iter < 1:
        raise ValueError("need at least one iteration")
    theta_init = np.asarray(theta_init, dtype=int).reshape(len(table.rows), table.n_cols)
    if matrix_violations(theta_init, table.n_subsets, table.reflector_rows):
        raise InvalidInit("; ".join(matrix_violations(theta_init, table.n_subsets, table.reflector_rows)))
    try:
        init = table.indices(theta_init)
    except ValueError as exc:
        raise InvalidInit(str(exc)) from exc
    rng = np.random.default_rng() if rng is None else rng
    return [table.matrix(idx) for idx in gibbs_indices(table, n_iter, rng, init)]
