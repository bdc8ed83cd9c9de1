"""Single-shot linear assignment: exact, auction and brute-force solvers.

All solvers maximize ``sum_i beta[i, x[i]]`` over injective maps from agents
(rows) to tasks (columns), ``n_agents <= n_tasks``. Assignments are returned
as an integer array ``task_of_agent`` with 0-based task indices.

Among several optimal assignments the exact and brute-force solvers return
the lexicographically smallest ``task_of_agent``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numba
import numpy as np

__all__ = [
    "AuctionConfig",
    "AuctionNotConverged",
    "BRUTE_FORCE_MAX_TASKS",
    "check_benefits",
    "check_assignment",
    "objective_value",
    "solve_auction",
    "solve_brute_force",
    "solve_exact",
    "solve_exact_batch",
]

BRUTE_FORCE_MAX_TASKS = 8

# reduced costs within TIGHT_RTOL * scale of zero count as tight edges
TIGHT_RTOL = 1e-10


class AuctionNotConverged(RuntimeError):
    """Raised when the auction exceeds ``max_rounds``."""


@dataclass(frozen=True)
class AuctionConfig:
    epsilon_bid: float = 0.01
    max_rounds: int = 1_000_000

    def __post_init__(self):
        if not self.epsilon_bid > 0:
            raise ValueError(f"epsilon_bid must be positive, got {self.epsilon_bid}")
        if self.max_rounds < 1:
            raise ValueError(f"max_rounds must be positive, got {self.max_rounds}")


def check_benefits(beta) -> np.ndarray:
    """Validate a benefit matrix and return it as a float64 array."""
    beta = np.asarray(beta, dtype=np.float64)
    if beta.ndim != 2 or beta.shape[0] == 0 or beta.shape[1] == 0:
        raise ValueError(f"benefit matrix must be a non-empty 2-D array, got shape {beta.shape}")
    n, m = beta.shape
    if n > m:
        raise ValueError(f"more agents than tasks ({n} > {m}); no valid assignment exists")
    if not np.all(np.isfinite(beta)):
        raise ValueError("benefit matrix contains non-finite entries")
    return beta


def check_assignment(x, n_tasks: int) -> np.ndarray:
    """Check that ``x`` gives every agent one task and no task twice."""
    x = np.asarray(x)
    if x.ndim != 1 or not np.issubdtype(x.dtype, np.integer):
        raise ValueError("assignment must be a 1-D integer array")
    if np.any(x < 0) or np.any(x >= n_tasks):
        raise ValueError(f"task index out of range [0, {n_tasks})")
    if len(np.unique(x)) != len(x):
        raise ValueError("assignment uses a task more than once")
    return x


def objective_value(beta, x) -> float:
    """Total benefit ``sum_i beta[i, x[i]]``, summed in agent order."""
    beta = np.asarray(beta, dtype=np.float64)
    x = np.asarray(x)
    if x.shape != (beta.shape[0],):
        raise ValueError(f"assignment length {x.shape} does not match {beta.shape[0]} agents")
    if np.any(x < 0) or np.any(x >= beta.shape[1]):
        raise IndexError("task index out of range")
    total = 0.0
    for i, j in enumerate(x):
        total += beta[i, j]
    return float(total)


# ---------------------------------------------------------------------------
# exact solver


@numba.njit(cache=True)
def _hungarian(cost):
    """Shortest augmenting path Hungarian method on a rectangular cost matrix.

    Minimizes. Returns (row_to_col, u, v) where u, v are optimal duals with
    cost[i, j] - u[i] - v[j] >= 0, equality on matched pairs, v <= 0 and
    v == 0 on unmatched columns.
    """
    n, m = cost.shape
    u = np.zeros(n + 1)
    v = np.zeros(m + 1)
    # p[j]: row matched to column j (1-based, 0 = free); column 0 is a virtual root
    p = np.zeros(m + 1, dtype=np.int64)
    way = np.zeros(m + 1, dtype=np.int64)
    minv = np.empty(m + 1)
    used = np.empty(m + 1, dtype=np.bool_)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv[:] = np.inf
        used[:] = False
        while True:
            used[j0] = True
            i0 = p[j0]
            delta = np.inf
            j1 = -1
            for j in range(1, m + 1):
                if not used[j]:
                    cur = cost[i0 - 1, j - 1] - u[i0] - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(m + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break
    row_to_col = np.full(n, -1, dtype=np.int64)
    for j in range(1, m + 1):
        if p[j] != 0:
            row_to_col[p[j] - 1] = j - 1
    # u[0] absorbed the root's updates; shift so columns start from v[1:]
    return row_to_col, u[1:].copy(), v[1:].copy()


@numba.njit(cache=True)
def _lexmin_tight_matching(tight, owner, row_to_col, n_real):
    """Rewrite a perfect matching of a square tight-edge graph into the one
    whose first ``n_real`` rows take the lexicographically smallest columns.

    ``tight[r, c]`` marks zero reduced-cost edges. ``owner[c]`` is the row on
    column c and ``row_to_col`` its inverse; both are updated in place.
    """
    size = tight.shape[0]
    parent_row = np.empty(size, dtype=np.int64)
    queue = np.empty(size, dtype=np.int64)
    seen_col = np.empty(size, dtype=np.bool_)
    for i in range(n_real):
        current = row_to_col[i]
        for j in range(current):
            if not tight[i, j]:
                continue
            holder = owner[j]
            if holder < i:
                continue
            # holder must reach i's old column via rows > i without using j
            seen_col[:] = False
            seen_col[j] = True
            head = 0
            tail = 1
            queue[0] = holder
            found_row = -1
            while head < tail and found_row < 0:
                r = queue[head]
                head += 1
                for c in range(size):
                    if seen_col[c] or not tight[r, c]:
                        continue
                    seen_col[c] = True
                    if c == current:
                        found_row = r
                        break
                    nxt = owner[c]
                    if nxt <= i:
                        continue
                    parent_row[nxt] = r
                    queue[tail] = nxt
                    tail += 1
            if found_row < 0:
                continue
            r = found_row
            c = current
            while True:
                prev_c = row_to_col[r]
                row_to_col[r] = c
                owner[c] = r
                if r == holder:
                    break
                c = prev_c
                r = parent_row[r]
            row_to_col[i] = j
            owner[j] = i
            break
    return row_to_col


@numba.njit(cache=True)
def _solve_lexmin(beta):
    n, m = beta.shape
    cost = -beta
    row_to_col, u, v = _hungarian(cost)
    scale = max(1.0, np.max(np.abs(beta)))
    tol = TIGHT_RTOL * scale * (n + 1)
    # square completion: m - n dummy rows of zero cost with dual u = 0
    tight = np.empty((m, m), dtype=np.bool_)
    for i in range(n):
        for j in range(m):
            tight[i, j] = cost[i, j] - u[i] - v[j] <= tol
    for i in range(n, m):
        for j in range(m):
            tight[i, j] = -v[j] <= tol
    owner = np.full(m, -1, dtype=np.int64)
    full = np.empty(m, dtype=np.int64)
    for i in range(n):
        owner[row_to_col[i]] = i
        full[i] = row_to_col[i]
    r = n
    for j in range(m):
        if owner[j] < 0:
            owner[j] = r
            full[r] = j
            r += 1
    full = _lexmin_tight_matching(tight, owner, full, n)
    return full[:n].copy()


@numba.njit(cache=True)
def _solve_many(betas):
    out = np.empty(betas.shape[:2], dtype=np.int64)
    for b in range(betas.shape[0]):
        out[b] = _solve_lexmin(betas[b])
    return out


def solve_exact(beta) -> np.ndarray:
    """Optimal assignment of ``beta`` (maximization), lexicographic tie-break.

    Solves the rectangular problem with a shortest augmenting path Hungarian
    method, then walks the zero reduced-cost subgraph to pick the
    lexicographically smallest optimum.
    """
    beta = check_benefits(beta)
    return _solve_lexmin(beta)


def solve_exact_batch(betas) -> np.ndarray:
    """:func:`solve_exact` over a stack ``(batch, n, m)`` of benefit matrices."""
    betas = np.asarray(betas, dtype=np.float64)
    if betas.ndim != 3:
        raise ValueError(f"expected a (batch, n, m) stack, got shape {betas.shape}")
    if betas.shape[0] == 0:
        return np.empty((0, betas.shape[1]), dtype=np.int64)
    check_benefits(betas[0])
    if not np.all(np.isfinite(betas)):
        raise ValueError("benefit matrix contains non-finite entries")
    return _solve_many(np.ascontiguousarray(betas))


def solve_brute_force(beta) -> np.ndarray:
    """Enumerate every injective agent->task map. Test oracle only."""
    beta = check_benefits(beta)
    n, m = beta.shape
    if m > BRUTE_FORCE_MAX_TASKS:
        raise ValueError(f"brute force limited to {BRUTE_FORCE_MAX_TASKS} tasks, got {m}")
    scale = max(1.0, float(np.max(np.abs(beta))))
    tol = TIGHT_RTOL * scale * (n + 1)
    best, best_value = None, -math.inf
    # permutations() yields tuples in lexicographic order, so the first of
    # several (near-)equal optima is kept
    for perm in itertools.permutations(range(m), n):
        value = 0.0
        for i, j in enumerate(perm):
            value += beta[i, j]
        if value > best_value + tol:
            best, best_value = perm, value
    return np.array(best, dtype=np.int64)


# ---------------------------------------------------------------------------
# auction


def solve_auction(beta, cfg: AuctionConfig | None = None) -> np.ndarray:
    """Forward (Jacobi) auction with a fixed bid increment.

    Every round each unassigned agent bids on its most profitable task,
    raising its price by the gap to the second-best profit plus
    ``epsilon_bid``; each task goes to its highest bidder (lowest index on
    ties) and evicts the previous holder. Prices start at zero, so the final
    assignment is within ``n * epsilon_bid`` of optimal.
    """
    beta = check_benefits(beta)
    cfg = cfg or AuctionConfig()
    n, m = beta.shape
    eps = cfg.epsilon_bid
    prices = np.zeros(m)
    owner = np.full(m, -1, dtype=np.int64)
    task_of = np.full(n, -1, dtype=np.int64)
    rows = np.arange(n)
    for _ in range(cfg.max_rounds):
        bidders = rows[task_of < 0]
        if bidders.size == 0:
            return task_of
        profit = beta[bidders] - prices
        best = np.argmax(profit, axis=1)
        best_profit = profit[np.arange(bidders.size), best]
        if m > 1:
            profit[np.arange(bidders.size), best] = -np.inf
            second = profit.max(axis=1)
        else:
            second = best_profit - eps
        bids = prices[best] + (best_profit - second) + eps
        for task in np.unique(best):
            mask = best == task
            k = np.argmax(bids[mask])
            winner = bidders[mask][k]
            if owner[task] >= 0:
                task_of[owner[task]] = -1
            owner[task] = winner
            task_of[winner] = task
            prices[task] = bids[mask][k]
    if np.all(task_of >= 0):
        return task_of
    raise AuctionNotConverged(
        f"auction did not converge in {cfg.max_rounds} rounds; "
        f"epsilon_bid={eps} may be too small for the benefit scale"
    )
