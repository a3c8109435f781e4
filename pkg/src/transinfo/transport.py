"""Transport costs, Kantorovich duality and the rate-function calculus.

The optimal-transport solver is an exact LP (HiGHS dual simplex on the
bipartite transport polytope); the instances here are tiny and the
identities under test (duality, the half-TV formula for the trivial
metric) are exact, so entropic regularization would only pollute the
tolerance budgets.  Dual potentials are tightened by a c-transform so
the returned (u, v) are exactly feasible.

Rate functions alpha: [0, inf) -> [0, inf] come in three parametric
flavors; their monotone conjugate sup_{r>=0} (lambda r - alpha(r)) and
inf-convolution inf{sum alpha_i(r_i) : r_i >= 0, sum r_i = r} are the
calculus needed by the tensorization statements.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .chains import Density, MetricMatrix, ReversibleChain, fisher_information
from .errors import (
    InfeasibleMarginals,
    ModelValidation,
    ProductTooLarge,
    UnsortedGrid,
)

MARGINAL_TOL = 1e-9
DUALITY_GAP_TOL = 1e-9


@dataclass(frozen=True)
class CostMatrix:
    """Nonnegative cost c(x, y); zero diagonal in the square aligned case."""

    c: np.ndarray

    @staticmethod
    def validate(c: np.ndarray, aligned: bool | None = None) -> "CostMatrix":
        c = np.asarray(c, dtype=float).copy()
        if c.ndim != 2:
            raise ModelValidation("cost must be a matrix")
        if np.any(c < 0):
            raise ModelValidation("cost entries must be nonnegative")
        square = c.shape[0] == c.shape[1]
        if aligned is None:
            aligned = square
        if aligned and square and np.any(np.abs(np.diag(c)) > 1e-15):
            raise ModelValidation("aligned square cost must vanish on the diagonal")
        c.setflags(write=False)
        return CostMatrix(c=c)

    @staticmethod
    def from_metric(d: MetricMatrix, power: int = 1) -> "CostMatrix":
        return CostMatrix.validate(d.d ** power)


@dataclass(frozen=True)
class Coupling:
    """Feasible transport plan with marginals (nu, mu)."""

    pi: np.ndarray
    nu: np.ndarray
    mu: np.ndarray

    def marginal_residual(self) -> float:
        r0 = np.max(np.abs(self.pi.sum(axis=1) - self.nu))
        r1 = np.max(np.abs(self.pi.sum(axis=0) - self.mu))
        return float(max(r0, r1))

    def to_csv(self, row_labels=None, col_labels=None) -> str:
        n, m = self.pi.shape
        rows = ["," + ",".join(col_labels or [str(j) for j in range(m)])]
        for i in range(n):
            lbl = (row_labels or [str(k) for k in range(n)])[i]
            rows.append(lbl + "," + ",".join(f"{v:.17g}" for v in self.pi[i]))
        return "\n".join(rows) + "\n"


def _check_marginals(nu: np.ndarray, mu: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    nu = np.asarray(nu, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if np.any(nu < -1e-15) or np.any(mu < -1e-15):
        raise InfeasibleMarginals("marginals must be nonnegative")
    if abs(nu.sum() - mu.sum()) > MARGINAL_TOL:
        raise InfeasibleMarginals(
            f"marginal masses differ: {nu.sum()!r} vs {mu.sum()!r}"
        )
    return np.clip(nu, 0.0, None), np.clip(mu, 0.0, None)


def _transport_lp(c: np.ndarray, nu: np.ndarray, mu: np.ndarray):
    # one column constraint dropped: it is implied by the rest, and the
    # full-rank system lets the solver run at tight feasibility tolerances
    n, m = c.shape
    rows, cols, data = [], [], []
    for i in range(n):
        rows.extend([i] * m)
        cols.extend(range(i * m, (i + 1) * m))
        data.extend([1.0] * m)
    for j in range(m - 1):
        rows.extend([n + j] * n)
        cols.extend(range(j, n * m, m))
        data.extend([1.0] * n)
    A = sparse.coo_matrix((data, (rows, cols)), shape=(n + m - 1, n * m)).tocsr()
    b = np.concatenate([nu, mu[:-1]])
    res = linprog(c.ravel(), A_eq=A, b_eq=b, bounds=(0, None), method="highs",
                  options={"primal_feasibility_tolerance": 1e-10,
                           "dual_feasibility_tolerance": 1e-10})
    if res.status != 0:  # pragma: no cover - tiny feasible LPs
        raise InfeasibleMarginals(f"LP solver failed: {res.message}")
    return res


class _UnionFind:
    def __init__(self, size):
        self.parent = list(range(size))

    def find(self, a):
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[ra] = rb
        return True


def _spanning_forest(pi, n, m):
    """Max-flow spanning forest of the support graph.

    A basic solution's support is a forest in exact arithmetic; solver
    noise adds spurious small edges that can close cycles, so edges are
    admitted in decreasing flow order under a union-find acyclicity test.
    """
    cells = np.argwhere(pi > 0)
    order = np.argsort(-pi[pi > 0])
    uf = _UnionFind(n + m)
    forest = set()
    for k in order:
        i, j = int(cells[k][0]), int(cells[k][1])
        if uf.union(i, n + j):
            forest.add((i, j))
    return forest


def _connect_components(c, forest, nu, mu, n, m):
    """Grow the forest into a spanning tree along cheapest reduced-cost edges.

    Each pending component attaches directly to the main component with
    the edge oriented by its own mass imbalance (exporters send a row
    into the main tree, importers receive a column), so the connector
    carries exactly |imbalance| >= 0 and the tree flows stay feasible.
    At optimality the connectors have (near-)zero reduced cost, keeping
    the roundoff-sized routed masses inside the gap tolerance.
    """
    forest = set(forest)
    while True:
        uf = _UnionFind(n + m)
        for i, j in forest:
            uf.union(i, n + j)
        comp_rows = np.array([uf.find(i) for i in range(n)])
        comp_cols = np.array([uf.find(n + j) for j in range(m)])
        roots, counts = np.unique(np.concatenate([comp_rows, comp_cols]),
                                  return_counts=True)
        if len(roots) == 1:
            return forest
        main = roots[int(np.argmax(counts))]
        pending = next(r for r in roots if r != main)
        rows_in = comp_rows == pending
        cols_in = comp_cols == pending
        imbalance = float(nu[rows_in].sum() - mu[cols_in].sum())
        u, v = _forest_potentials(c, forest, n, m)
        reduced = c - (u[:, None] - v[None, :])
        rows_main = comp_rows == main
        cols_main = comp_cols == main
        if imbalance >= 0 and rows_in.any() and cols_main.any():
            mask = rows_in[:, None] & cols_main[None, :]
        else:
            mask = rows_main[:, None] & cols_in[None, :]
        masked = np.where(mask, reduced, math.inf)
        i, j = np.unravel_index(np.argmin(masked), masked.shape)
        forest.add((int(i), int(j)))


def _tree_flows(forest, nu, mu, n, m):
    """Exact flows on a spanning structure by leaf elimination."""
    rows_adj = [set() for _ in range(n)]
    cols_adj = [set() for _ in range(m)]
    for i, j in forest:
        rows_adj[i].add(j)
        cols_adj[j].add(i)
    rem_nu = nu.astype(float).copy()
    rem_mu = mu.astype(float).copy()
    out = np.zeros((n, m))
    stack = [(0, i) for i in range(n) if len(rows_adj[i]) == 1] + \
            [(1, j) for j in range(m) if len(cols_adj[j]) == 1]
    while stack:
        side, k = stack.pop()
        if side == 0:
            if len(rows_adj[k]) != 1:
                continue
            j = next(iter(rows_adj[k]))
            flow = rem_nu[k]
            out[k, j] += flow
            rem_nu[k] = 0.0
            rem_mu[j] -= flow
            rows_adj[k].discard(j)
            cols_adj[j].discard(k)
            if len(cols_adj[j]) == 1:
                stack.append((1, j))
        else:
            if len(cols_adj[k]) != 1:
                continue
            i = next(iter(cols_adj[k]))
            flow = rem_mu[k]
            out[i, k] += flow
            rem_mu[k] = 0.0
            rem_nu[i] -= flow
            cols_adj[k].discard(i)
            rows_adj[i].discard(k)
            if len(rows_adj[i]) == 1:
                stack.append((0, i))
    return out


def _repair_negative_edges(c, forest, nu, mu, n, m, max_repairs=5000):
    """Restore primal feasibility of a dual-optimal spanning tree.

    Dual-simplex step: a tree edge carrying its cut's (roundoff-sized)
    imbalance with the wrong sign leaves; the cheapest reduced-cost edge
    crossing the same cut in the opposite orientation enters.  Leaving
    edges are chosen by smallest index and entering ties break the same
    way (Bland's rule), so the degenerate zero-reduced-cost ties cannot
    cycle.  The exchanged flows are roundoff-sized, so the value moves
    well below the gap tolerance.
    """
    forest = set(forest)
    for _ in range(max_repairs):
        pi = _tree_flows(forest, nu, mu, n, m)
        bad_edges = sorted(e for e in forest if pi[e] < -1e-14)
        if not bad_edges:
            break
        bad = bad_edges[0]
        forest.discard(bad)
        left = _component_of(forest, n, m, (0, bad[0]))
        u, v = _forest_potentials(c, forest, n, m)
        reduced = c - (u[:, None] - v[None, :])
        # need flow to cross toward bad[0]'s side: rows outside, cols inside
        rows_out = np.array([(0, i) not in left for i in range(n)])
        cols_in = np.array([(1, j) in left for j in range(m)])
        masked = np.where(rows_out[:, None] & cols_in[None, :], reduced, math.inf)
        best = masked.min()
        if not np.isfinite(best):
            forest.add(bad)   # no admissible swap; keep the tiny negative
            break
        # smallest-index tie break among (near-)minimal reduced costs
        tol = 1e-12 * max(1.0, float(np.max(np.abs(c))))
        candidates = np.argwhere(masked <= best + tol)
        i, j = candidates[0]
        forest.add((int(i), int(j)))
    return forest


def _component_of(forest, n, m, start):
    rows_adj = [[] for _ in range(n)]
    cols_adj = [[] for _ in range(m)]
    for i, j in forest:
        rows_adj[i].append(j)
        cols_adj[j].append(i)
    from collections import deque
    seen = {start}
    queue = deque([start])
    while queue:
        side, k = queue.popleft()
        nbrs = [(1, j) for j in rows_adj[k]] if side == 0 else \
               [(0, i) for i in cols_adj[k]]
        for nxt in nbrs:
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return seen


def _simplex_polish(c, nu, mu, pi, forest, max_pivots=500):
    """Network-simplex pivots from a near-optimal vertex to the exact one.

    The LP solver terminates within its own tolerances; a handful of
    pivots (entering edge = most negative reduced cost, flow pushed
    around the induced forest cycle) closes the duality gap to roundoff.
    """
    n, m = c.shape
    forest = set(forest)
    pi = pi.copy()

    for _ in range(max_pivots):
        u, v = _forest_potentials(c, forest, n, m)
        reduced = c - (u[:, None] - v[None, :])
        i_star, j_star = np.unravel_index(np.argmin(reduced), reduced.shape)
        if reduced[i_star, j_star] >= -1e-12 * max(1.0, float(np.max(np.abs(c)))):
            break
        path = _forest_path(forest, n, m, int(i_star), int(j_star))
        if path is None:
            forest.add((int(i_star), int(j_star)))   # joins two components
            continue
        # cycle: entering edge plus the forest path; orient +/- alternately
        plus = [(int(i_star), int(j_star))]
        minus = []
        for k, edge in enumerate(path):
            (minus if k % 2 == 0 else plus).append(edge)
        theta = min(pi[e] for e in minus)
        for e in plus:
            pi[e] += theta
        leaving = min(minus, key=lambda e: pi[e] - theta)
        for e in minus:
            pi[e] = max(pi[e] - theta, 0.0)
        forest.add((int(i_star), int(j_star)))
        forest.discard(leaving)
        pi[leaving] = 0.0
    return np.clip(pi, 0.0, None), forest


def _forest_potentials(c, forest, n, m):
    u = np.full(n, np.nan)
    v = np.full(m, np.nan)
    rows_adj = [[] for _ in range(n)]
    cols_adj = [[] for _ in range(m)]
    for i, j in forest:
        rows_adj[i].append(j)
        cols_adj[j].append(i)
    from collections import deque
    for start in range(n):
        if not math.isnan(u[start]):
            continue
        u[start] = 0.0
        queue = deque([(0, start)])
        while queue:
            side, k = queue.popleft()
            if side == 0:
                for j in rows_adj[k]:
                    if math.isnan(v[j]):
                        v[j] = u[k] - c[k, j]
                        queue.append((1, j))
            else:
                for i in cols_adj[k]:
                    if math.isnan(u[i]):
                        u[i] = v[k] + c[i, k]
                        queue.append((0, i))
    # isolated column nodes: tightest feasible value against assigned u
    for j in range(m):
        if math.isnan(v[j]):
            v[j] = float(np.max(u - c[:, j]))
    return u, v


def _forest_path(forest, n, m, i_star, j_star):
    """Alternating edge path in the forest from row i_star to column j_star."""
    from collections import deque
    rows_adj = [[] for _ in range(n)]
    cols_adj = [[] for _ in range(m)]
    for i, j in forest:
        rows_adj[i].append(j)
        cols_adj[j].append(i)
    parent = {}
    start = (0, i_star)
    target = (1, j_star)
    seen = {start}
    queue = deque([start])
    while queue:
        node = queue.popleft()
        if node == target:
            break
        side, k = node
        nbrs = [(1, j) for j in rows_adj[k]] if side == 0 else \
               [(0, i) for i in cols_adj[k]]
        for nxt in nbrs:
            if nxt not in seen:
                seen.add(nxt)
                parent[nxt] = node
                queue.append(nxt)
    else:
        return None
    path = []
    node = target
    while node != start:
        prev = parent[node]
        edge = (prev[1], node[1]) if prev[0] == 0 else (node[1], prev[1])
        path.append(edge)
        node = prev
    return path


def ot_cost(c: CostMatrix, nu: np.ndarray, mu: np.ndarray) -> tuple[float, Coupling]:
    """Minimal coupling cost inf_pi sum c(x,y) pi(x,y) with marginals (nu, mu).

    The solver's near-vertex plan is polished to an exact vertex (leaf
    elimination on the support forest) and the duality gap against the
    complementary-slackness potentials must close below 1e-9.
    """
    nu, mu = _check_marginals(nu, mu)
    n, m = c.c.shape
    if len(nu) != n or len(mu) != m:
        raise InfeasibleMarginals("marginal lengths do not match the cost shape")
    pi, forest = _optimal_vertex(c.c, nu, mu)
    value = float(np.sum(pi * c.c))
    dual_value, _, _ = _dual_value(c.c, nu, mu, forest)
    if abs(value - dual_value) > DUALITY_GAP_TOL * max(1.0, abs(value)):
        raise InfeasibleMarginals(
            f"duality gap {abs(value - dual_value):.3e} exceeds tolerance"
        )
    return value, Coupling(pi=pi, nu=nu, mu=mu)


def _optimal_vertex(c, nu, mu):
    """Exact optimal vertex and its spanning tree, from an LP warm start."""
    res = _transport_lp(c, nu, mu)
    n, m = c.shape
    forest = _spanning_forest(res.x.reshape(n, m), n, m)
    pi = np.clip(_tree_flows(forest, nu, mu, n, m), 0.0, None)
    pi, forest = _simplex_polish(c, nu, mu, pi, forest)
    forest = _connect_components(c, forest, nu, mu, n, m)
    # alternate primal-feasibility repair with (possibly degenerate) pivots
    # until the tree is an optimal basis: dual-feasible with flows >= 0
    for _ in range(6):
        forest = _repair_negative_edges(c, forest, nu, mu, n, m)
        pi = np.clip(_tree_flows(forest, nu, mu, n, m), 0.0, None)
        pi, new_forest = _simplex_polish(c, nu, mu, pi, forest)
        if new_forest == forest:
            break
        forest = new_forest
    pi = np.clip(_tree_flows(forest, nu, mu, n, m), 0.0, None)
    u, v = _forest_potentials(c, forest, n, m)
    reduced = np.clip(c - (u[:, None] - v[None, :]), 0.0, None)
    return _settle_marginals(pi, nu, mu, reduced), forest


def _settle_marginals(pi, nu, mu, reduced, rounds=3):
    """Absorb the roundoff-scale marginal errors left by clipping.

    Surpluses come off the largest entry of their row/column (optimal
    support, zero reduced cost); deficits are routed greedily along
    minimal-reduced-cost cells.  With the potentials cancelling against
    the restored marginals, the net value drift is the moved mass times
    near-zero reduced costs, independent of the cost scale.
    """
    pi = pi.copy()
    for _ in range(rounds):
        row_err = pi.sum(axis=1) - nu
        col_err = pi.sum(axis=0) - mu
        if np.all(np.abs(row_err) < 1e-15) and np.all(np.abs(col_err) < 1e-15):
            break
        for i in np.nonzero(row_err > 1e-15)[0]:
            j = int(np.argmax(pi[i]))
            pi[i, j] = max(pi[i, j] - row_err[i], 0.0)
        col_err = pi.sum(axis=0) - mu
        for j in np.nonzero(col_err > 1e-15)[0]:
            i = int(np.argmax(pi[:, j]))
            pi[i, j] = max(pi[i, j] - col_err[j], 0.0)
        _route_deficits(pi, nu, mu, reduced)
    return pi


def _route_deficits(pi, nu, mu, reduced):
    row_def = np.clip(nu - pi.sum(axis=1), 0.0, None)
    col_def = np.clip(mu - pi.sum(axis=0), 0.0, None)
    rows = np.nonzero(row_def > 0)[0]
    cols = np.nonzero(col_def > 0)[0]
    if len(rows) == 0 or len(cols) == 0:
        return
    cells = [(reduced[i, j], i, j) for i in rows for j in cols]
    cells.sort()
    for _, i, j in cells:
        move = min(row_def[i], col_def[j])
        if move <= 0:
            continue
        pi[i, j] += move
        row_def[i] -= move
        col_def[j] -= move


def _dual_value(c, nu, mu, forest):
    n, m = c.shape
    u, _ = _forest_potentials(c, forest, n, m)
    # tighten by a c-transform: keeps feasibility exact and can only
    # increase the dual value toward the primal
    v = np.max(u[:, None] - c, axis=0)
    u = np.min(v[None, :] + c, axis=1)
    v = np.max(u[:, None] - c, axis=0)
    value = float(np.dot(u, nu) - np.dot(v, mu))
    return value, u, v


def kantorovich_dual(c: CostMatrix, nu: np.ndarray, mu: np.ndarray):
    """Dual value sup { <u, nu> - <v, mu> : u(x) - v(y) <= c(x,y) }."""
    nu, mu = _check_marginals(nu, mu)
    _, forest = _optimal_vertex(c.c, nu, mu)
    return _dual_value(c.c, nu, mu, forest)


def w1(d: MetricMatrix, nu: np.ndarray, mu: np.ndarray) -> float:
    """L^1-Wasserstein distance: transport cost of the metric itself."""
    emb = line_embedding(d)
    if emb is not None:
        return _w1_line(emb, np.asarray(nu, float), np.asarray(mu, float))
    value, _ = ot_cost(CostMatrix.from_metric(d, 1), nu, mu)
    return value


def w2(d: MetricMatrix, nu: np.ndarray, mu: np.ndarray) -> float:
    """L^2-Wasserstein distance: sqrt of the quadratic-cost optimum."""
    emb = line_embedding(d)
    if emb is not None:
        return w2_quantile_1d(emb, np.asarray(nu, float), np.asarray(mu, float))
    value, _ = ot_cost(CostMatrix.from_metric(d, 2), nu, mu)
    return math.sqrt(max(value, 0.0))


def line_embedding(d: MetricMatrix) -> np.ndarray | None:
    """Detect d[i,j] = |s_i - s_j| with s increasing along the index order.

    Line metrics admit closed-form W_1 / W_2 via the monotone coupling;
    the generic LP stays available as the cross-check route.
    """
    s = d.d[0, :].copy()
    if np.any(np.diff(s) <= 0):
        return None
    if np.max(np.abs(np.abs(s[:, None] - s[None, :]) - d.d)) > 1e-12 * max(1.0, s[-1]):
        return None
    return s


def _w1_line(s: np.ndarray, nu: np.ndarray, mu: np.ndarray) -> float:
    gap = np.cumsum(nu - mu)[:-1]
    return float(np.sum(np.abs(gap) * np.diff(s)))


def w1_potential(d: MetricMatrix, nu: np.ndarray, mu: np.ndarray) -> np.ndarray:
    """A maximizing 1-Lipschitz potential for <u, nu - mu>.

    Used as the analytic gradient of nu -> W_1(nu, mu) in the best-constant
    ascents; defined up to an additive constant.
    """
    return w1_with_potential(d, nu, mu)[1]


def w1_with_potential(d: MetricMatrix, nu, mu) -> tuple[float, np.ndarray]:
    """(W_1, maximizing potential) from a single solve."""
    nu = np.asarray(nu, dtype=float)
    mu = np.asarray(mu, dtype=float)
    emb = line_embedding(d)
    if emb is not None:
        # <u, nu-mu> = -sum_k (u_{k+1}-u_k) cum_k by Abel summation
        sgn = -np.sign(np.cumsum(nu - mu)[:-1])
        u = np.concatenate([[0.0], np.cumsum(sgn * np.diff(emb))])
        return _w1_line(emb, nu, mu), u
    value, u, _ = kantorovich_dual(CostMatrix.from_metric(d, 1), nu, mu)
    return value, u


def w2sq_with_potential(d: MetricMatrix, nu, mu) -> tuple[float, np.ndarray]:
    """(W_2^2, quadratic-cost Kantorovich potential) from a single solve."""
    nu = np.asarray(nu, dtype=float)
    mu = np.asarray(mu, dtype=float)
    emb = line_embedding(d)
    if emb is not None and np.all(nu > 0) and np.all(mu > 0):
        val = w2_quantile_1d(emb, nu, mu)
        return val * val, _staircase_potential(emb, nu, mu)
    value, u, _ = kantorovich_dual(CostMatrix.from_metric(d, 2), nu, mu)
    return value, u


def w2_potential(d: MetricMatrix, nu: np.ndarray, mu: np.ndarray) -> np.ndarray:
    """A Kantorovich potential u of the quadratic cost with u(x)-v(y) <= d^2.

    Subgradient of nu -> W_2^2(nu, mu); line metrics use the monotone
    staircase (complementary slackness along the quantile coupling).
    """
    nu = np.asarray(nu, dtype=float)
    mu = np.asarray(mu, dtype=float)
    emb = line_embedding(d)
    if emb is not None and np.all(nu > 0) and np.all(mu > 0):
        return _staircase_potential(emb, nu, mu)
    _, u, _ = kantorovich_dual(CostMatrix.from_metric(d, 2), nu, mu)
    return u


def _staircase_potential(s: np.ndarray, nu: np.ndarray, mu: np.ndarray) -> np.ndarray:
    n = len(s)
    cost = lambda i, j: (s[i] - s[j]) ** 2
    u = np.zeros(n)
    v = np.zeros(n)
    u_seen = np.zeros(n, dtype=bool)
    v_seen = np.zeros(n, dtype=bool)
    i = j = 0
    a, b = nu[0], mu[0]
    u[0] = 0.0
    v[0] = -cost(0, 0)
    u_seen[0] = v_seen[0] = True
    # walk the monotone coupling support; equality u_i - v_j = c_ij on cells
    while i < n - 1 or j < n - 1:
        if a < b - 1e-18 and i < n - 1 or j == n - 1:
            i += 1
            b -= a
            a = nu[i]
            u[i] = v[j] + cost(i, j)
            u_seen[i] = True
        else:
            j += 1
            a -= b
            b = mu[j]
            v[j] = u[i] - cost(i, j)
            v_seen[j] = True
    return u


def w2_quantile_1d(grid: np.ndarray, nu: np.ndarray, mu: np.ndarray) -> float:
    """W_2 of two distributions on a common sorted grid via quantiles.

    The monotone (quantile) coupling is optimal for convex costs in 1-D;
    this is the independent oracle for ``w2`` on line graphs.
    """
    grid = np.asarray(grid, dtype=float)
    if np.any(np.diff(grid) <= 0):
        raise UnsortedGrid("grid must be strictly increasing")
    nu, mu = _check_marginals(nu, mu)
    cn = np.cumsum(nu)
    cm = np.cumsum(mu)
    q = np.union1d(cn, cm)
    q = q[q <= min(cn[-1], cm[-1]) + 1e-15]
    prev = 0.0
    total = 0.0
    for qk in q:
        seg = qk - prev
        if seg <= 0:
            continue
        # quantile of each marginal on (prev, qk]
        i = min(int(np.searchsorted(cn, prev + seg / 2)), len(grid) - 1)
        j = min(int(np.searchsorted(cm, prev + seg / 2)), len(grid) - 1)
        total += seg * (grid[i] - grid[j]) ** 2
        prev = qk
    return math.sqrt(max(total, 0.0))


def tensor_cost(costs: list[CostMatrix]) -> CostMatrix:
    """Sum-cost on the row-major product space: (+c)(x,y) = sum c_i(x_i,y_i)."""
    sizes = [c.c.shape[0] for c in costs]
    for c in costs:
        if c.c.shape[0] != c.c.shape[1]:
            raise ModelValidation("tensor factors must be square")
    total = int(np.prod(sizes))
    if total * total > 10_000:
        raise ProductTooLarge(f"product space has {total}^2 cost entries")
    k = len(sizes)
    out = np.zeros(sizes + sizes)
    for i, c in enumerate(costs):
        shape = [1] * (2 * k)
        shape[i] = sizes[i]
        shape[k + i] = sizes[i]
        out = out + c.c.reshape(shape)
    return CostMatrix.validate(out.reshape(total, total))


# ---------------------------------------------------------------------------
# Rate functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RateFunction:
    """Left-continuous increasing alpha with alpha(0) = 0.

    Variants:
      quadratic(c):    alpha(r) = r^2 / (4 c^2)
      power(kappa, p): alpha(r) = kappa [(1 + r^2)^{p/2} - 1]
      tabulated(...):  left-continuous step function on knots, +inf
                       beyond the last knot
    """

    kind: str
    params: tuple = ()
    knots: np.ndarray | None = field(default=None, compare=False)
    values: np.ndarray | None = field(default=None, compare=False)

    @staticmethod
    def quadratic(c: float) -> "RateFunction":
        if c <= 0:
            raise ValueError("quadratic rate function needs c > 0")
        return RateFunction(kind="quadratic", params=(float(c),))

    @staticmethod
    def power(kappa: float, p: float) -> "RateFunction":
        if kappa <= 0 or p <= 1:
            raise ValueError("power rate function needs kappa > 0, p > 1")
        return RateFunction(kind="power", params=(float(kappa), float(p)))

    @staticmethod
    def tabulated(knots, values) -> "RateFunction":
        knots = np.asarray(knots, dtype=float)
        values = np.asarray(values, dtype=float)
        if knots[0] != 0.0 or values[0] != 0.0:
            raise ValueError("tabulated rate function must start at (0, 0)")
        if np.any(np.diff(knots) <= 0) or np.any(np.diff(values) < 0):
            raise ValueError("knots must increase strictly, values non-decreasingly")
        return RateFunction(kind="tabulated", params=(len(knots),), knots=knots, values=values)

    @property
    def convex(self) -> bool:
        return self.kind in ("quadratic", "power")

    def __call__(self, r: float) -> float:
        if r < 0:
            raise ValueError("rate functions are defined on r >= 0")
        if self.kind == "quadratic":
            (c,) = self.params
            return r * r / (4.0 * c * c)
        if self.kind == "power":
            kappa, p = self.params
            return kappa * ((1.0 + r * r) ** (p / 2.0) - 1.0)
        # left-continuous step: alpha(r) = values[k] for r in (knots[k-1], knots[k]]
        if r > self.knots[-1]:
            return math.inf
        k = int(np.searchsorted(self.knots, r, side="left"))
        return float(self.values[k])


def alpha_conjugate(alpha: RateFunction, lam: float) -> float:
    """Monotone conjugate alpha*(lambda) = sup_{r >= 0} (lambda r - alpha(r))."""
    if lam < 0:
        raise ValueError("monotone conjugate is defined for lambda >= 0")
    if lam == 0.0:
        return 0.0
    if alpha.kind == "quadratic":
        (c,) = alpha.params
        return c * c * lam * lam
    if alpha.kind == "tabulated":
        # sup on each step interval is attained at its right endpoint,
        # where left-continuity makes alpha equal the tabulated value
        return float(np.max(lam * alpha.knots - alpha.values))
    # power: objective lam*r - alpha(r) is concave; bracket then golden-section
    hi = 1.0
    while lam - _power_slope(alpha, hi) > 0:
        hi *= 2.0
        if hi > 1e12:
            return math.inf
    return _golden_max(lambda r: lam * r - alpha(r), 0.0, hi)


def _power_slope(alpha: RateFunction, r: float) -> float:
    kappa, p = alpha.params
    return kappa * p * r * (1.0 + r * r) ** (p / 2.0 - 1.0)


def _golden_max(fn, lo: float, hi: float, tol: float = 1e-12, iters: int = 200) -> float:
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fn(c), fn(d)
    for _ in range(iters):
        if b - a < tol * max(1.0, abs(a) + abs(b)):
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fn(d)
    return max(fc, fd)


def alpha_infconv(alphas: list[RateFunction], r: float, multistarts: int = 16,
                  seed: int = 11) -> float:
    """inf { sum_i alpha_i(r_i) : r_i >= 0, sum r_i = r }.

    Identical convex summands have the closed form n alpha(r/n); the
    numerical route is cyclic pairwise golden-section descent on the
    splitting simplex.  For convex alphas any local minimum is global,
    so the multistarts only guard the tabulated variant.
    """
    if r < 0:
        raise ValueError("inf-convolution needs r >= 0")
    n = len(alphas)
    if n == 0:
        raise ValueError("need at least one rate function")
    if n == 1:
        return alphas[0](r)
    first = alphas[0]
    if all(a == first for a in alphas[1:]) and first.convex:
        return n * first(r / n)
    if r == 0.0:
        return float(sum(a(0.0) for a in alphas))

    rng = np.random.default_rng(seed)
    best = math.inf
    for start in range(multistarts):
        if start == 0:
            split = np.full(n, r / n)
        else:
            w = rng.dirichlet(np.ones(n))
            split = r * w
        split = _pairwise_descent(alphas, split, r)
        val = sum(a(x) for a, x in zip(alphas, split))
        best = min(best, val)
    return float(best)


def _pairwise_descent(alphas, split, r, sweeps: int = 40):
    n = len(alphas)
    split = split.copy()
    for _ in range(sweeps):
        moved = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                mass = split[i] + split[j]
                if mass <= 0:
                    continue

                def pair_obj(x, i=i, j=j, mass=mass):
                    return alphas[i](x) + alphas[j](mass - x)

                xs = np.linspace(0.0, mass, 33)
                vals = [pair_obj(x) for x in xs]
                k = int(np.argmin(vals))
                lo = xs[max(0, k - 1)]
                hi = xs[min(len(xs) - 1, k + 1)]
                best = -_golden_max(lambda x: -pair_obj(x), lo, hi)
                x_best = _argmin_scan(pair_obj, lo, hi)
                if pair_obj(x_best) <= min(vals):
                    moved += abs(split[i] - x_best)
                    split[i] = x_best
                    split[j] = mass - x_best
        if moved < 1e-14 * max(1.0, r):
            break
    return split


def _argmin_scan(fn, lo, hi, iters: int = 80):
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fn(c), fn(d)
    for _ in range(iters):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fn(d)
    return 0.5 * (a + b)


# ---------------------------------------------------------------------------
# Inf / sup convolution of potentials and tensorization checks
# ---------------------------------------------------------------------------

def infconv_potential(d2: CostMatrix, v: np.ndarray) -> np.ndarray:
    """Qv(x) = min_y { v(y) + d^2(x, y) }."""
    v = np.asarray(v, dtype=float)
    return np.min(v[None, :] + d2.c, axis=1)


def supconv_potential(d2: CostMatrix, u: np.ndarray) -> np.ndarray:
    """Su(y) = max_x { u(x) - d^2(x, y) }."""
    u = np.asarray(u, dtype=float)
    return np.max(u[:, None] - d2.c, axis=0)


def tensor_subadditivity_check(costs: list[CostMatrix], nu_joint: np.ndarray,
                               mus: list[np.ndarray]) -> tuple[float, float]:
    """Sum-cost transport against the conditional decomposition.

    Checks T_{+c}(mu, nu) <= E^nu [ T_{c1}(mu_1, nu(.|x2)) + T_{c2}(mu_2, nu(.|x1)) ]
    for a two-factor product; returns (lhs, rhs).
    """
    if len(costs) != 2 or len(mus) != 2:
        raise ModelValidation("subadditivity check is implemented for two factors")
    n1, n2 = costs[0].c.shape[0], costs[1].c.shape[0]
    if n1 > 4 or n2 > 4:
        raise ProductTooLarge("factors must have at most 4 states")
    nu = np.asarray(nu_joint, dtype=float).reshape(n1, n2)
    mu1 = np.asarray(mus[0], dtype=float)
    mu2 = np.asarray(mus[1], dtype=float)
    mu_prod = np.outer(mu1, mu2)

    big = tensor_cost(costs)
    lhs, _ = ot_cost(big, mu_prod.ravel(), nu.ravel())

    rhs = 0.0
    marg2 = nu.sum(axis=0)
    for j in range(n2):
        if marg2[j] <= 0:
            continue
        cond = nu[:, j] / marg2[j]
        val, _ = ot_cost(costs[0], mu1, cond)
        rhs += marg2[j] * val
    marg1 = nu.sum(axis=1)
    for i in range(n1):
        if marg1[i] <= 0:
            continue
        cond = nu[i, :] / marg1[i]
        val, _ = ot_cost(costs[1], mu2, cond)
        rhs += marg1[i] * val
    if lhs > rhs + 1e-9:
        raise AssertionError(f"subadditivity violated: {lhs} > {rhs}")
    return float(lhs), float(rhs)


def conditional_fisher_sum(chains: list[ReversibleChain], nu_joint: np.ndarray) -> float:
    """E^nu sum_i I_i(nu_i | mu_i) with nu_i the conditional of x_i given the rest.

    Companion of the additivity identity for the product-chain information;
    implemented for two factors.
    """
    if len(chains) != 2:
        raise ModelValidation("conditional decomposition implemented for two factors")
    c1, c2 = chains
    nu = np.asarray(nu_joint, dtype=float).reshape(c1.n, c2.n)
    total = 0.0
    marg2 = nu.sum(axis=0)
    for j in range(c2.n):
        if marg2[j] <= 0:
            continue
        f = (nu[:, j] / marg2[j]) / c1.mu
        total += marg2[j] * fisher_information(c1, Density.validate(c1.mu, f))
    marg1 = nu.sum(axis=1)
    for i in range(c1.n):
        if marg1[i] <= 0:
            continue
        f = (nu[i, :] / marg1[i]) / c2.mu
        total += marg1[i] * fisher_information(c2, Density.validate(c2.mu, f))
    return float(total)
