"""Finite reversible Markov chains and their energy functionals.

A chain is a triple (states, Q, mu): Q is a conservative rate matrix
(off-diagonal >= 0, rows sum to zero) and mu a strictly positive
probability vector in detailed balance with Q.  On this carrier we
compute the Dirichlet form

    E(g, g) = <-L g, g>_mu = 1/2 sum_{x != y} mu_x q(x,y) (g_y - g_x)^2,

the information functional I(f mu | mu) = E(sqrt f, sqrt f), relative
entropy, weighted total variation, the spectral gap / Poincare constant,
and solutions of the Poisson equation -L h = g.

All eigenproblems are solved on the symmetric conjugation
diag(sqrt mu) (-L) diag(1/sqrt mu), which is the matrix of the
self-adjoint operator in L^2(mu); this keeps spectra real by
construction instead of by luck.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import (
    DegenerateMeasure,
    DetailedBalanceViolated,
    MeanNotZero,
    ModelValidation,
    NotIrreducible,
    SingularSystem,
)

ROW_SUM_TOL = 1e-12
DETAILED_BALANCE_RTOL = 1e-10
MU_SUM_TOL = 1e-12
DENSITY_RENORM_TOL = 1e-9


@dataclass(frozen=True)
class ReversibleChain:
    """Validated finite reversible chain; immutable after construction."""

    states: tuple
    Q: np.ndarray
    mu: np.ndarray

    @property
    def n(self) -> int:
        return len(self.states)

    def generator(self) -> np.ndarray:
        """L acting on functions: (Lg)_x = sum_y Q[x,y] g_y."""
        return self.Q

    def symmetrized_generator(self) -> np.ndarray:
        """L^sigma = (L + L*)/2 with L* the L^2(mu) adjoint of L.

        For a validated reversible chain L* = L up to the detailed-balance
        tolerance; computing the average makes that assumption checkable
        rather than assumed.
        """
        adj = (self.Q.T * self.mu[None, :]) / self.mu[:, None]
        return 0.5 * (self.Q + adj)

    def conjugated_neg_generator(self) -> np.ndarray:
        """diag(sqrt mu) (-L^sigma) diag(1/sqrt mu), symmetrized for eigh."""
        s = np.sqrt(self.mu)
        A = (s[:, None] * (-self.symmetrized_generator())) / s[None, :]
        return 0.5 * (A + A.T)

    def expectation(self, g: np.ndarray) -> float:
        return float(np.dot(self.mu, np.asarray(g, dtype=float)))

    def variance(self, g: np.ndarray) -> float:
        g = np.asarray(g, dtype=float)
        m = self.expectation(g)
        return float(np.dot(self.mu, (g - m) ** 2))

    def to_json_dict(self) -> dict:
        return {
            "states": list(self.states),
            "rates": self.Q.tolist(),
            "mu": self.mu.tolist(),
        }


@dataclass(frozen=True)
class Density:
    """Nonnegative f with sum_i mu_i f_i = 1, representing nu = f mu."""

    f: np.ndarray

    @staticmethod
    def validate(mu: np.ndarray, f: np.ndarray) -> "Density":
        """Validate (and gently renormalize) a candidate density vector.

        Renormalizes when |sum mu f - 1| <= 1e-9 and rejects otherwise;
        silently fixing larger errors would mask caller bugs.
        """
        f = np.asarray(f, dtype=float).copy()
        if f.shape != np.shape(mu):
            raise ModelValidation("density and measure have different lengths")
        if np.any(f < 0):
            raise ModelValidation("density has negative entries")
        total = float(np.dot(mu, f))
        if abs(total - 1.0) > DENSITY_RENORM_TOL:
            raise ModelValidation(
                f"density mass {total!r} differs from 1 beyond renormalization tolerance"
            )
        f /= total
        f.setflags(write=False)
        return Density(f=f)


@dataclass(frozen=True)
class MetricMatrix:
    """Symmetric nonnegative matrix with zero diagonal and triangle inequality."""

    d: np.ndarray

    @staticmethod
    def validate(d: np.ndarray, check_triangle: bool = True) -> "MetricMatrix":
        d = np.asarray(d, dtype=float).copy()
        n = d.shape[0]
        if d.ndim != 2 or d.shape[1] != n:
            raise ModelValidation("metric matrix must be square")
        if not np.allclose(d, d.T, atol=1e-12):
            raise ModelValidation("metric matrix must be symmetric")
        if np.any(np.abs(np.diag(d)) > 1e-15):
            raise ModelValidation("metric matrix must have zero diagonal")
        off = d[~np.eye(n, dtype=bool)]
        if np.any(off <= 0):
            raise ModelValidation("metric must be positive off the diagonal")
        if check_triangle:
            # d[x,z] <= d[x,y] + d[y,z]; loop over y to stay O(n^2) in memory
            for y in range(n):
                if np.any(d > d[:, y][:, None] + d[y, :][None, :] + 1e-12):
                    raise ModelValidation("triangle inequality fails")
        d.setflags(write=False)
        return MetricMatrix(d=d)


def trivial_metric(n: int) -> MetricMatrix:
    """d(x,y) = 1 for x != y."""
    return MetricMatrix.validate(np.ones((n, n)) - np.eye(n))


def line_metric(points: np.ndarray) -> MetricMatrix:
    """Euclidean metric of a 1-D embedding: d[i,j] = |p_i - p_j|."""
    p = np.asarray(points, dtype=float)
    return MetricMatrix.validate(np.abs(p[:, None] - p[None, :]), check_triangle=False)


def _as_density_vector(chain: ReversibleChain, f) -> np.ndarray:
    if isinstance(f, Density):
        return f.f
    return Density.validate(chain.mu, np.asarray(f, dtype=float)).f


def solve_invariant_measure(Q: np.ndarray) -> np.ndarray:
    """Solve mu Q = 0, sum mu = 1 by a dense least-squares solve."""
    n = Q.shape[0]
    A = np.vstack([Q.T, np.ones((1, n))])
    b = np.zeros(n + 1)
    b[-1] = 1.0
    mu, *_ = np.linalg.lstsq(A, b, rcond=None)
    return mu


def build_chain(rates: np.ndarray, mu: np.ndarray | None = None, states=None) -> ReversibleChain:
    """Build and validate a reversible chain from off-diagonal rates.

    The diagonal is filled so rows sum to zero.  When ``mu`` is absent the
    invariant measure is obtained from the dense solve of mu Q = 0, which
    is unique for irreducible rate graphs.
    """
    Q = np.array(rates, dtype=float)
    n = Q.shape[0]
    if Q.ndim != 2 or Q.shape[1] != n or n < 2:
        raise ModelValidation("rates must be a square matrix of size >= 2")
    off = Q[~np.eye(n, dtype=bool)]
    if np.any(off < 0):
        raise ModelValidation("off-diagonal rates must be nonnegative")
    np.fill_diagonal(Q, 0.0)
    np.fill_diagonal(Q, -Q.sum(axis=1))

    _check_irreducible(Q)

    if mu is None:
        mu = solve_invariant_measure(Q)
    else:
        mu = np.array(mu, dtype=float)
        if mu.shape != (n,):
            raise ModelValidation("mu has wrong length")
    if np.any(mu <= 0):
        raise DegenerateMeasure(f"invariant measure has nonpositive entries: {mu}")
    total = mu.sum()
    if abs(total - 1.0) > 1e-9:
        raise DegenerateMeasure(f"mu sums to {total!r}, not 1")
    mu = mu / total

    _check_detailed_balance(Q, mu)

    if states is None:
        states = tuple(str(i) for i in range(n))
    else:
        states = tuple(states)
        if len(states) != n:
            raise ModelValidation("states list has wrong length")

    Q.setflags(write=False)
    mu.setflags(write=False)
    return ReversibleChain(states=states, Q=Q, mu=mu)


def _check_irreducible(Q: np.ndarray) -> None:
    graph = csr_matrix((Q > 0).astype(np.int8))
    ncomp, _ = connected_components(graph, directed=True, connection="strong")
    if ncomp != 1:
        raise NotIrreducible(f"rate graph has {ncomp} strongly connected components")


def _check_detailed_balance(Q: np.ndarray, mu: np.ndarray) -> None:
    flow = mu[:, None] * Q
    resid = np.abs(flow - flow.T)
    scale = np.maximum(np.abs(flow), np.abs(flow.T))
    np.fill_diagonal(resid, 0.0)
    np.fill_diagonal(scale, 1.0)
    rel = resid / np.maximum(scale, 1e-300)
    rel[scale == 0.0] = 0.0
    worst = np.unravel_index(np.argmax(rel), rel.shape)
    if rel[worst] > DETAILED_BALANCE_RTOL:
        raise DetailedBalanceViolated(pair=tuple(int(i) for i in worst), residual=float(rel[worst]))


def chain_from_json(obj: dict | str) -> ReversibleChain:
    """Load a chain from the JSON file schema {states, rates, mu?}."""
    if isinstance(obj, str):
        obj = json.loads(obj)
    return build_chain(
        np.asarray(obj["rates"], dtype=float),
        mu=None if obj.get("mu") is None else np.asarray(obj["mu"], dtype=float),
        states=obj.get("states"),
    )


# ---------------------------------------------------------------------------
# Energy / information functionals
# ---------------------------------------------------------------------------

def dirichlet_energy(chain: ReversibleChain, g: np.ndarray) -> float:
    """E(g, g) = 1/2 sum_{x != y} mu_x q(x,y) (g_y - g_x)^2."""
    g = np.asarray(g, dtype=float)
    if not np.all(np.isfinite(g)):
        raise ValueError("g must be finite")
    diff = g[None, :] - g[:, None]
    w = chain.mu[:, None] * chain.Q
    off = ~np.eye(chain.n, dtype=bool)
    return float(0.5 * np.sum(w[off] * diff[off] ** 2))


def dirichlet_bilinear(chain: ReversibleChain, g: np.ndarray, h: np.ndarray) -> float:
    """E(g, h) = <-L^sigma g, h>_mu."""
    g = np.asarray(g, dtype=float)
    h = np.asarray(h, dtype=float)
    return float(np.dot(chain.mu * h, -chain.symmetrized_generator() @ g))


def fisher_information(chain: ReversibleChain, f) -> float:
    """I(f mu | mu) = E(sqrt f, sqrt f); always finite on finite spaces."""
    fv = _as_density_vector(chain, f)
    return dirichlet_energy(chain, np.sqrt(fv))


def relative_entropy(chain: ReversibleChain, f) -> float:
    """H(f mu | mu) = sum mu_i f_i log f_i, with 0 log 0 := 0."""
    fv = _as_density_vector(chain, f)
    terms = np.zeros_like(fv)
    pos = fv > 0
    terms[pos] = fv[pos] * np.log(fv[pos])
    return float(np.dot(chain.mu, terms))


def tv_weighted(chain: ReversibleChain, f, phi: np.ndarray) -> float:
    """Weighted total variation sum_i mu_i phi_i |f_i - 1|.

    With phi = 1 this is the full total variation ||f mu - mu||_TV
    = 2 sup_A |nu(A) - mu(A)|.
    """
    fv = _as_density_vector(chain, f)
    phi = np.asarray(phi, dtype=float)
    if np.any(phi < 0):
        raise ValueError("phi must be nonnegative")
    return float(np.dot(chain.mu * phi, np.abs(fv - 1.0)))


def spectral_gap(chain: ReversibleChain, certificate_samples: int = 100,
                 certificate_seed: int = 7) -> tuple[float, float]:
    """Spectral gap of -L^sigma in L^2(mu) and the Poincare constant.

    Returns (gap, c_P) with c_P = 1/gap.  The eigenproblem is solved
    on the symmetric conjugated matrix; afterwards the Poincare
    inequality Var_mu(g) <= c_P E(g,g) is spot-checked on random g
    within 1e-9 slack as a guard against a mis-sorted spectrum.
    """
    w = np.linalg.eigvalsh(chain.conjugated_neg_generator())
    gap = float(w[1])
    if gap <= 0:
        raise NotIrreducible("nonpositive spectral gap; chain is not irreducible")
    c_p = 1.0 / gap
    rng = np.random.default_rng(certificate_seed)
    for _ in range(certificate_samples):
        g = rng.standard_normal(chain.n)
        if chain.variance(g) > c_p * dirichlet_energy(chain, g) + 1e-9:
            raise SingularSystem("Poincare certificate failed; eigensolve inconsistent")
    return gap, c_p


def poisson_solve(chain: ReversibleChain, g: np.ndarray) -> np.ndarray:
    """Solve -L^sigma h = g with mu(h) = 0 for centered g.

    Uses the bordered system [[-L^sigma, 1], [mu^T, 0]], which is regular
    exactly when the chain is irreducible.
    """
    g = np.asarray(g, dtype=float)
    if abs(chain.expectation(g)) > 1e-10:
        raise MeanNotZero(f"mu(g) = {chain.expectation(g)!r} exceeds 1e-10")
    n = chain.n
    A = np.zeros((n + 1, n + 1))
    A[:n, :n] = -chain.symmetrized_generator()
    A[:n, n] = 1.0
    A[n, :n] = chain.mu
    b = np.concatenate([g, [0.0]])
    try:
        sol = np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - internal error
        raise SingularSystem(str(exc)) from exc
    h = sol[:n]
    resid = float(np.max(np.abs(-chain.symmetrized_generator() @ h - g)))
    if resid > 1e-10 * max(1.0, float(np.max(np.abs(g)))):
        raise SingularSystem(f"Poisson residual {resid:.3e} exceeds tolerance")
    return h - chain.expectation(h)


def lipschitz_norm(d: MetricMatrix, g: np.ndarray) -> float:
    """Smallest M with |g_x - g_y| <= M d[x,y] over all pairs."""
    g = np.asarray(g, dtype=float)
    n = len(g)
    diff = np.abs(g[:, None] - g[None, :])
    off = ~np.eye(n, dtype=bool)
    return float(np.max(diff[off] / d.d[off])) if n > 1 else 0.0


def oscillation(g: np.ndarray) -> float:
    """delta(g) = max g - min g."""
    g = np.asarray(g, dtype=float)
    return float(np.max(g) - np.min(g))


def product_chain(chains: list[ReversibleChain]) -> ReversibleChain:
    """Independent product: Kronecker-sum generator, product measure.

    Product states are indexed row-major: x = (x_1, ..., x_k) maps to
    x_1 * n_2 ... n_k + ... + x_k.
    """
    Q = np.zeros((1, 1))
    mu = np.ones(1)
    states = [""]
    for c in chains:
        Q = np.kron(Q, np.eye(c.n)) + np.kron(np.eye(Q.shape[0]), c.Q)
        mu = np.kron(mu, c.mu)
        states = [f"{a},{b}" if a else str(b) for a in states for b in c.states]
    rates = Q.copy()
    np.fill_diagonal(rates, 0.0)
    return build_chain(rates, mu=mu, states=states)
