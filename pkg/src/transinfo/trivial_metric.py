"""Sharp results for the trivial metric d(x,y) = 1_{x != y}.

Built around the rate-1 resampling process X_t = Y_{N_t} (Poisson clock,
iid relabeling by mu), whose generator is Lg = mu(g) - g and whose
Dirichlet form is the plain variance: E(g, g) = Var_mu(g).  On this
carrier the square of the total variation is dominated by four times
the variance of sqrt(f),

    ||f mu - mu||_TV^2 <= 4 Var_mu(sqrt f),

with equality exactly on the two-valued density family, and the
exponential growth rate of E exp(lambda int u) over centered u with
oscillation <= 2 is capped by

    rho(lambda) = lambda^2             for |lambda| <= 1,
                  2|lambda| - 1        for |lambda| >  1.

The 2x2 reduction of the weighted process gives the growth rate in
closed form (the JumpSpectrum), which doubles as the finite-horizon
oracle for the Monte Carlo estimator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .chains import ReversibleChain, build_chain
from .errors import DegenerateMeasure, EstimatorOverflow, NoExactSplit
from .rng import path_rng


def build_jump_chain(mu: np.ndarray, states=None) -> ReversibleChain:
    """Rate-1 pure-jump chain with Lg = mu(g) - g: q(x, y) = mu_y for x != y."""
    mu = np.asarray(mu, dtype=float)
    if np.any(mu <= 0):
        raise DegenerateMeasure("jump chain needs a strictly positive measure")
    mu = mu / mu.sum()
    n = len(mu)
    rates = np.tile(mu, (n, 1))
    np.fill_diagonal(rates, 0.0)
    return build_chain(rates, mu=mu, states=states)


def ckp_gap(mu: np.ndarray, f: np.ndarray) -> tuple[float, float]:
    """(||f mu - mu||_TV^2, 4 Var_mu(sqrt f)); the first never exceeds the second."""
    mu = np.asarray(mu, dtype=float)
    f = np.asarray(f, dtype=float)
    tv = float(np.dot(mu, np.abs(f - 1.0)))
    m = float(np.dot(mu, np.sqrt(f)))
    four_var = 4.0 * (1.0 - m * m)
    return tv * tv, four_var


def ckp_extremal(p: float, mu: np.ndarray, subset=None) -> np.ndarray:
    """Two-valued density achieving equality in the TV^2 <= 4 Var bound.

    Takes the value (1-p)/p on a support part of mu-mass exactly p and
    p/(1-p) on the rest.  On a finite space such a part must exist as a
    subset (p = 0.5 degenerates to f = 1).
    """
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie in (0, 1)")
    mu = np.asarray(mu, dtype=float)
    if subset is None:
        subset = _find_split(mu, p)
    mask = np.zeros(len(mu), dtype=bool)
    mask[list(subset)] = True
    wt = float(mu[mask].sum())
    if abs(wt - p) > 1e-12:
        raise NoExactSplit(f"subset carries mass {wt!r}, requested {p!r}")
    f = np.where(mask, (1.0 - p) / p, p / (1.0 - p))
    return f


def _find_split(mu: np.ndarray, p: float):
    n = len(mu)
    # subsets of a small support; fall back to error when nothing matches
    if n <= 20:
        for bits in range(1, 2 ** n - 1):
            idx = [i for i in range(n) if bits >> i & 1]
            if abs(mu[idx].sum() - p) <= 1e-12:
                return idx
    raise NoExactSplit(f"no subset of the support has mu-mass {p!r}")


def rho(lam: float) -> float:
    """Growth-rate cap: lambda^2 inside [-1, 1], 2|lambda| - 1 outside."""
    a = abs(lam)
    return a * a if a <= 1.0 else 2.0 * a - 1.0


@dataclass(frozen=True)
class JumpSpectrum:
    """2x2 spectral data of the weighted jump process at (p, lambda)."""

    p: float
    lam: float
    Delta: float
    s1: float
    s2: float
    growth: float


def jump_spectrum(p: float, lam: float) -> JumpSpectrum:
    """Closed-form growth rate of E exp(lambda int u) for the two-point family.

    u takes the values 2 - 2p (mass p) and -2p (mass 1 - p), so mu(u) = 0
    and the oscillation is 2.  The growth rate is lambda (1 - 2p) + s1
    with s1 the top eigenvalue of the reduced 2x2 operator; it equals
    rho(lambda) exactly on the curve lambda = 1 - 2p.
    """
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie in (0, 1)")
    delta = 1.0 + 4.0 * lam * (lam + 2.0 * p - 1.0)
    sq = math.sqrt(delta)
    s1 = -0.5 + sq / 2.0
    s2 = -0.5 - sq / 2.0
    return JumpSpectrum(p=p, lam=lam, Delta=delta, s1=s1, s2=s2,
                        growth=lam * (1.0 - 2.0 * p) + s1)


def extremal_potential(p: float) -> np.ndarray:
    """The centered oscillation-2 observable (2 - 2p, -2p) on masses (p, 1-p)."""
    return np.array([2.0 - 2.0 * p, -2.0 * p])


def default_p_grid() -> np.ndarray:
    """199 uniform points on (0.005, 0.995); fixed so scans are reproducible."""
    return np.linspace(0.005, 0.995, 199)


def rho_sup_scan(lam: float, p_grid: np.ndarray | None = None):
    """Scan sup_p growth(p, lambda) against rho(lambda).

    For |lambda| < 1 the supremum is attained at p = (1 - lambda)/2 and
    equals lambda^2; for |lambda| >= 1 it stays strictly below rho(lambda),
    approached only toward the p -> 0 or p -> 1 boundary.
    """
    if p_grid is None:
        p_grid = default_p_grid()
    growths = np.array([jump_spectrum(p, lam).growth for p in p_grid])
    k = int(np.argmax(growths))
    return {
        "lam": lam,
        "rho": rho(lam),
        "sup": float(growths[k]),
        "argmax_p": float(p_grid[k]),
        "p_grid": np.asarray(p_grid, dtype=float),
        "growths": growths,
    }


def hellinger_check(mu: np.ndarray, f: np.ndarray) -> tuple[float, float]:
    """(TV^2 / 4, d_H^2 (2 - d_H^2)) with d_H^2 = 1 - mu(sqrt f).

    The Hellinger bound d_H^2 (2 - d_H^2) equals 1 - mu(sqrt f)^2, which
    is exactly Var_mu(sqrt f) for a probability density.
    """
    mu = np.asarray(mu, dtype=float)
    f = np.asarray(f, dtype=float)
    tv = float(np.dot(mu, np.abs(f - 1.0)))
    dh2 = 1.0 - float(np.dot(mu, np.sqrt(f)))
    return tv * tv / 4.0, dh2 * (2.0 - dh2)


def equality_family_detect(mu: np.ndarray, f: np.ndarray, rtol: float = 1e-8):
    """Report the (a^2, b^2, p) structure of a density at CKP equality.

    Clusters the f-values with relative tolerance before testing the
    two-point structure: floating-point densities never take exactly two
    values.  Returns None when f is not (close to) two-valued.
    """
    mu = np.asarray(mu, dtype=float)
    f = np.asarray(f, dtype=float)
    order = np.argsort(f)
    fv = f[order]
    groups = [[0]]
    for i in range(1, len(fv)):
        if fv[i] - fv[groups[-1][0]] <= rtol * max(1.0, fv[i]):
            groups[-1].append(i)
        else:
            groups.append([i])
    if len(groups) == 1:
        return {"low": 1.0, "high": 1.0, "p": 1.0}  # f == 1 case
    if len(groups) != 2:
        return None
    low = float(np.mean(fv[groups[0]]))
    high = float(np.mean(fv[groups[1]]))
    p = float(mu[order][groups[0]].sum())
    return {"low": low, "high": high, "p": p}


# ---------------------------------------------------------------------------
# Monte Carlo growth estimate
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GrowthEstimate:
    estimate: float          # (1/t) log of the empirical exponential moment
    std_error: float         # delta-method standard error on the same scale
    exact_finite_t: float    # (1/t) log E exp(...) from the 2x2 matrix exponential
    growth: float            # t -> infinity rate from the spectrum
    n_paths: int
    t: float


def fk_growth_mc(p: float, lam: float, t: float, n_paths: int, seed: int) -> GrowthEstimate:
    """Monte Carlo exponential-moment growth for the two-point jump process.

    Simulates X = Y_{N_t} exactly (Poisson(1) event clock, iid relabeling)
    and averages exp(lambda int_0^t u(X_s) ds) for the extremal observable
    at parameter p.  The acceptance oracle is the exact finite-horizon
    value from the 2x2 matrix exponential rather than the t -> infinity
    limit, whose O(1/t) bias would force impractically long horizons.
    """
    if t > 50:
        raise ValueError("horizon capped at t = 50 for this estimator")
    u = extremal_potential(p)
    if abs(lam) * t * float(np.max(np.abs(u))) > 700:
        raise EstimatorOverflow("lambda * t too large for a double-precision mean")
    weights = np.array([p, 1.0 - p])

    log_vals = np.empty(n_paths)
    for i in range(n_paths):
        rng = path_rng(seed, i)
        k = rng.poisson(t)
        times = np.sort(rng.uniform(0.0, t, size=k)) if k else np.empty(0)
        bounds = np.concatenate([[0.0], times, [t]])
        labels = rng.choice(2, size=k + 1, p=weights)
        log_vals[i] = lam * float(np.dot(u[labels], np.diff(bounds)))

    vals = np.exp(log_vals)
    mean = float(vals.mean())
    se_mean = float(vals.std(ddof=1) / math.sqrt(n_paths))
    spec = jump_spectrum(p, lam)
    return GrowthEstimate(
        estimate=math.log(mean) / t,
        std_error=se_mean / (mean * t),
        exact_finite_t=exact_growth_finite_t(p, lam, t),
        growth=spec.growth,
        n_paths=n_paths,
        t=t,
    )


def exact_growth_finite_t(p: float, lam: float, t: float) -> float:
    """(1/t) log E_mu exp(lambda int u) via the 2x2 matrix exponential."""
    u = extremal_potential(p)
    weights = np.array([p, 1.0 - p])
    A = np.tile(weights, (2, 1)) - np.eye(2) + np.diag(lam * u)
    val = float(weights @ expm(t * A) @ np.ones(2))
    return math.log(val) / t
