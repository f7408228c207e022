"""Reconstruction-robustness calculus.

A mechanism is (eta, gamma)-ReRo when no attack reconstructs the unknown
target to error <= eta with probability > gamma, jointly over the prior and
the mechanism's randomness. This module provides the baseline error kappa
for structured priors, the DP/RDP/zCDP-to-ReRo bounds and the reverse
ReRo-to-DP direction, the optimal MAP attack on finite priors, and
Monte-Carlo machinery for checking the bounds empirically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sps

from .rng import Rng

__all__ = [
    "UniformBallPrior",
    "GaussianPrior",
    "FiniteDiscretePrior",
    "two_point_prior",
    "EmpiricalSampler",
    "l2_error",
    "zero_one_error",
    "ReRoBound",
    "wilson_interval",
    "kappa_uniform_ball",
    "kappa_gaussian_bound",
    "kappa_gaussian_exact",
    "kappa_two_point",
    "kappa_monte_carlo",
    "rdp_to_rero",
    "puredp_to_rero",
    "zcdp_to_rero",
    "rero_to_dp",
    "prop_gamma",
    "map_attack_finite",
    "empirical_rero",
]


# ---------------------------------------------------------------- priors

@dataclass(frozen=True)
class UniformBallPrior:
    """Uniform distribution over the d-dimensional Euclidean unit ball."""

    d: int

    def sample(self, rng: Rng, n: int) -> np.ndarray:
        g = rng.generator
        x = g.normal(size=(n, self.d))
        x /= np.linalg.norm(x, axis=1, keepdims=True)
        r = g.uniform(size=(n, 1)) ** (1.0 / self.d)
        return x * r


@dataclass(frozen=True)
class GaussianPrior:
    """Isotropic Gaussian N(center, sigma^2 I_d)."""

    center: np.ndarray
    sigma: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=np.float64))
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")

    @property
    def d(self) -> int:
        return self.center.shape[0]

    def sample(self, rng: Rng, n: int) -> np.ndarray:
        return self.center + rng.generator.normal(0.0, self.sigma, size=(n, self.d))


@dataclass(frozen=True)
class FiniteDiscretePrior:
    """Finitely supported prior: points (m, d) with masses summing to 1."""

    points: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=np.float64))
        m = np.asarray(self.masses, dtype=np.float64)
        if pts.shape[0] != m.shape[0]:
            raise ValueError("points/masses length mismatch")
        if m.min() < 0 or abs(m.sum() - 1.0) > 1e-9:
            raise ValueError("masses must be nonnegative and sum to 1")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "masses", m)

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def sample(self, rng: Rng, n: int) -> np.ndarray:
        idx = rng.generator.choice(len(self.masses), size=n, p=self.masses)
        return self.points[idx]


def two_point_prior(p: float, z0, z1) -> FiniteDiscretePrior:
    """Prior assigning probability p to z0 and 1-p to z1."""
    z0 = np.atleast_1d(np.asarray(z0, dtype=np.float64))
    z1 = np.atleast_1d(np.asarray(z1, dtype=np.float64))
    if not 0 < p < 1:
        raise ValueError("p must be in (0, 1)")
    if np.array_equal(z0, z1):
        raise ValueError("two-point prior requires distinct points")
    return FiniteDiscretePrior(np.stack([z0, z1]), np.array([p, 1.0 - p]))


@dataclass(frozen=True)
class EmpiricalSampler:
    """Adapter for arbitrary seeded samplers: fn(generator, n) -> (n, d) array."""

    fn: object

    def sample(self, rng: Rng, n: int) -> np.ndarray:
        return np.atleast_2d(self.fn(rng.generator, n))


# ------------------------------------------------------------- error fns

def l2_error(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Euclidean distance; broadcasts over rows of a."""
    diff = np.atleast_2d(a) - np.asarray(b)[None, :]
    return np.linalg.norm(diff, axis=1)


def zero_one_error(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    diff = np.atleast_2d(a) - np.asarray(b)[None, :]
    return (np.any(diff != 0.0, axis=1)).astype(np.float64)


# ----------------------------------------------------------------- bound

@dataclass(frozen=True)
class ReRoBound:
    eta: float
    kappa: float
    gamma: float
    source: str            # thm2 | cor1 | cor2 | prop1 | prop2
    privacy: dict = field(default_factory=dict)
    degenerate: bool = False


def wilson_interval(successes: int, trials: int, confidence: float = 0.99):
    """Wilson score interval for a binomial proportion."""
    if trials <= 0:
        raise ValueError("trials must be positive")
    z = sps.norm.ppf(0.5 + confidence / 2.0)
    phat = successes / trials
    denom = 1.0 + z * z / trials
    center = (phat + z * z / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials * trials)) / denom
    return max(0.0, center - half), min(1.0, center + half)


# ---------------------------------------------------------------- kappas

def kappa_uniform_ball(eta: float, d: int):
    """Baseline error of the unit-ball uniform prior under l2: eta^d.

    The sup over guesses is attained at the center, where the eta-ball is
    fully contained. Returns (kappa, degenerate); eta >= 1 is vacuous.
    """
    if d < 1:
        raise ValueError("d must be >= 1")
    if eta <= 0:
        raise ValueError("eta must be positive")
    if eta >= 1:
        return 1.0, True
    return eta ** d, False


def kappa_gaussian_bound(eta: float, sigma: float, d: int) -> float:
    """Chi-squared tail upper bound exp((d/2)(1 - q + ln q)), q = eta^2/(sigma^2 d)."""
    if eta <= 0 or sigma <= 0 or d < 1:
        raise ValueError("eta, sigma must be positive and d >= 1")
    q = eta ** 2 / (sigma ** 2 * d)
    if q >= 1:
        return 1.0
    return math.exp(0.5 * d * (1.0 - q + math.log(q)))


def kappa_gaussian_exact(eta: float, sigma: float, d: int) -> float:
    """Exact kappa of the isotropic Gaussian prior: Pr[chi2_d <= (eta/sigma)^2]."""
    return float(sps.chi2.cdf((eta / sigma) ** 2, df=d))


def kappa_two_point(p: float) -> float:
    """Under the 0/1 error with eta < 1, the best blind guess takes the larger mass."""
    if not 0 < p < 1:
        raise ValueError("p must be in (0, 1)")
    return max(p, 1.0 - p)


def kappa_monte_carlo(prior, error_fn, eta: float, candidates, n_samples: int = 100_000,
                      seed: int = 0, confidence: float = 0.99):
    """Estimate kappa as the max over candidate guesses of Pr[l(Z, z0) <= eta].

    FiniteDiscrete priors are handled exactly by enumeration; otherwise the
    probability is estimated by sampling, with a Wilson CI for the winner.
    """
    candidates = np.atleast_2d(np.asarray(candidates, dtype=np.float64))
    if candidates.shape[0] == 0:
        raise ValueError("need at least one candidate")
    if isinstance(prior, FiniteDiscretePrior):
        best = -1.0
        for c in candidates:
            p = float(prior.masses[error_fn(prior.points, c) <= eta].sum())
            best = max(best, p)
        return best, (best, best)
    samples = prior.sample(Rng(seed).child("kappa"), n_samples)
    best, best_succ = -1.0, 0
    for c in candidates:
        succ = int((error_fn(samples, c) <= eta).sum())
        if succ / n_samples > best:
            best, best_succ = succ / n_samples, succ
    return best, wilson_interval(best_succ, n_samples, confidence)


# --------------------------------------------------------- bound calculus

def _clamp(g: float) -> float:
    return min(1.0, max(0.0, g))


def rdp_to_rero(alpha: float, eps: float, kappa: float, eta: float) -> ReRoBound:
    """(alpha, eps)-RDP gives gamma = (kappa * e^eps)^((alpha-1)/alpha)."""
    if alpha <= 1:
        raise ValueError("alpha must be > 1")
    if not 0 < kappa <= 1:
        raise ValueError("kappa must be in (0, 1]")
    gamma = _clamp(math.exp((alpha - 1.0) / alpha * (math.log(kappa) + eps)))
    return ReRoBound(eta, kappa, gamma, "thm2", {"alpha": alpha, "eps": eps})


def puredp_to_rero(eps: float, kappa: float, eta: float) -> ReRoBound:
    """eps-DP gives gamma = kappa * e^eps."""
    if not 0 <= kappa <= 1:
        raise ValueError("kappa must be in [0, 1]")
    gamma = _clamp(kappa * math.exp(eps))
    return ReRoBound(eta, kappa, gamma, "cor1", {"eps": eps})


def zcdp_to_rero(rho: float, kappa: float, eta: float) -> ReRoBound:
    """rho-zCDP gives gamma = exp(-(sqrt(ln(1/kappa)) - sqrt(rho))^2) when
    rho < ln(1/kappa); otherwise the bound is vacuous (gamma = 1)."""
    if not 0 < kappa < 1:
        raise ValueError("kappa must be in (0, 1)")
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    log_inv = math.log(1.0 / kappa)
    if rho >= log_inv:
        return ReRoBound(eta, kappa, 1.0, "cor2", {"rho": rho}, degenerate=True)
    gamma = _clamp(math.exp(-(math.sqrt(log_inv) - math.sqrt(rho)) ** 2))
    return ReRoBound(eta, kappa, gamma, "cor2", {"rho": rho})


def rero_to_dp(eps: float, gamma: float) -> float:
    """Exact-reconstruction robustness over two-point priors implies
    (eps, delta)-DP with delta = max(0, (e^eps + 1) * gamma - e^eps)."""
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    if not 0 <= gamma <= 1:
        raise ValueError("gamma must be in [0, 1]")
    return max(0.0, (math.exp(eps) + 1.0) * gamma - math.exp(eps))


def prop_gamma(d: int, eta: float, privacy: dict, prior_kind: str,
               sigma: float = None) -> ReRoBound:
    """High-dimensional prior bounds: compose the structured-prior kappa with
    the pure-DP or zCDP conversion.

    privacy is {"eps": e} or {"rho": r}; prior_kind is "uniform_ball" or
    "gaussian" (the latter needs sigma >= 2*eta/sqrt(d))."""
    if prior_kind == "uniform_ball":
        kappa, degenerate = kappa_uniform_ball(eta, d)
        source = "prop1"
    elif prior_kind == "gaussian":
        if sigma is None:
            raise ValueError("gaussian prior needs sigma")
        if sigma < 2.0 * eta / math.sqrt(d):
            raise ValueError(f"sigma {sigma} < 2*eta/sqrt(d) = {2 * eta / math.sqrt(d)}")
        kappa = kappa_gaussian_bound(eta, sigma, d)
        degenerate = kappa >= 1.0
        source = "prop2"
    else:
        raise ValueError(f"unknown prior kind {prior_kind!r}")

    if "eps" in privacy:
        gamma = _clamp(kappa * math.exp(privacy["eps"]))
    elif "rho" in privacy:
        if kappa >= 1.0:
            gamma = 1.0
        else:
            inner = zcdp_to_rero(privacy["rho"], kappa, eta)
            gamma = inner.gamma
            degenerate = degenerate or inner.degenerate
    else:
        raise ValueError("privacy must contain 'eps' or 'rho'")
    return ReRoBound(eta, kappa, gamma, source, dict(privacy), degenerate=degenerate)


# ------------------------------------------------------- attacks / checks

def map_attack_finite(prior: FiniteDiscretePrior, likelihood_fn, theta,
                      error_fn, eta: float) -> np.ndarray:
    """Exact MAP reconstruction over a finite prior.

    likelihood_fn(theta, points) returns the mechanism's output density at
    theta for each candidate true point. The returned guess maximizes the
    posterior mass of the eta-ball around it; ties break to the lowest index.
    """
    lik = np.asarray(likelihood_fn(theta, prior.points), dtype=np.float64)
    post = prior.masses * lik
    total = post.sum()
    if total <= 0:
        raise ValueError("zero total posterior mass")
    post /= total
    scores = np.array([
        post[error_fn(prior.points, c) <= eta].sum() for c in prior.points
    ])
    return prior.points[int(np.argmax(scores))]


def empirical_rero(mechanism, prior, attack_fn, fixed: np.ndarray, error_fn,
                   eta: float, n_trials: int = 2000, seed: int = 0,
                   confidence: float = 0.99):
    """Monte-Carlo estimate of Pr[l(Z, R(theta)) <= eta] with per-trial seeds.

    mechanism(dataset_points, rng) -> theta; attack_fn(theta) -> guess.
    Returns (rate, (lo, hi)) with a Wilson interval.
    """
    if n_trials < 100:
        raise ValueError("n_trials must be >= 100")
    fixed = np.atleast_2d(np.asarray(fixed, dtype=np.float64))
    root = Rng(seed)
    successes = 0
    for i in range(n_trials):
        trial = root.child(("trial", i))
        z = prior.sample(trial.child("z"), 1)[0]
        theta = mechanism(np.vstack([fixed, z[None, :]]), trial.child("mech"))
        guess = attack_fn(theta)
        if float(error_fn(z[None, :], guess)[0]) <= eta:
            successes += 1
    return successes / n_trials, wilson_interval(successes, n_trials, confidence)
