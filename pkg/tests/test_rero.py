import math

import numpy as np
import pytest

from reconlab import rero
from reconlab.rng import Rng


# ---------------------------------------------------------------- priors

def test_uniform_ball_samples_inside():
    s = rero.UniformBallPrior(5).sample(Rng(0), 2000)
    assert s.shape == (2000, 5)
    assert np.all(np.linalg.norm(s, axis=1) <= 1.0 + 1e-12)


def test_finite_prior_validation():
    with pytest.raises(ValueError):
        rero.FiniteDiscretePrior(np.zeros((2, 3)), np.array([0.7, 0.7]))
    with pytest.raises(ValueError):
        rero.two_point_prior(0.5, np.zeros(2), np.zeros(2))
    with pytest.raises(ValueError):
        rero.two_point_prior(1.5, np.zeros(2), np.ones(2))


def test_error_fns():
    a = np.array([[0.0, 0.0], [3.0, 4.0]])
    b = np.zeros(2)
    assert np.allclose(rero.l2_error(a, b), [0.0, 5.0])
    assert np.allclose(rero.zero_one_error(a, b), [0.0, 1.0])


# ---------------------------------------------------------------- kappas

def test_kappa_uniform_ball_values():
    kappa, degenerate = rero.kappa_uniform_ball(0.5, 1)
    assert kappa == 0.5 and not degenerate
    kappa, _ = rero.kappa_uniform_ball(0.5, 10)
    assert abs(kappa - 0.5 ** 10) < 1e-15
    kappa, degenerate = rero.kappa_uniform_ball(1.5, 3)
    assert kappa == 1.0 and degenerate


def test_kappa_uniform_ball_matches_monte_carlo():
    for d in range(1, 6):
        prior = rero.UniformBallPrior(d)
        est, (lo, hi) = rero.kappa_monte_carlo(
            prior, rero.l2_error, 0.5, [np.zeros(d)], n_samples=100_000, seed=d
        )
        exact = 0.5 ** d
        half = hi - est
        assert abs(est - exact) <= 3 * max(half, 1e-6), (d, est, exact)


def test_kappa_gaussian_bound_boundary_and_bound():
    # q = 1 boundary gives exponent 0
    assert rero.kappa_gaussian_bound(1.0, 0.5, 4) == 1.0
    # sigma = 2 eta / sqrt(d) means q = 1/4; bound decays like e^(-0.318 d)
    for d in (1, 2, 5, 20):
        sigma = 2 * 0.5 / math.sqrt(d)
        b = rero.kappa_gaussian_bound(0.5, sigma, d)
        assert b < math.exp(-0.3 * d)


def test_kappa_gaussian_bound_dominates_exact():
    for d in (1, 3, 10):
        for eta, sigma in ((0.5, 1.0), (0.3, 0.5), (1.0, 2.0)):
            assert rero.kappa_gaussian_exact(eta, sigma, d) <= \
                rero.kappa_gaussian_bound(eta, sigma, d) + 1e-15


def test_kappa_gaussian_bound_dominates_simulation():
    # 10^6-sample chi-squared simulation of the in-ball probability
    d, sigma, eta = 3, 1.0, 0.5
    g = np.random.default_rng(0)
    r2 = (g.normal(0, sigma, size=(1_000_000, d)) ** 2).sum(axis=1)
    est = float((r2 <= eta ** 2).mean())
    lo, hi = rero.wilson_interval(int((r2 <= eta ** 2).sum()), 1_000_000)
    assert rero.kappa_gaussian_bound(eta, sigma, d) >= est - 3 * (est - lo)


def test_kappa_two_point():
    assert rero.kappa_two_point(0.5) == 0.5
    assert rero.kappa_two_point(0.2) == rero.kappa_two_point(0.8) == 0.8


def test_kappa_monte_carlo_finite_exact():
    prior = rero.FiniteDiscretePrior(
        np.array([[0.0], [1.0], [2.0]]), np.array([0.2, 0.3, 0.5])
    )
    kappa, (lo, hi) = rero.kappa_monte_carlo(prior, rero.l2_error, 0.5, prior.points)
    assert kappa == 0.5  # each 0.5-ball holds exactly one atom; the heaviest wins
    assert lo == hi == kappa


def test_kappa_monte_carlo_far_candidate_zero():
    prior = rero.FiniteDiscretePrior(np.array([[0.0], [1.0]]), np.array([0.5, 0.5]))
    kappa, _ = rero.kappa_monte_carlo(prior, rero.l2_error, 0.1, [np.array([50.0])])
    assert kappa == 0.0


# --------------------------------------------------------- bound calculus

def test_cor1_example():
    b = rero.puredp_to_rero(math.log(10.0), 0.01, 0.3)
    assert abs(b.gamma - 0.1) < 1e-12
    assert rero.puredp_to_rero(0.0, 0.3, 0.1).gamma == 0.3


def test_thm2_eps_zero_exceeds_kappa():
    for alpha in (1.5, 2.0, 8.0):
        b = rero.rdp_to_rero(alpha, 0.0, 0.2, 0.1)
        assert abs(b.gamma - 0.2 ** ((alpha - 1) / alpha)) < 1e-15
        assert b.gamma >= 0.2


def test_cor1_is_large_alpha_limit_of_thm2():
    kappa, eps = 0.03, 1.2
    lim = rero.rdp_to_rero(1e9, eps, kappa, 0.1).gamma
    direct = rero.puredp_to_rero(eps, kappa, 0.1).gamma
    assert abs(lim - direct) / direct <= 1e-6


def test_cor2_is_alpha_minimized_thm2():
    # under rho-zCDP every alpha gives (alpha, alpha*rho)-RDP; Cor 2 is the
    # minimum of the Thm 2 bound over alpha
    for rho, kappa in ((0.1, 0.01), (0.5, 0.001), (1.0, 1e-6)):
        direct = rero.zcdp_to_rero(rho, kappa, 0.1).gamma
        alphas = 1.0 + np.logspace(-6, 6, 400_001)
        scan = math.exp(((alphas - 1) / alphas * (math.log(kappa) + alphas * rho)).min())
        assert abs(direct - scan) <= 1e-9


def test_cor2_vacuous_branch():
    b = rero.zcdp_to_rero(5.0, 0.5, 0.1)
    assert b.gamma == 1.0 and b.degenerate


def test_gamma_monotone_in_privacy_and_kappa():
    gs = [rero.puredp_to_rero(e, 0.01, 0.1).gamma for e in (0.1, 0.5, 1.0, 2.0)]
    assert gs == sorted(gs)
    gs = [rero.zcdp_to_rero(r, 0.01, 0.1).gamma for r in (0.01, 0.1, 0.5, 1.0)]
    assert gs == sorted(gs)
    gs = [rero.zcdp_to_rero(0.1, k, 0.1).gamma for k in (1e-6, 1e-4, 1e-2)]
    assert gs == sorted(gs)


def test_thm3_examples():
    assert rero.rero_to_dp(0.0, 0.75) == 0.5
    assert rero.rero_to_dp(1.0, 1.0) == 1.0
    # no-information attack: gamma = max(p, 1-p) with p = 1/(e^eps+1)
    for eps in (0.0, 0.5, 2.0):
        p = 1.0 / (math.exp(eps) + 1.0)
        assert abs(rero.rero_to_dp(eps, rero.kappa_two_point(p))) < 1e-12


def test_prop_gamma_uniform_ball():
    b = rero.prop_gamma(10, 0.5, {"eps": 1.0}, "uniform_ball")
    assert abs(b.gamma - 0.5 ** 10 * math.e) < 1e-12
    assert b.source == "prop1"


def test_prop_gamma_gaussian_sigma_check():
    d, eta = 16, 0.5
    sigma = 2 * eta / math.sqrt(d)
    b = rero.prop_gamma(d, eta, {"rho": 0.0}, "gaussian", sigma=sigma)
    assert abs(b.gamma - rero.kappa_gaussian_bound(eta, sigma, d)) < 1e-12
    with pytest.raises(ValueError):
        rero.prop_gamma(d, eta, {"rho": 0.0}, "gaussian", sigma=0.5 * sigma)


# --------------------------------------------------------------- attacks

def test_map_attack_point_mass():
    prior = rero.FiniteDiscretePrior(np.array([[0.3, 0.7]]), np.array([1.0]))
    out = rero.map_attack_finite(prior, lambda t, zs: np.ones(1), None,
                                 rero.l2_error, 0.1)
    assert np.array_equal(out, [0.3, 0.7])


def test_map_attack_two_point_gaussian_posterior():
    # mean release with Gaussian noise: the likelihood ratio favors the
    # candidate whose dataset mean is closer to theta
    fixed = np.zeros((4, 1))
    z0, z1 = np.array([0.0]), np.array([1.0])
    prior = rero.two_point_prior(0.5, z0, z1)
    noise = 0.1
    n = 5

    def likelihood(theta, zs):
        mu = (fixed.sum(axis=0)[None, :] + zs) / n
        return np.exp(-((theta - mu) ** 2).sum(axis=1) / (2 * noise ** 2))

    theta_near_z1 = np.array([0.19])
    out = rero.map_attack_finite(prior, likelihood, theta_near_z1, rero.l2_error, 0.01)
    assert np.array_equal(out, z1)
    theta_near_z0 = np.array([0.01])
    out = rero.map_attack_finite(prior, likelihood, theta_near_z0, rero.l2_error, 0.01)
    assert np.array_equal(out, z0)


def test_empirical_rero_perfect_mechanism():
    # the mechanism reveals z and the attack inverts it: rate 1
    prior = rero.FiniteDiscretePrior(np.array([[0.0], [1.0]]), np.array([0.5, 0.5]))
    rate, _ = rero.empirical_rero(
        mechanism=lambda points, rng: points[-1],
        prior=prior,
        attack_fn=lambda theta: theta,
        fixed=np.zeros((3, 1)),
        error_fn=rero.l2_error,
        eta=0.01,
        n_trials=200,
        seed=1,
    )
    assert rate == 1.0


def test_empirical_rero_oblivious_attack_near_kappa():
    prior = rero.FiniteDiscretePrior(
        np.array([[0.0], [1.0], [2.0]]), np.array([0.5, 0.3, 0.2])
    )
    best = prior.points[0]  # mass 0.5 within eta = 0.1
    rate, (lo, hi) = rero.empirical_rero(
        mechanism=lambda points, rng: np.zeros(1),
        prior=prior,
        attack_fn=lambda theta: best,
        fixed=np.zeros((3, 1)),
        error_fn=rero.l2_error,
        eta=0.1,
        n_trials=2000,
        seed=2,
    )
    assert lo <= 0.5 <= hi


def test_empirical_rero_reproducible():
    prior = rero.UniformBallPrior(2)
    kwargs = dict(
        mechanism=lambda points, rng: points.mean(axis=0) + rng.normal(0, 0.1, size=2),
        prior=prior,
        attack_fn=lambda theta: theta,
        fixed=np.zeros((3, 2)),
        error_fn=rero.l2_error,
        eta=0.5,
        n_trials=300,
        seed=7,
    )
    assert rero.empirical_rero(**kwargs) == rero.empirical_rero(**kwargs)


def test_wilson_interval_sane():
    lo, hi = rero.wilson_interval(50, 100)
    assert lo < 0.5 < hi
    lo, hi = rero.wilson_interval(0, 100)
    assert lo == 0.0 and hi > 0.0
    lo, hi = rero.wilson_interval(100, 100)
    assert hi == 1.0 and lo < 1.0
