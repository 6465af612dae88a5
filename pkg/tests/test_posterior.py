"""Posterior factorization, brute-force oracles, and the point estimator."""

import numpy as np
import pytest
from scipy import integrate, special, stats

from pdelab import (
    ModelSpec,
    NormalRadial,
    PriorSpec,
    RngStream,
    StudentMixtureRadial,
    brute_force_theta_marginal,
    build_posterior,
    factored_theta_marginal,
    posterior_expectation,
    scale_invariant_bayes_estimator,
    student_logpdf,
)
from pdelab.posterior import sample_joint_posterior_grid


def make_spec(d=1, k=3, radial=None):
    return ModelSpec(d=d, k=k, c=1.0, theta=np.zeros(d), eta=1.0, radial=radial or NormalRadial())


X = np.array([0.6])
U = np.array([0.8, -0.5, 0.3])


class TestTauPosterior:
    def test_normal_tau_is_gamma(self):
        # kernel tau^(a+(d+k)/2) e^(-tau/2): Gamma(a+1+(d+k)/2, rate 1/2),
        # so the mean is 2*(a+1+(d+k)/2)
        for a in [-1.0, 0.0, 1.5]:
            rep = build_posterior(make_spec(), PriorSpec("flat", a=a), X, U)
            mean, _ = integrate.quad(lambda t: t * rep.tau_pdf(t), 0, np.inf, epsrel=1e-12)
            assert mean == pytest.approx(2 * (a + 1 + 2.0), abs=1e-8)

    def test_normal_tau_second_moment(self):
        a = 0.0
        alpha = a + 1 + 2.0  # shape; rate 1/2
        rep = build_posterior(make_spec(), PriorSpec("flat", a=a), X, U)
        m2, _ = integrate.quad(lambda t: t * t * rep.tau_pdf(t), 0, np.inf, epsrel=1e-12)
        assert m2 == pytest.approx(4 * alpha * (alpha + 1), rel=1e-8)

    def test_tau_free_of_prior(self):
        specs = make_spec()
        r1 = build_posterior(specs, PriorSpec("flat", a=0.0), X, U)
        r2 = build_posterior(specs, PriorSpec("two-point", a=0.0, m=1.5), X, U)
        ts = np.linspace(0.1, 30, 50)
        assert np.max(np.abs(r1.tau_pdf(ts) - r2.tau_pdf(ts))) < 1e-12

    def test_divergent_tau_moment_rejected(self):
        # Student kernel with small df: t^(a+(d+k)/2) f(t) ~ t^(a-1-df/2+...)
        spec = make_spec(radial=StudentMixtureRadial(3.0))
        with pytest.raises(ValueError, match="tau-moment"):
            build_posterior(spec, PriorSpec("flat", a=2.0), X, U)


class TestThetaPosterior:
    def test_flat_prior_student_identification(self):
        # theta-kernel exponent q = a+1+(d+k)/2 gives T_1(k+2a+2, x, |u|/sqrt(df))
        for a in [-1.0, 0.0, 1.0]:
            rep = build_posterior(make_spec(), PriorSpec("flat", a=a), X, U)
            params = rep.flat_theta_student()
            assert params.nu == pytest.approx(3 + 2 * a + 2)
            grid = np.linspace(-5, 6, 80)
            factored = np.log(rep.theta_pdf(grid[:, None]))
            closed = student_logpdf(params, grid[:, None])
            assert np.max(np.abs(factored - closed)) < 1e-10

    def test_theta_free_of_f(self):
        grid = np.linspace(-5, 6, 60)
        r1 = build_posterior(make_spec(), PriorSpec("flat", a=0.0), X, U)
        r2 = build_posterior(make_spec(radial=StudentMixtureRadial(4.0)), PriorSpec("flat", a=0.0), X, U)
        assert np.max(np.abs(r1.theta_pdf(grid[:, None]) - r2.theta_pdf(grid[:, None]))) < 1e-12

    def test_two_point_posterior_mass(self):
        # mass at +m is B/(A+B) with the posterior exponent q = a+1+(d+k)/2
        a, m = 0.5, 1.5
        prior = PriorSpec("two-point", a=a, m=m)
        rep = build_posterior(make_spec(), prior, X, U)
        pts, prob = rep.atom_masses()
        q = a + 1 + 2.0
        u2 = float(U @ U)
        A = ((X[0] - m) ** 2 + u2) ** q
        B = ((X[0] + m) ** 2 + u2) ** q
        assert prob[np.argmax(pts[:, 0])] == pytest.approx(B / (A + B), rel=1e-12)


class TestBruteForceOracle:
    @pytest.mark.parametrize("prior_kind", ["flat", "two-point"])
    def test_factored_matches_brute_force(self, prior_kind):
        prior = (
            PriorSpec("flat", a=0.0)
            if prior_kind == "flat"
            else PriorSpec("two-point", a=0.0, m=1.5)
        )
        grid = np.linspace(-8, 8, 161) if prior_kind == "flat" else np.array([-1.5, 1.5])
        spec = make_spec()
        rep = build_posterior(spec, prior, X, U)
        factored = factored_theta_marginal(rep, grid)
        brute = brute_force_theta_marginal(spec, prior, X, U, grid)
        assert np.max(np.abs(factored - brute)) < 1e-6

    def test_brute_force_f_invariance(self):
        grid = np.linspace(-8, 8, 81)
        prior = PriorSpec("flat", a=0.0)
        a = brute_force_theta_marginal(make_spec(), prior, X, U, grid)
        b = brute_force_theta_marginal(make_spec(radial=StudentMixtureRadial(4.0)), prior, X, U, grid)
        assert np.max(np.abs(a - b)) < 1e-6

    def test_symmetric_at_prior_center(self):
        prior = PriorSpec("two-point", a=0.0, m=2.0)
        grid = np.array([-2.0, 2.0])
        vals = brute_force_theta_marginal(make_spec(), prior, [0.0], U, grid)
        assert abs(vals[0] - vals[1]) < 1e-8


class TestIndependence:
    def test_factored_samples_uncorrelated(self):
        rep = build_posterior(make_spec(), PriorSpec("flat", a=0.0), X, U)
        theta, tau = rep.sample(100_000, RngStream(31))
        s2 = (theta[:, 0] - X[0]) ** 2
        r = np.corrcoef(s2, tau)[0, 1]
        assert abs(r) < 5 / np.sqrt(len(tau))

    def test_raw_joint_rank_independence(self):
        # sample (theta, eta) from the unfactorized posterior and check that
        # theta and tau = eta*(|theta-x|^2+|u|^2) pass a rank test
        spec = make_spec()
        theta, eta = sample_joint_posterior_grid(spec, PriorSpec("flat", a=0.0), X, U, 100_000, RngStream(32))
        tau = eta * ((theta - X[0]) ** 2 + float(U @ U))
        rho, pval = stats.spearmanr(theta, tau)
        assert pval >= 0.01, (rho, pval)

    def test_raw_joint_marginal_matches_factored(self):
        spec = make_spec()
        rep = build_posterior(spec, PriorSpec("flat", a=0.0), X, U)
        theta, eta = sample_joint_posterior_grid(spec, PriorSpec("flat", a=0.0), X, U, 200_000, RngStream(33))
        # compare histogram of raw-joint theta draws to the factored density
        hist, edges = np.histogram(theta, bins=60, range=(-4, 5), density=True)
        centers = 0.5 * (edges[1:] + edges[:-1])
        dens = rep.theta_pdf(centers[:, None])
        assert np.max(np.abs(hist - dens)) < 0.02


class TestScaleInvariantEstimator:
    def test_two_point_closed_form(self):
        # m (B - A)/(B + A) with exponent a + (k+5)/2
        a, m, k = 0.5, 2.0, 3
        x, u = np.array([0.7]), U
        u2 = float(u @ u)
        e = a + (k + 5) / 2.0
        A = ((x[0] - m) ** 2 + u2) ** e
        B = ((x[0] + m) ** 2 + u2) ** e
        expected = m * (B - A) / (B + A)
        got = scale_invariant_bayes_estimator(PriorSpec("two-point", a=a, m=m), x, u, 1, k, a)
        assert got[0] == pytest.approx(expected, abs=1e-10)

    def test_two_point_zero_at_origin(self):
        got = scale_invariant_bayes_estimator(PriorSpec("two-point", a=0.0, m=2.0), [0.0], U, 1, 3, 0.0)
        assert got[0] == 0.0

    def test_flat_prior_returns_x(self):
        got = scale_invariant_bayes_estimator(PriorSpec("flat", a=0.0), X, U, 1, 3, 0.0)
        assert got[0] == pytest.approx(X[0], abs=1e-8)

    def test_flat_prior_location_equivariance(self):
        prior = PriorSpec("flat", a=0.0)
        base = scale_invariant_bayes_estimator(prior, X, U, 1, 3, 0.0)
        shifted = scale_invariant_bayes_estimator(prior, X + 2.5, U, 1, 3, 0.0)
        assert shifted[0] - base[0] == pytest.approx(2.5, abs=1e-10)

    def test_harmonic_estimator_shrinks_toward_origin(self):
        x = np.array([1.0, 0.5, -0.3])
        u = np.ones(5)
        got = scale_invariant_bayes_estimator(PriorSpec("harmonic", a=-1.0), x, u, 3, 5, -1.0)
        assert np.linalg.norm(got) < np.linalg.norm(x)
        # shrinkage along x: direction preserved up to sampling noise
        assert np.allclose(np.cross(got, x), 0.0, atol=1e-2)


class TestPosteriorExpectation:
    def test_flat_prior_mean_is_x(self):
        rep = build_posterior(make_spec(), PriorSpec("flat", a=0.0), X, U)
        assert posterior_expectation(rep, lambda t: t) == pytest.approx(X[0], abs=1e-8)

    def test_two_point_expectation(self):
        rep = build_posterior(make_spec(), PriorSpec("two-point", a=0.0, m=1.5), X, U)
        pts, prob = rep.atom_masses()
        expected = float(np.dot(prob, pts[:, 0] ** 2))
        assert posterior_expectation(rep, lambda t: t * t) == pytest.approx(expected, rel=1e-12)
