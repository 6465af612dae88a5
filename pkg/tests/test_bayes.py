"""Separable-prior predictive densities: oracles and cross-checks."""

import numpy as np
import pytest
from scipy import integrate

from pdelab import (
    ModelSpec,
    NormalRadial,
    PriorSpec,
    RngStream,
    SeparableBayesPredictive,
    StudentMixtureRadial,
    StudentParams,
    check_normalization,
    f_independence_check,
    mre_params,
    numeric_predictive_logpdf,
    pi0a_params,
    student_logpdf,
)


class TestPriorSpec:
    def test_exponent_bookkeeping(self):
        # n = d + k/2 + a + 1; the closed-form df k + 2a + 2 equals 2n - 2d
        # (the y-kernel exponent (2n - d)/2 matches (d + df)/2)
        for d in range(1, 5):
            for k in range(1, 7):
                for a in [-1.0, -0.5, 0.0, 1.0, 2.0]:
                    prior = PriorSpec("flat", a=a)
                    n = prior.exponent_n(d, k)
                    assert n == pytest.approx(d + k / 2 + a + 1)
                    assert prior.closed_form_df(k) == pytest.approx(2 * n - 2 * d)

    def test_harmonic_requires_d3(self):
        prior = PriorSpec("harmonic")
        with pytest.raises(ValueError):
            prior.validate_for_dimension(2)
        prior.validate_for_dimension(3)

    def test_two_point_atoms(self):
        pts, wts = PriorSpec("two-point", m=2.0).atoms(1)
        assert np.allclose(pts[:, 0], [-2.0, 2.0]) and np.allclose(wts, [0.5, 0.5])

    def test_validation(self):
        with pytest.raises(ValueError):
            PriorSpec("two-point", m=-1.0)
        with pytest.raises(ValueError):
            PriorSpec("nope")


class TestPi0aParams:
    def test_a_minus_one_is_benchmark(self):
        gen = np.random.default_rng(0)
        x, u = gen.normal(size=2), gen.normal(size=4)
        a = pi0a_params(x, u, 1.3, 4, -1.0)
        b = mre_params(x, u, 1.3, 4)
        assert a.nu == b.nu and a.sigma == pytest.approx(b.sigma) and np.allclose(a.xi, b.xi)

    def test_arithmetic(self):
        u = np.array([1.0, 1.0, 1.0, 0.0])  # |u|^2 = 3
        p = pi0a_params([0.5], u, 1.0, 4, 0.0)
        assert p.nu == 6.0
        assert p.sigma == pytest.approx(1.0)

    def test_rejects_nonpositive_df(self):
        with pytest.raises(ValueError):
            pi0a_params([0.0], [1.0, 1.0], 1.0, 2, -2.5)


class TestFlatQuadratureOracle:
    @pytest.mark.parametrize("d", [1, 2])
    @pytest.mark.parametrize("a", [-1.0, 0.0, 1.0])
    def test_numeric_matches_closed_form(self, d, a):
        gen = np.random.default_rng(d * 10 + int(a) + 5)
        k, c = 3, 1.0
        x, u = gen.normal(size=d), gen.normal(size=k)
        closed = pi0a_params(x, u, c, k, a)
        handle = SeparableBayesPredictive(PriorSpec("flat", a=a), c, k, evaluator="quadrature").bind(x, u)
        direction = np.ones(d) / np.sqrt(d)
        ys = closed.xi[None, :] + closed.sigma * np.linspace(-4, 4, 25)[:, None] * direction
        err = np.abs(handle.logpdf(ys) - student_logpdf(closed, ys))
        assert err.max() < 1e-3

    def test_closed_evaluator_is_exact(self):
        gen = np.random.default_rng(1)
        x, u = gen.normal(size=3), gen.normal(size=5)
        fam = SeparableBayesPredictive(PriorSpec("flat", a=0.0), 0.7, 5)
        handle = fam.bind(x, u)
        closed = pi0a_params(x, u, 0.7, 5, 0.0)
        ys = gen.normal(size=(20, 3))
        assert np.max(np.abs(handle.logpdf(ys) - student_logpdf(closed, ys))) < 1e-10


class TestTwoPointHandle:
    def test_matches_direct_two_term_implementation(self):
        # counting measure collapses the integrals to two-term sums
        m, a, c, k = 1.5, -1.0, 1.0, 2
        prior = PriorSpec("two-point", a=a, m=m)
        x, u = np.array([0.4]), np.array([1.1, -0.3])
        handle = SeparableBayesPredictive(prior, c, k).bind(x, u)
        n = prior.exponent_n(1, k)
        u2 = float(u @ u)

        def direct(y):
            num = 0.5 * sum(
                ((x[0] - t) ** 2 + u2 + (y - c * t) ** 2) ** -n for t in (-m, m)
            )
            den_theta = 0.5 * sum(((x[0] - t) ** 2 + u2) ** -(n - 0.5) for t in (-m, m))
            block = np.sqrt(np.pi) * np.exp(
                __import__("scipy.special", fromlist=["gammaln"]).gammaln(n - 0.5)
                - __import__("scipy.special", fromlist=["gammaln"]).gammaln(n)
            )
            return np.log(num) - np.log(block * den_theta)

        for y in np.linspace(-4, 4, 15):
            assert handle.logpdf(np.array([y])) == pytest.approx(direct(y), abs=1e-12)

    def test_integrates_to_one(self):
        prior = PriorSpec("two-point", a=0.0, m=2.0)
        handle = SeparableBayesPredictive(prior, 0.8, 3).bind(np.array([0.2]), np.array([0.9, 0.1, -0.4]))
        val, _ = integrate.quad(lambda y: np.exp(handle.logpdf(np.array([y]))), -np.inf, np.inf)
        assert val == pytest.approx(1.0, abs=1e-6)


def harmonic_family(c=1.0, k=5, n_draws=50_000, evaluator="auto"):
    return SeparableBayesPredictive(PriorSpec("harmonic", a=-1.0), c, k,
                                    evaluator=evaluator, n_draws=n_draws)


class TestHarmonicHandle:
    def test_radial_reduction_matches_brute_quadrature(self):
        # oracle: 2-dim (radius, angle) quadrature of the numerator integral
        from pdelab.bayes import _log_harmonic_integral_d3

        def brute(q, center, b2):
            R = np.linalg.norm(center)

            def inner(r):
                f = lambda t: (r * r + R * R - 2 * r * R * t + b2) ** (-q)
                val, _ = integrate.quad(f, -1, 1)
                return r * val

            val, _ = integrate.quad(inner, 0, np.inf, limit=300)
            return np.log(2 * np.pi * val)

        gen = np.random.default_rng(2)
        for q in [4.0, 5.5]:
            for _ in range(3):
                center = gen.normal(size=3)
                b2 = float(gen.uniform(0.5, 4.0))
                got = float(_log_harmonic_integral_d3(q, np.linalg.norm(center), b2))
                assert got == pytest.approx(brute(q, center, b2), abs=1e-9)

    def test_importance_agrees_with_radial(self):
        # the sampled evaluator at the default budget agrees with the exact
        # reduction within a few standard errors
        gen = np.random.default_rng(3)
        fam_exact = harmonic_family()
        fam_is = harmonic_family(n_draws=200_000, evaluator="importance")
        for trial in range(3):
            x, u = gen.normal(size=3) * 1.5, gen.normal(size=5)
            y = gen.normal(size=3)
            exact = fam_exact.bind(x, u).logpdf(y)
            h = fam_is.bind(x, u, seed=trial)
            val, se = h.logpdf_with_se(y)
            se = np.sqrt(se**2 + h.log_norm_se**2)
            assert abs(val - exact) < 4 * max(se, 1e-4), (val, exact, se)

    def test_batch_matches_bound_handle(self):
        gen = np.random.default_rng(4)
        fam = harmonic_family()
        x, u, y = gen.normal(size=(4, 3)), gen.normal(size=(4, 5)), gen.normal(size=(4, 3))
        batch = fam.logpdf_batch(x, u, y)
        single = np.array([fam.bind(x[i], u[i]).logpdf(y[i]) for i in range(4)])
        assert np.allclose(batch, single, rtol=1e-12)

    def test_normalization_independent_proposal(self):
        gen = np.random.default_rng(5)
        handle = harmonic_family().bind(gen.normal(size=3), gen.normal(size=5))
        est, se = check_normalization(handle, n_y=40_000, seed=11)
        assert abs(est - 1.0) < 3 * se

    def test_spherical_symmetry_at_origin(self):
        # with x = 0 the harmonic predictive density is rotation invariant
        u = np.array([1.0, 1.0, 1.0, 1.0, 1.0])
        handle = harmonic_family().bind(np.zeros(3), u)
        gen = np.random.default_rng(6)
        y = np.array([0.7, -0.4, 1.1])
        base = handle.logpdf(y)
        for _ in range(5):
            q, _ = np.linalg.qr(gen.normal(size=(3, 3)))
            assert handle.logpdf(q @ y) == pytest.approx(base, abs=1e-10)

    def test_rotation_covariance_of_x(self):
        # rotating (x, y) jointly leaves the density unchanged
        gen = np.random.default_rng(7)
        x, u, y = gen.normal(size=3), gen.normal(size=5), gen.normal(size=3)
        fam = harmonic_family()
        base = fam.bind(x, u).logpdf(y)
        for _ in range(5):
            q, _ = np.linalg.qr(gen.normal(size=(3, 3)))
            assert fam.bind(q @ x, u).logpdf(q @ y) == pytest.approx(base, abs=1e-10)

    def test_flat_importance_weights_are_constant(self):
        # matched proposal: flat-prior weights are exactly 1, so the sampled
        # evaluator reproduces the closed form to rounding
        gen = np.random.default_rng(8)
        x, u, y = gen.normal(size=3), gen.normal(size=5), gen.normal(size=3)
        fam = SeparableBayesPredictive(PriorSpec("flat", a=-1.0), 1.0, 5, evaluator="importance", n_draws=2000)
        closed = mre_params(x, u, 1.0, 5)
        assert fam.bind(x, u).logpdf(y) == pytest.approx(student_logpdf(closed, y), abs=1e-10)

    def test_determinism_of_bound_handle(self):
        gen = np.random.default_rng(9)
        x, u, y = gen.normal(size=3), gen.normal(size=5), gen.normal(size=3)
        fam = harmonic_family(n_draws=10_000, evaluator="importance")
        a = fam.bind(x, u, seed=42).logpdf(y)
        b = fam.bind(x, u, seed=42).logpdf(y)
        assert a == b

    def test_numerator_draws_shared_across_y(self):
        # the numerator generator restarts per call: evaluating a grid twice
        # gives identical values even for the sampled evaluator
        gen = np.random.default_rng(10)
        x, u = gen.normal(size=3), gen.normal(size=5)
        h = harmonic_family(n_draws=5_000, evaluator="importance").bind(x, u, seed=3)
        ys = gen.normal(size=(6, 3))
        assert np.array_equal(h.logpdf(ys), h.logpdf(ys))


class TestNumericPredictiveLogpdf:
    def test_module_level_wrapper(self):
        gen = np.random.default_rng(11)
        x, u = gen.normal(size=1), gen.normal(size=2)
        handle = SeparableBayesPredictive(PriorSpec("flat", a=0.0), 1.0, 2, evaluator="quadrature").bind(x, u)
        y = np.array([0.3])
        assert numeric_predictive_logpdf(handle, y) == handle.logpdf(y)

    def test_ess_guard(self):
        # harmonic weights vary, so ESS < N always; a floor of 1.0 must trip
        fam = SeparableBayesPredictive(PriorSpec("harmonic", a=-1.0), 1.0, 5,
                                       evaluator="importance", n_draws=2_000, ess_floor=1.0)
        with pytest.raises(RuntimeError, match="ESS"):
            fam.bind(np.ones(3), np.ones(5)).logpdf(np.zeros(3))


class TestFIndependence:
    def test_flat_prior_across_kernels(self):
        base = ModelSpec(d=1, k=2, c=1.0, theta=[0.3], eta=1.0)
        models = [base, base.with_radial(StudentMixtureRadial(3.0))]
        ys = np.linspace(-2.5, 3.5, 7)
        report = f_independence_check(PriorSpec("flat", a=-1.0), models, [0.7], [1.1, -0.4], ys)
        assert report["max_discrepancy"] < 1e-5

    def test_two_point_prior_across_kernels(self):
        base = ModelSpec(d=1, k=2, c=1.0, theta=[0.3], eta=1.0)
        models = [base, base.with_radial(StudentMixtureRadial(3.0))]
        ys = np.linspace(-2.0, 3.0, 5)
        prior = PriorSpec("two-point", a=-1.0, m=1.5)
        report = f_independence_check(prior, models, [0.7], [1.1, -0.4], ys)
        assert report["max_discrepancy"] < 1e-5

    def test_single_model_discrepancy_zero(self):
        base = ModelSpec(d=1, k=2, c=1.0, theta=[0.3], eta=1.0)
        report = f_independence_check(PriorSpec("flat"), [base], [0.7], [1.1, -0.4], np.linspace(-1, 1, 3))
        assert report["max_discrepancy"] == 0.0

    def test_brute_force_matches_f_free_formula(self):
        # the direct (theta, eta) quadrature reproduces the reduced formula
        base = ModelSpec(d=1, k=2, c=1.0, theta=[0.3], eta=1.0)
        x, u = np.array([0.7]), np.array([1.1, -0.4])
        ys = np.linspace(-2.0, 3.0, 5)
        report = f_independence_check(PriorSpec("flat", a=-1.0), [base], x, u, ys)
        brute = next(iter(report["log_densities"].values()))
        closed = student_logpdf(mre_params(x, u, 1.0, 2), ys[:, None])
        assert np.max(np.abs(brute - closed)) < 1e-6
