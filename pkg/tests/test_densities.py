"""Student densities, the equivariant benchmark, and conditionals."""

import numpy as np
import pytest
from scipy import integrate, special

from pdelab import (
    ModelSpec,
    NormalRadial,
    NumericRadial,
    StudentMixtureRadial,
    DiscreteMixtureRadial,
    StudentParams,
    conditional_density,
    conditional_logpdf,
    mre_params,
    student_logpdf,
    student_pdf,
)


class TestStudentPdf:
    def test_standard_cauchy_at_center(self):
        p = StudentParams(nu=1.0, xi=[0.0], sigma=1.0, d=1)
        assert student_pdf(p, [0.0]) == pytest.approx(1 / np.pi, rel=1e-14)

    def test_value_at_center_is_normalizing_constant(self):
        for nu, sigma, d in [(4.0, 2.0, 2), (7.5, 0.3, 3), (1.0, 1.0, 1)]:
            xi = np.arange(d, dtype=float)
            p = StudentParams(nu=nu, xi=xi, sigma=sigma, d=d)
            expected = np.exp(
                special.gammaln((nu + d) / 2) - special.gammaln(nu / 2)
            ) / ((np.pi * nu) ** (d / 2) * sigma**d)
            assert student_pdf(p, xi) == pytest.approx(expected, rel=1e-13)

    def test_pointwise_formula_direct(self):
        # independent evaluation of the density formula at a fixed point
        p = StudentParams(nu=4.0, xi=[0.0, 0.0], sigma=2.0, d=2)
        t = np.array([2.0, 0.0])
        direct = (
            1
            / p.sigma**2
            * np.exp(special.gammaln(3.0) - special.gammaln(2.0))
            / (np.pi * 4.0)
            * (1 + 4.0 / (4.0 * 4.0)) ** (-3.0)
        )
        assert student_pdf(p, t) == pytest.approx(direct, rel=1e-10)

    @pytest.mark.parametrize("d", [1, 2])
    def test_integrates_to_one_quadrature(self, d):
        p = StudentParams(nu=3.0, xi=np.full(d, 0.4), sigma=1.7, d=d)
        if d == 1:
            val, _ = integrate.quad(lambda t: student_pdf(p, [t]), -np.inf, np.inf)
        else:
            # radial reduction around the center
            val, _ = integrate.quad(
                lambda r: 2 * np.pi * r * student_pdf(p, p.xi + np.array([r, 0.0])),
                0,
                np.inf,
            )
        assert val == pytest.approx(1.0, abs=1e-8)

    def test_integrates_to_one_importance_d3(self):
        # IS with a wider Student proposal, agreement within 3 SE
        from pdelab import sample_student

        p = StudentParams(nu=5.0, xi=np.array([0.5, -0.2, 1.0]), sigma=1.2, d=3)
        q = StudentParams(nu=3.0, xi=p.xi, sigma=2.0, d=3)
        gen = np.random.default_rng(5)
        ys = sample_student(q, 200_000, gen)
        w = np.exp(student_logpdf(p, ys) - student_logpdf(q, ys))
        se = w.std(ddof=1) / np.sqrt(len(w))
        assert abs(w.mean() - 1.0) < 3 * se

    def test_log_ratio_identity(self):
        # log p(t) - log p(t') reduces to the log of the shifted-norm ratio
        gen = np.random.default_rng(6)
        p = StudentParams(nu=6.0, xi=gen.normal(size=3), sigma=1.3, d=3)
        for _ in range(50):
            t, t2 = gen.normal(size=3), gen.normal(size=3)
            lhs = student_logpdf(p, t) - student_logpdf(p, t2)
            a = p.nu * p.sigma**2 + np.sum((t - p.xi) ** 2)
            b = p.nu * p.sigma**2 + np.sum((t2 - p.xi) ** 2)
            rhs = -(p.d + p.nu) / 2 * (np.log(a) - np.log(b))
            assert abs(lhs - rhs) < 1e-12

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            StudentParams(nu=-1.0, xi=[0.0], sigma=1.0, d=1)
        with pytest.raises(ValueError):
            StudentParams(nu=1.0, xi=[0.0], sigma=0.0, d=1)


class TestMreParams:
    def test_arithmetic_c1(self):
        x = np.array([1.0, 2.0, 3.0])
        u = np.array([1.0, 2.0, 0.0, 0.0, 0.0])  # |u|^2 = 5
        p = mre_params(x, u, c=1.0, k=5)
        assert p.nu == 5.0
        assert np.array_equal(p.xi, x)
        assert p.sigma == pytest.approx(np.sqrt(2.0), rel=1e-15)

    def test_arithmetic_c2(self):
        p = mre_params([1.0, 0.0, 0.0], [1.0, 0.0, 0.0, 0.0], c=2.0, k=4)
        assert p.nu == 4.0
        assert np.allclose(p.xi, [2.0, 0.0, 0.0])
        assert p.sigma == pytest.approx(np.sqrt(5.0 / 4.0), rel=1e-15)

    def test_rejects_zero_residual(self):
        with pytest.raises(ValueError):
            mre_params([1.0], [0.0, 0.0], c=1.0, k=2)

    def test_equals_flat_bayes_at_a_minus_one(self):
        from pdelab import pi0a_params

        gen = np.random.default_rng(7)
        for _ in range(10):
            x, u = gen.normal(size=3), gen.normal(size=5)
            a = mre_params(x, u, c=0.7, k=5)
            b = pi0a_params(x, u, c=0.7, k=5, a=-1.0)
            assert a.nu == b.nu and a.sigma == pytest.approx(b.sigma, rel=1e-15)
            assert np.allclose(a.xi, b.xi)


def make_spec(d=1, k=1, c=1.0, theta=None, eta=1.0, radial=None):
    theta = np.zeros(d) if theta is None else np.asarray(theta, dtype=float)
    return ModelSpec(d=d, k=k, c=c, theta=theta, eta=eta, radial=radial or NormalRadial())


class TestConditionalDensity:
    def test_normal_case_equals_normal_pdf(self):
        spec = make_spec(d=2, k=2, c=0.5, theta=[1.0, -1.0], eta=3.0)
        gen = np.random.default_rng(8)
        for _ in range(20):
            x, u, y = gen.normal(size=2), gen.normal(size=2), gen.normal(size=2)
            got = conditional_density(spec, x, u, y)
            ref = np.prod(
                np.exp(-0.5 * spec.eta * (y - spec.c * spec.theta) ** 2)
                * np.sqrt(spec.eta / (2 * np.pi))
            )
            assert got == pytest.approx(ref, rel=1e-12)

    def test_normal_case_free_of_data(self):
        spec = make_spec(d=3, k=4, c=1.0, theta=[0.2, 0.0, -0.4], eta=2.0)
        gen = np.random.default_rng(9)
        y = np.array([0.1, 0.5, -0.3])
        vals = [
            conditional_logpdf(spec, gen.normal(size=3), gen.normal(size=4), y)
            for _ in range(100)
        ]
        assert np.ptp(vals) < 1e-12

    @pytest.mark.parametrize(
        "radial",
        [StudentMixtureRadial(3.0), DiscreteMixtureRadial([(1.0, 0.5), (4.0, 0.5)])],
    )
    def test_mixture_integrates_to_one(self, radial):
        spec = make_spec(d=1, k=2, c=0.8, theta=[0.4], eta=1.5, radial=radial)
        x, u = np.array([0.7]), np.array([0.9, -0.2])
        val, _ = integrate.quad(
            lambda yy: conditional_density(spec, x, u, [yy]), -np.inf, np.inf
        )
        assert val == pytest.approx(1.0, abs=1e-8)

    def test_student_matches_quadrature_ratio_oracle(self):
        # brute force: joint density via the 1-dim mixing integral, divided
        # by a 1-dim quadrature of that joint over y (2-dim total work)
        df = 3.0
        spec = make_spec(d=1, k=1, c=1.0, theta=[0.4], eta=1.0, radial=StudentMixtureRadial(df))
        x, u = np.array([0.3]), np.array([0.9])
        p = spec.p

        def joint_mixing_quad(y):
            s = (x[0] - 0.4) ** 2 + u[0] ** 2 + (y - 0.4) ** 2

            def f(z):
                dens_ig = (
                    (df / 2) ** (df / 2)
                    / special.gamma(df / 2)
                    * z ** (-df / 2 - 1)
                    * np.exp(-df / (2 * z))
                )
                return (2 * np.pi * z) ** (-p / 2) * np.exp(-s / (2 * z)) * dens_ig

            val, _ = integrate.quad(f, 0, np.inf, epsrel=1e-11)
            return val

        den, _ = integrate.quad(joint_mixing_quad, -np.inf, np.inf, epsrel=1e-10)
        for y0 in [-0.2, 0.4, 1.3]:
            oracle = joint_mixing_quad(y0) / den
            got = conditional_density(spec, x, u, [y0])
            assert got == pytest.approx(oracle, rel=1e-6)

    def test_quadrature_path_agrees_with_closed_form(self):
        spec = make_spec(d=1, k=2, c=0.6, theta=[0.2], eta=2.0, radial=StudentMixtureRadial(4.0))
        x, u, y = np.array([0.5]), np.array([1.0, 0.3]), np.array([0.1])
        closed = conditional_logpdf(spec, x, u, y)
        quad = conditional_logpdf(spec, x, u, y, method="quadrature")
        assert closed == pytest.approx(quad, rel=1e-8)

    def test_numeric_radial_uses_quadrature(self):
        spec_num = make_spec(d=1, k=1, radial=NumericRadial(lambda t: np.exp(-t / 2)))
        spec_ref = make_spec(d=1, k=1)
        x, u, y = np.array([0.2]), np.array([0.8]), np.array([-0.5])
        assert conditional_logpdf(spec_num, x, u, y) == pytest.approx(
            conditional_logpdf(spec_ref, x, u, y), rel=1e-8
        )
