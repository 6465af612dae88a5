"""Student densities, the equivariant benchmark, and true conditionals.

Everything here works in log space; plain-density wrappers exponentiate
at the boundary. The d-variate Student density with degrees of freedom
nu, location xi, and scale sigma is

    sigma^(-d) * Gamma((nu+d)/2) / (Gamma(nu/2) (pi nu)^(d/2))
        * (1 + |t - xi|^2 / (nu sigma^2))^(-(d+nu)/2).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .model import ModelSpec, NormalRadial, StudentMixtureRadial, DiscreteMixtureRadial

_LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class StudentParams:
    """(nu, xi, sigma) of a d-variate Student density."""

    nu: float
    xi: np.ndarray
    sigma: float
    d: int

    def __post_init__(self):
        if not self.nu > 0:
            raise ValueError(f"nu must be positive, got {self.nu}")
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        xi = np.atleast_1d(np.asarray(self.xi, dtype=float))
        if xi.shape != (self.d,):
            raise ValueError(f"xi must have d={self.d} coordinates, got shape {xi.shape}")
        if not np.all(np.isfinite(xi)):
            raise ValueError("xi must be finite")
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "nu", float(self.nu))
        object.__setattr__(self, "sigma", float(self.sigma))
        object.__setattr__(self, "d", int(self.d))


def student_log_norm(nu: float, sigma: float, d: int) -> float:
    """Log normalizing constant of the Student density."""
    return (
        special.gammaln((nu + d) / 2.0)
        - special.gammaln(nu / 2.0)
        - 0.5 * d * np.log(np.pi * nu)
        - d * np.log(sigma)
    )


def student_logpdf(params: StudentParams, t):
    """Log Student density at t (a d-vector or a batch of rows)."""
    t = np.asarray(t, dtype=float)
    single = t.ndim == 1
    t2 = np.atleast_2d(t)
    diff = t2 - params.xi
    r2 = np.einsum("ij,ij->i", diff, diff)
    out = student_log_norm(params.nu, params.sigma, params.d) - 0.5 * (
        params.d + params.nu
    ) * np.log1p(r2 / (params.nu * params.sigma**2))
    return float(out[0]) if single else out


def student_pdf(params: StudentParams, t):
    """Student density at t; see :func:`student_logpdf`."""
    return np.exp(student_logpdf(params, t))


def student_logpdf_batch(nu, xi, sigma, y, d):
    """Row-wise Student log density with per-row location and scale.

    Parameters
    ----------
    nu : float
        Shared degrees of freedom.
    xi : ndarray, shape (n, d)
    sigma : ndarray, shape (n,)
    y : ndarray, shape (n, d)
    """
    diff = y - xi
    r2 = np.einsum("ij,ij->i", diff, diff)
    return (
        special.gammaln((nu + d) / 2.0)
        - special.gammaln(nu / 2.0)
        - 0.5 * d * np.log(np.pi * nu)
        - d * np.log(sigma)
        - 0.5 * (d + nu) * np.log1p(r2 / (nu * sigma**2))
    )


def sample_student(params: StudentParams, n: int, gen) -> np.ndarray:
    """Draw n rows from the Student density."""
    z = gen.standard_normal((n, params.d))
    v = gen.chisquare(params.nu, n)
    return params.xi + params.sigma * np.sqrt(params.nu / v)[:, None] * z


def mre_params(x, u, c: float, k: int) -> StudentParams:
    """Parameters of the equivariant benchmark predictive density.

    Given data (x, u), the best location-scale equivariant predictive
    density for Y is the Student T_d(k, c*x, sqrt((1+c^2)|u|^2 / k)).
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if u.shape != (k,):
        raise ValueError(f"u must have k={k} coordinates, got shape {u.shape}")
    u2 = float(np.dot(u, u))
    if u2 <= 0:
        raise ValueError("'u' must be nonzero: the predictive scale degenerates at u = 0")
    return StudentParams(nu=float(k), xi=c * x, sigma=np.sqrt((1 + c * c) * u2 / k), d=x.size)


# ----------------------------------------------------------------------
# True conditional density of Y given (X, U)
# ----------------------------------------------------------------------

def conditional_logpdf(spec: ModelSpec, x, u, y, method: str = "closed"):
    """Log of the true conditional density of Y at y, given (x, u).

    ``method='closed'`` uses exact forms: the conditional is the
    N_d(c*theta, I/eta) density for the normal kernel (free of (x, u)),
    a rescaled Student for the Student kernel, and a ratio of finite
    mixture sums for discrete mixtures. ``method='quadrature'`` divides
    the joint density by a numeric Y-marginal and works for any kernel;
    it is the path used for tabulated radial functions.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    u = np.atleast_2d(np.asarray(u, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    single = np.asarray(y).ndim <= 1 or y.shape[0] == 1
    radial = spec.radial
    d, k, c, eta = spec.d, spec.k, spec.c, spec.eta
    dy = y - c * spec.theta
    ry2 = np.einsum("ij,ij->i", dy, dy)

    if method == "closed" and isinstance(radial, NormalRadial):
        out = 0.5 * d * (np.log(eta) - _LOG_2PI) - 0.5 * eta * ry2
    elif method == "closed" and isinstance(radial, StudentMixtureRadial):
        nu = radial.df
        dx = x - spec.theta
        sxu = np.einsum("ij,ij->i", dx, dx) + np.einsum("ij,ij->i", u, u)
        nu_c = nu + d + k
        sigma2 = (nu + eta * sxu) / (eta * nu_c)
        out = (
            special.gammaln((nu_c + d) / 2.0)
            - special.gammaln(nu_c / 2.0)
            - 0.5 * d * np.log(np.pi * nu_c)
            - 0.5 * d * np.log(sigma2)
            - 0.5 * (d + nu_c) * np.log1p(ry2 / (nu_c * sigma2))
        )
    elif method == "closed" and isinstance(radial, DiscreteMixtureRadial):
        dx = x - spec.theta
        sxu = np.einsum("ij,ij->i", dx, dx) + np.einsum("ij,ij->i", u, u)
        stotal = sxu + ry2
        logw = np.log(radial.weights)
        logz = np.log(radial.scales)
        num = special.logsumexp(
            logw - 0.5 * spec.p * (_LOG_2PI + logz) - 0.5 * eta * stotal[:, None] / radial.scales,
            axis=1,
        )
        den = special.logsumexp(
            logw - 0.5 * (d + k) * (_LOG_2PI + logz) - 0.5 * eta * sxu[:, None] / radial.scales,
            axis=1,
        )
        out = 0.5 * spec.p * np.log(eta) + num - (0.5 * (d + k) * np.log(eta) + den)
    else:
        out = _conditional_logpdf_quadrature(spec, x, u, y)

    return float(out[0]) if single and out.shape == (1,) else out


def _conditional_logpdf_quadrature(spec, x, u, y):
    """Joint density over a numeric Y-marginal, one quadrature per row."""
    d, c, eta, p = spec.d, spec.c, spec.eta, spec.p
    radial = spec.radial
    dx = x - spec.theta
    sxu = np.einsum("ij,ij->i", dx, dx) + np.einsum("ij,ij->i", u, u)
    dy = y - c * spec.theta
    ry2 = np.einsum("ij,ij->i", dy, dy)
    from .model import log_unit_sphere_area

    log_area = log_unit_sphere_area(d)
    out = np.empty(ry2.shape)
    for i in range(out.size):
        si = eta * sxu[i]
        num = radial.log_radial(si + eta * ry2[i], p)

        def integrand(r):
            return r ** (d - 1) * np.exp(radial.log_radial(si + r * r, p))

        den, err = integrate.quad(integrand, 0.0, np.inf, epsrel=1e-9, limit=400)
        if not np.isfinite(den) or den <= 0 or err > 1e-6 * den:
            raise RuntimeError(
                f"quadrature for the Y-marginal did not converge (value={den!r}, err={err!r})"
            )
        out[i] = 0.5 * d * np.log(eta) + num - (np.log(den) + log_area)
    return out


def conditional_density(spec: ModelSpec, x, u, y, method: str = "closed"):
    """Conditional density of Y given (x, u); see :func:`conditional_logpdf`."""
    return np.exp(conditional_logpdf(spec, x, u, y, method=method))
