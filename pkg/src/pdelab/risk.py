"""Monte Carlo risk engines.

Estimates Kullback-Leibler risks, KL risk differences on common random
numbers, rho-loss point-prediction risks, point-estimation risks under
scale-invariant squared error, the integration-by-parts identity for
spherical kernels, and full dominance experiments over location grids
and radial-family lists.

All engines draw in fixed-size chunks with one derived stream per chunk
index and reduce chunk statistics in chunk order, so estimates are
reproducible bit-for-bit and independent of the worker count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate, special, stats

from .densities import conditional_logpdf
from .model import ModelSpec, Triples, log_unit_sphere_area, sample_triples
from .rng import RngStream
from .shrinkage import LossSpec, ShrinkageSpec, rho_loss, theta_hat, transform_to_prediction_form

DEFAULT_CHUNK = 10_000


@dataclass
class RiskPoint:
    """One Monte Carlo estimate with its normal-theory confidence interval."""

    theta_norm: float
    eta: float
    n: int
    estimate: float
    se: float
    ci_level: float
    ci_lo: float
    ci_hi: float

    @classmethod
    def from_moments(cls, theta_norm, eta, n, total, total_sq, ci_level, extra_se: float = 0.0):
        mean = total / n
        var = max(total_sq / n - mean * mean, 0.0)
        se = np.sqrt(var / n + extra_se**2)
        z = stats.norm.ppf(0.5 + ci_level / 2.0)
        return cls(
            theta_norm=float(theta_norm),
            eta=float(eta),
            n=int(n),
            estimate=float(mean),
            se=float(se),
            ci_level=float(ci_level),
            ci_lo=float(mean - z * se),
            ci_hi=float(mean + z * se),
        )


@dataclass
class RiskReport:
    """Per-family collection of grid-point estimates plus a verdict."""

    f_name: str
    points: list
    metadata: dict = field(default_factory=dict)
    verdict: Optional[str] = None

    def rows(self):
        for pt in self.points:
            yield {
                "f_family": self.f_name,
                "theta_norm": pt.theta_norm,
                "eta": pt.eta,
                "n": pt.n,
                "estimate": pt.estimate,
                "se": pt.se,
                "ci_lo": pt.ci_lo,
                "ci_hi": pt.ci_hi,
                "verdict": self.verdict or "",
            }


def _chunk_sizes(n: int, chunk: int):
    sizes = [chunk] * (n // chunk)
    if n % chunk:
        sizes.append(n % chunk)
    return sizes


def chunked_mc(spec: ModelSpec, n: int, rng: RngStream, per_sample: Callable,
               chunk: int = DEFAULT_CHUNK, threads: int = 1):
    """Chunked Monte Carlo mean of ``per_sample(triples, gen)``.

    ``per_sample`` receives the chunk's triples and the chunk generator
    (already advanced past the sampling draws, for handles that need
    extra randomness) and returns one value per row. Returns
    (total, total_sq, n, extra_var_total) where extra_var_total collects
    optional per-row evaluation variances (second return value of
    ``per_sample``, if it returns a tuple).
    """
    sizes = _chunk_sizes(n, chunk)

    def run_chunk(i):
        gen = rng.chunk_generator(i)
        triples = sample_triples(spec, sizes[i], gen)
        out = per_sample(triples, gen)
        vals, extra = out if isinstance(out, tuple) else (out, None)
        extra_sum = float(np.sum(extra**2)) if extra is not None else 0.0
        return float(np.sum(vals)), float(np.dot(vals, vals)), extra_sum

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run_chunk, range(len(sizes))))
    else:
        results = [run_chunk(i) for i in range(len(sizes))]
    totals = np.array([r[0] for r in results])
    totals_sq = np.array([r[1] for r in results])
    extras = np.array([r[2] for r in results])
    return float(np.sum(totals)), float(np.sum(totals_sq)), n, float(np.sum(extras))


def kl_risk(spec: ModelSpec, handle, n: int, rng: RngStream, ci_level: float = 0.99,
            chunk: int = DEFAULT_CHUNK, threads: int = 1) -> RiskPoint:
    """Kullback-Leibler risk of a predictive density.

    Monte Carlo average of log q(Y | X, U) - log qhat(Y; X, U) over model
    triples, where q is the true conditional density. Per-evaluation
    standard errors reported by sampled handles are folded into the
    total in quadrature.
    """

    def per_sample(t: Triples, gen):
        truth = conditional_logpdf(spec, t.x, t.u, t.y)
        if hasattr(handle, "logpdf_batch_with_se"):
            est, se = handle.logpdf_batch_with_se(t.x, t.u, t.y, gen)
        else:
            est, se = handle.logpdf_batch(t.x, t.u, t.y, gen), None
        if not np.all(np.isfinite(est)):
            bad = int(np.flatnonzero(~np.isfinite(est))[0])
            raise RuntimeError(
                f"predictive density vanished at a sampled point: x={t.x[bad]}, u={t.u[bad]}, y={t.y[bad]}"
            )
        vals = truth - est
        return (vals, se) if se is not None else vals

    total, total_sq, n, extra = chunked_mc(spec, n, rng, per_sample, chunk, threads)
    extra_se = np.sqrt(extra) / n
    return RiskPoint.from_moments(np.linalg.norm(spec.theta), spec.eta, n, total, total_sq, ci_level, extra_se)


def risk_difference(spec: ModelSpec, handle0, handle1, n: int, rng: RngStream,
                    ci_level: float = 0.99, chunk: int = DEFAULT_CHUNK, threads: int = 1) -> RiskPoint:
    """Risk(handle0) - Risk(handle1) by common random numbers.

    Monte Carlo average of log q1(Y; X, U) - log q0(Y; X, U) over shared
    triples; the true conditional density cancels and is never needed.
    """

    def per_sample(t: Triples, gen):
        l0 = handle0.logpdf_batch(t.x, t.u, t.y, gen)
        l1 = handle1.logpdf_batch(t.x, t.u, t.y, gen)
        vals = l1 - l0
        if not np.all(np.isfinite(vals)):
            bad = int(np.flatnonzero(~np.isfinite(vals))[0])
            raise RuntimeError(
                f"log-density ratio not finite at a sampled point: x={t.x[bad]}, u={t.u[bad]}, y={t.y[bad]}"
            )
        return vals

    total, total_sq, n, _ = chunked_mc(spec, n, rng, per_sample, chunk, threads)
    return RiskPoint.from_moments(np.linalg.norm(spec.theta), spec.eta, n, total, total_sq, ci_level)


def point_prediction_risk(spec: ModelSpec, predictor: Callable, loss: LossSpec, n: int,
                          rng: RngStream, ci_level: float = 0.99,
                          chunk: int = DEFAULT_CHUNK, threads: int = 1) -> RiskPoint:
    """Risk of predicting Y by ``predictor(x, u)`` under a rho-loss.

    ``predictor`` maps row batches (x, u) to predictions of Y; the
    benchmark is x, u -> c*x.
    """

    def per_sample(t: Triples, gen):
        return rho_loss(loss, predictor(t.x, t.u), t.y, t.u, spec.c)

    total, total_sq, n, _ = chunked_mc(spec, n, rng, per_sample, chunk, threads)
    return RiskPoint.from_moments(np.linalg.norm(spec.theta), spec.eta, n, total, total_sq, ci_level)


def point_prediction_risk_difference(spec: ModelSpec, predictor0, predictor1, loss: LossSpec,
                                     n: int, rng: RngStream, ci_level: float = 0.99,
                                     chunk: int = DEFAULT_CHUNK, threads: int = 1) -> RiskPoint:
    """Risk(predictor0) - Risk(predictor1) on common random numbers."""

    def per_sample(t: Triples, gen):
        return rho_loss(loss, predictor0(t.x, t.u), t.y, t.u, spec.c) - rho_loss(
            loss, predictor1(t.x, t.u), t.y, t.u, spec.c
        )

    total, total_sq, n, _ = chunked_mc(spec, n, rng, per_sample, chunk, threads)
    return RiskPoint.from_moments(np.linalg.norm(spec.theta), spec.eta, n, total, total_sq, ci_level)


def point_estimation_risk_difference(spec: ModelSpec, estimator0, estimator1, n: int,
                                     rng: RngStream, ci_level: float = 0.99,
                                     chunk: int = DEFAULT_CHUNK, threads: int = 1) -> RiskPoint:
    """Difference of estimation risks under scale-invariant squared error.

    Loss eta |delta(X, U) - theta|^2; estimators map row batches (x, u)
    to estimates of theta. Y is sampled but unused.
    """

    def per_sample(t: Triples, gen):
        d0 = estimator0(t.x, t.u) - spec.theta
        d1 = estimator1(t.x, t.u) - spec.theta
        return spec.eta * (np.einsum("ij,ij->i", d0, d0) - np.einsum("ij,ij->i", d1, d1))

    total, total_sq, n, _ = chunked_mc(spec, n, rng, per_sample, chunk, threads)
    return RiskPoint.from_moments(np.linalg.norm(spec.theta), spec.eta, n, total, total_sq, ci_level)


def duality_residual_max(spec: ModelSpec, shrink: ShrinkageSpec, n: int, rng: RngStream,
                         chunk: int = DEFAULT_CHUNK) -> float:
    """Max per-sample residual of the plug-in/benchmark log-ratio identity.

    For two Student densities sharing degrees of freedom and scale, the
    log-ratio at Y equals ((d+k)/2) * [log(|Y-cX|^2 + (1+c^2)|U|^2) -
    log(|Y - c theta_hat|^2 + (1+c^2)|U|^2)] exactly. Returns the largest
    absolute difference between the two evaluations over n samples.
    """
    from .bayes import StudentFormPredictive

    h0 = StudentFormPredictive.mre(spec.c, spec.k)
    h1 = StudentFormPredictive.plugin(shrink, spec.c, spec.k)
    half = (spec.d + spec.k) / 2.0
    worst = 0.0
    for i, size in enumerate(_chunk_sizes(n, chunk)):
        gen = rng.chunk_generator(i)
        t = sample_triples(spec, size, gen)
        lhs = h1.logpdf_batch(t.x, t.u, t.y) - h0.logpdf_batch(t.x, t.u, t.y)
        s2 = (1 + spec.c**2) * np.einsum("ij,ij->i", t.u, t.u)
        d0 = t.y - spec.c * t.x
        d1 = t.y - spec.c * theta_hat(shrink, t.x, t.u, spec.c, spec.k)
        rhs = half * (
            np.log(s2 + np.einsum("ij,ij->i", d0, d0)) - np.log(s2 + np.einsum("ij,ij->i", d1, d1))
        )
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return worst


def benchmark_predictor(c: float):
    """The equivariant point predictor x, u -> c*x."""
    return lambda x, u: c * x


def plugin_predictor(shrink: ShrinkageSpec, c: float, k: int):
    """The shrinkage point predictor x, u -> c * theta_hat(x, u)."""
    return lambda x, u: c * theta_hat(shrink, x, u, c, k)


# ----------------------------------------------------------------------
# Integration-by-parts identity for spherical kernels
# ----------------------------------------------------------------------

@dataclass
class SteinReport:
    """Both sides of the identity, with and without the 1/gamma factor."""

    lhs: float
    lhs_se: float
    rhs_no_gamma: float
    rhs_se: float
    gamma: float
    method: str

    @property
    def rhs_with_gamma(self):
        return self.rhs_no_gamma / self.gamma

    @property
    def discrepancy_no_gamma(self):
        return abs(self.lhs - self.rhs_no_gamma)

    @property
    def discrepancy_with_gamma(self):
        return abs(self.lhs - self.rhs_with_gamma)

    @property
    def combined_se(self):
        return np.sqrt(self.lhs_se**2 + self.rhs_se**2)

    def passes(self, tol: float = 1e-6, z: float = 3.0) -> bool:
        return self.discrepancy_no_gamma < max(tol, z * self.combined_se)


@dataclass(frozen=True)
class RadialField:
    """Vector field z -> h(|z|^2) z, closed under the radial reductions.

    ``h`` and its derivative give z'g = h(r2) r2 and
    div g = d h(r2) + 2 r2 h'(r2). The linear field is h = 1, the
    James-Stein type is h = -(d-2)/r2.
    """

    h: Callable
    dh: Callable
    name: str = "radial-field"

    @classmethod
    def linear(cls):
        return cls(h=lambda r2: np.ones_like(r2), dh=lambda r2: np.zeros_like(r2), name="linear")

    @classmethod
    def james_stein(cls, d: int):
        return cls(
            h=lambda r2: -(d - 2) / r2,
            dh=lambda r2: (d - 2) / r2**2,
            name="james-stein",
        )

    def zdotg(self, r2, d):
        return self.h(np.asarray(r2, dtype=float)) * r2

    def div(self, r2, d):
        r2 = np.asarray(r2, dtype=float)
        return d * self.h(r2) + 2 * r2 * self.dh(r2)


def stein_identity_check(radial, d: int, k: int, g: RadialField, n: int = 400_000,
                         rng: Optional[RngStream] = None, method: str = "auto") -> SteinReport:
    """Check int z'g f = int div_z g * F against its 1/gamma variant.

    Here (z, u) has density f(|z|^2 + |u|^2) on R^(d+k), F is the
    half-tail transform F(t) = (1/2) int_t^inf f, and
    gamma = int F = E|V|^2 / (d + k) (the mixing mean for scale
    mixtures). Quadrature is used for d + k <= 3, otherwise Monte Carlo
    with draws from f for the left side and from the normalized F-kernel
    for the right side.
    """
    dk = d + k
    gamma = radial.mixing_mean()
    if method == "auto":
        method = "quadrature" if dk <= 3 else "mc"

    if method == "quadrature":
        log_area_z = log_unit_sphere_area(d)

        def split(fn_log, weight):
            # int over R^d x R^k of weight(|z|^2) * exp(fn_log(|z|^2+|u|^2))
            if k == 0:
                f = lambda r: np.exp(fn_log(r * r) + log_area_z) * r ** (d - 1) * weight(r * r)
                val, err = integrate.quad(f, 0, np.inf, epsrel=1e-10, limit=400)
                return val, err
            log_area_u = log_unit_sphere_area(k)

            def outer(r):
                f = lambda s: np.exp(fn_log(r * r + s * s)) * s ** (k - 1)
                val, _ = integrate.quad(f, 0, np.inf, epsrel=1e-10, limit=400)
                return val * np.exp(log_area_z + log_area_u) * r ** (d - 1) * weight(r * r)

            val, err = integrate.quad(outer, 0, np.inf, epsrel=1e-9, limit=400)
            return val, err

        lhs, _ = split(lambda t: radial.log_radial(t, dk), lambda r2: g.zdotg(r2, d))
        rhs, _ = split(lambda t: radial.log_survival(t, dk), lambda r2: g.div(r2, d))
        return SteinReport(lhs=float(lhs), lhs_se=0.0, rhs_no_gamma=float(rhs), rhs_se=0.0,
                           gamma=float(gamma), method="quadrature")

    rng = rng or RngStream(0)
    gen_l = rng.chunk_generator(0)
    # left side: E_f[z'g]
    z = gen_l.standard_normal((n, dk))
    if radial.has_mixing:
        mix = radial.sample_mixing(n, gen_l)
        z = z * np.sqrt(mix)[:, None]
    r2 = np.einsum("ij,ij->i", z[:, :d], z[:, :d])
    vals_l = g.zdotg(r2, d)
    lhs, lhs_se = float(vals_l.mean()), float(vals_l.std(ddof=1) / np.sqrt(n))
    # right side: gamma * E_{F/gamma}[div g]
    gen_r = rng.chunk_generator(1)
    w = radial.sample_survival(n, dk, gen_r)
    r2w = np.einsum("ij,ij->i", w[:, :d], w[:, :d])
    vals_r = gamma * g.div(r2w, d)
    rhs, rhs_se = float(vals_r.mean()), float(vals_r.std(ddof=1) / np.sqrt(n))
    return SteinReport(lhs=lhs, lhs_se=lhs_se, rhs_no_gamma=rhs, rhs_se=rhs_se,
                       gamma=float(gamma), method="mc")


# ----------------------------------------------------------------------
# Dominance experiments
# ----------------------------------------------------------------------

@dataclass
class DominanceConfig:
    """Everything needed to run one dominance experiment.

    ``pair_factory(spec)`` returns a callable (spec, n, rng, ci, chunk,
    threads) -> RiskPoint estimating Risk(baseline) - Risk(challenger)
    at the given model point.
    """

    base_spec: ModelSpec
    families: Sequence  # (name, RadialFamily) pairs
    theta_norms: Sequence[float]
    n: int
    seed: int
    ci_level: float = 0.99
    eps_tol: float = 1e-4
    chunk: int = DEFAULT_CHUNK
    threads: int = 1
    verdict_gate: Optional[str] = None  # e.g. "d >= 3"
    metadata: dict = field(default_factory=dict)


def dominance_verdict(points, eps_tol: float) -> str:
    """PASS when every CI lower bound clears -eps_tol and one is positive."""
    lo = np.array([p.ci_lo for p in points])
    if np.all(lo > -eps_tol) and np.any(lo > 0):
        return "PASS"
    return "FAIL"


def run_dominance(config: DominanceConfig, difference_fn) -> list:
    """Run a difference estimator across the theta-grid and family list.

    Grid cells reuse matched streams: cell (f, theta_i) uses substream i
    of the base seed regardless of f, so families share their underlying
    standard-normal draws (common random numbers).
    """
    reports = []
    gate_ok = config.base_spec.d >= 3
    for name, radial in config.families:
        points = []
        for i, tn in enumerate(config.theta_norms):
            spec = config.base_spec.with_theta_norm(tn).with_radial(radial)
            stream = RngStream(config.seed).substream(i)
            points.append(
                difference_fn(spec, config.n, stream, config.ci_level, config.chunk, config.threads)
            )
        verdict = dominance_verdict(points, config.eps_tol)
        if config.verdict_gate == "d >= 3" and not gate_ok:
            verdict = "SUPPRESSED"
        reports.append(
            RiskReport(f_name=name, points=points, verdict=verdict, metadata=dict(config.metadata))
        )
    return reports


def theorem1_prediction_difference(spec: ModelSpec, alpha: float, g: ShrinkageSpec, loss: LossSpec,
                                   n: int, rng: RngStream, ci_level: float = 0.99,
                                   chunk: int = DEFAULT_CHUNK, threads: int = 1) -> RiskPoint:
    """Canonical-model point-prediction check through the coordinate map.

    Samples the location-scale model, maps triples to the canonical
    prediction coordinates (xt, yt, ut, beta), and compares the
    benchmark xt against xt + alpha |ut|^2 g(xt) / (k+2) under
    rho(|delta - yt|^2 + |ut|^2). Requires 0 < alpha < 1/(1+beta)
    for the dominance claim.
    """

    def per_sample(t: Triples, gen):
        xt, yt, ut, beta = transform_to_prediction_form(t.x, t.y, t.u, spec.c)
        from .shrinkage import g_eval

        u2 = np.einsum("ij,ij->i", ut, ut)
        delta = xt + (alpha * u2 / (spec.k + 2))[:, None] * np.atleast_2d(g_eval(g, xt))
        base = rho_loss(loss, xt, yt, ut, 0.0)
        alt = rho_loss(loss, delta, yt, ut, 0.0)
        return base - alt

    total, total_sq, n, _ = chunked_mc(spec, n, rng, per_sample, chunk, threads)
    return RiskPoint.from_moments(np.linalg.norm(spec.theta), spec.eta, n, total, total_sq, ci_level)
