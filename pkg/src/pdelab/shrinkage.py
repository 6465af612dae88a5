"""Shrinkage fields, plug-in location estimators, and the loss family.

A shrinkage field g on R^d defines the location estimator

    theta_hat(x, u) = x + a * (|u|^2 / (k+2)) * g(x / c)

whose Student plug-in predictive density recenters the equivariant
benchmark at c * theta_hat. Dominance of the plug-in rests on the
differential inequality |g|^2 + 2 div g <= 0 (d >= 3) together with a
bound on the tuning constant a.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .densities import StudentParams, mre_params

logger = logging.getLogger(__name__)

_KINDS = ("james-stein", "positive-part", "baranchik", "user")
_LOSS_KINDS = ("log", "power", "reflected-normal", "squared-error")


@dataclass(frozen=True)
class ShrinkageSpec:
    """A shrinkage field plus its tuning constant a > 0.

    kinds
    -----
    ``james-stein``
        g(t) = -(d-2) t / |t|^2, singular at t = 0.
    ``positive-part``
        g(t) = -min((d-2)/|t|^2, 1) * t: the James-Stein field with its
        componentwise shrinkage factor capped at one, hence bounded and
        weakly differentiable across the sphere |t|^2 = d - 2.
    ``baranchik``
        g(t) = -r(|t|^2) (d-2) t / |t|^2 for a user-supplied scalar r;
        accepted only if the numeric condition check passes.
    ``user``
        arbitrary vector field, batch signature g(t: (n, d)) -> (n, d).
    """

    kind: str
    a: float
    r: Optional[Callable] = None
    field_fn: Optional[Callable] = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown shrinkage kind {self.kind!r}; expected one of {_KINDS}")
        if not self.a > 0:
            raise ValueError(f"tuning constant a must be positive, got {self.a}")
        if self.kind == "baranchik" and self.r is None:
            raise ValueError("baranchik kind requires the scalar function r")
        if self.kind == "user" and self.field_fn is None:
            raise ValueError("user kind requires field_fn")

    @property
    def singular_at_origin(self) -> bool:
        return self.kind in ("james-stein", "baranchik")


def dominance_tuning_bound(c: float) -> float:
    """Upper limit (1 + c^2) / (c^2 (1 + c)) for the tuning constant a."""
    return (1.0 + c * c) / (c * c * (1.0 + c))


def default_tuning(c: float) -> float:
    """Preset tuning: the midpoint 0.5 * dominance_tuning_bound(c)."""
    return 0.5 * dominance_tuning_bound(c)


def g_eval(spec: ShrinkageSpec, t) -> np.ndarray:
    """Evaluate the shrinkage field at t (a d-vector or batch of rows)."""
    t = np.asarray(t, dtype=float)
    single = t.ndim == 1
    tb = np.atleast_2d(t)
    d = tb.shape[1]
    r2 = np.einsum("ij,ij->i", tb, tb)
    if spec.singular_at_origin and np.any(r2 == 0.0):
        raise ValueError(f"{spec.kind} field is singular at t = 0")
    if spec.kind == "james-stein":
        out = -(d - 2) * tb / r2[:, None]
    elif spec.kind == "positive-part":
        factor = np.minimum((d - 2) / np.maximum(r2, 1e-300), 1.0)
        out = -factor * tb
    elif spec.kind == "baranchik":
        out = -np.asarray(spec.r(r2), dtype=float)[:, None] * (d - 2) * tb / r2[:, None]
    else:
        out = np.asarray(spec.field_fn(tb), dtype=float)
    return out[0] if single else out


def _divergence_fd(spec: ShrinkageSpec, t: np.ndarray) -> float:
    """Central-difference divergence, one-sided across the positive-part kink."""
    d = t.size
    h = 1e-5 * max(1.0, float(np.linalg.norm(t)))
    if spec.kind == "positive-part":
        # Straddling the kink sphere |t|^2 = d - 2 mixes the two branches;
        # nudge the evaluation point off the sphere instead.
        r = np.linalg.norm(t)
        edge = np.sqrt(d - 2.0) if d > 2 else 0.0
        if edge and abs(r - edge) < 2 * h:
            t = t * ((edge + 3 * h) / r)
    div = 0.0
    for i in range(d):
        e = np.zeros(d)
        e[i] = h
        div += (g_eval(spec, t + e)[i] - g_eval(spec, t - e)[i]) / (2 * h)
    return div


def check_superharmonic_condition(spec: ShrinkageSpec, d: int, grid) -> dict:
    """Evaluate |g|^2 + 2 div g over a grid of points in R^d.

    Divergence is computed by central finite differences with relative
    step 1e-5. Returns the per-point values, the maximum, and a pass flag
    at tolerance 1e-6.
    """
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    values = np.empty(grid.shape[0])
    for i, t in enumerate(grid):
        g = g_eval(spec, t)
        values[i] = float(np.dot(g, g)) + 2.0 * _divergence_fd(spec, t)
    max_value = float(values.max())
    return {
        "values": values,
        "max_value": max_value,
        "passed": bool(max_value <= 1e-6),
        "tolerance": 1e-6,
        "n_points": grid.shape[0],
    }


def theta_hat(spec: ShrinkageSpec, x, u, c: float, k: int) -> np.ndarray:
    """Plug-in location estimate x + a (|u|^2/(k+2)) g(x/c).

    Accepts a single (x, u) pair or row-aligned batches. Rows where the
    field is singular (x = 0 for James-Stein type fields) fall back to
    theta_hat = x with a logged diagnostic; the event has probability
    zero under every model in this package.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    xb = np.atleast_2d(x)
    ub = np.atleast_2d(np.asarray(u, dtype=float))
    u2 = np.einsum("ij,ij->i", ub, ub)
    coef = spec.a * u2 / (k + 2)
    out = xb.copy()
    if spec.singular_at_origin:
        ok = np.einsum("ij,ij->i", xb, xb) > 0
        if not np.all(ok):
            logger.warning(
                "theta_hat: %d singular row(s) at x = 0; falling back to no shrinkage",
                int(np.count_nonzero(~ok)),
            )
    else:
        ok = np.ones(xb.shape[0], dtype=bool)
    if np.any(ok):
        out[ok] += coef[ok, None] * np.atleast_2d(g_eval(spec, xb[ok] / c))
    return out[0] if single else out


def plugin_density_params(spec: ShrinkageSpec, x, u, c: float, k: int) -> StudentParams:
    """Student parameters of the plug-in predictive density.

    Same degrees of freedom and scale as the equivariant benchmark; only
    the center moves, from c*x to c*theta_hat(x, u).
    """
    base = mre_params(x, u, c, k)
    center = c * theta_hat(spec, np.asarray(x, dtype=float), np.asarray(u, dtype=float), c, k)
    return StudentParams(nu=base.nu, xi=center, sigma=base.sigma, d=base.d)


# ----------------------------------------------------------------------
# Loss family
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class LossSpec:
    """rho-losses applied to |y - delta|^2 + (1+c^2)|u|^2.

    kinds: ``log`` (rho(t) = log t), ``power`` (rho(t) = t^p, 0 < p < 1),
    ``reflected-normal`` (rho(t) = 1 - exp(-t/alpha), alpha > 0), and
    ``squared-error`` which is the plain prediction penalty |y - delta|^2
    without the residual term.
    """

    kind: str
    p: float = 0.5
    alpha: float = 1.0

    def __post_init__(self):
        if self.kind not in _LOSS_KINDS:
            raise ValueError(f"unknown loss kind {self.kind!r}; expected one of {_LOSS_KINDS}")
        if self.kind == "power" and not 0.0 < self.p < 1.0:
            raise ValueError(f"power exponent must lie strictly in (0, 1), got {self.p}")
        if self.kind == "reflected-normal" and not self.alpha > 0:
            raise ValueError(f"reflected-normal alpha must be positive, got {self.alpha}")

    def rho(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "log":
            if np.any(t <= 0):
                raise ValueError("log loss undefined at nonpositive argument")
            return np.log(t)
        if self.kind == "power":
            return t**self.p
        if self.kind == "reflected-normal":
            return 1.0 - np.exp(-t / self.alpha)
        return t

    @property
    def label(self) -> str:
        if self.kind == "power":
            return f"power:{self.p:g}"
        if self.kind == "reflected-normal":
            return f"reflected-normal:{self.alpha:g}"
        return self.kind


def rho_loss(loss: LossSpec, delta, y, u, c: float):
    """Loss of predicting y by delta with residual u.

    Evaluates rho(|y - delta|^2 + (1+c^2)|u|^2); the squared-error kind
    returns |y - delta|^2 alone. Batch rows are supported.
    """
    delta = np.atleast_2d(np.asarray(delta, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    u = np.atleast_2d(np.asarray(u, dtype=float))
    diff = y - delta
    sq = np.einsum("ij,ij->i", diff, diff)
    if loss.kind == "squared-error":
        out = sq
    else:
        out = loss.rho(sq + (1 + c * c) * np.einsum("ij,ij->i", u, u))
    return float(out[0]) if out.shape == (1,) else out


def transform_to_prediction_form(x, y, u, c: float):
    """Map model samples onto the canonical prediction-problem coordinates.

    Returns (x/c, y/c^2, sqrt(1+c^2)/c^2 * u, beta) where beta = 1/c^2.
    Under this map a triple with location theta and precision eta follows
    the canonical prediction model with location theta/c and precision
    c^2 * eta; the beta value is fixed by matching the transformed
    covariances (see the corresponding tests).
    """
    if not c > 0:
        raise ValueError(f"c must be positive, got {c}")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    u = np.asarray(u, dtype=float)
    return x / c, y / c**2, (np.sqrt(1 + c * c) / c**2) * u, 1.0 / c**2


def inverse_prediction_form(xt, yt, ut, c: float):
    """Inverse of :func:`transform_to_prediction_form`."""
    return c * np.asarray(xt), c**2 * np.asarray(yt), (c**2 / np.sqrt(1 + c * c)) * np.asarray(ut)
