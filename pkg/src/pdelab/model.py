"""Sampling model: spherically symmetric location-scale triples.

The observable triple (X, U, Y), with X, Y of dimension ``d`` and the
residual vector U of dimension ``k``, has joint density

    eta^(d + k/2) * f( eta * (|x - theta|^2 + |u|^2 + |y - c*theta|^2) )

where ``f`` is a spherically symmetric density kernel on R^(2d+k),
``theta`` the unknown location, ``eta^(-1/2)`` the unknown scale, and
``c > 0`` a known multiplier. Supported kernels: normal, Student (an
inverse-gamma scale mixture of normals), discrete scale mixtures, and
tabulated radial functions.

All samplers draw at eta = 1 and rescale; eta enters only as a scale.
"""

from __future__ import annotations

import abc
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, interpolate, special

from .rng import RngStream, as_generator

_LOG_2PI = np.log(2.0 * np.pi)


def log_unit_sphere_area(p: int) -> float:
    """log surface area of the unit sphere in R^p."""
    return np.log(2.0) + (p / 2.0) * np.log(np.pi) - special.gammaln(p / 2.0)


# ----------------------------------------------------------------------
# Radial families
# ----------------------------------------------------------------------

class RadialFamily(abc.ABC):
    """A spherically symmetric density kernel, normalized per dimension.

    ``log_radial(t, p)`` returns log f_p(t) where f_p(|v|^2) integrates
    to one over v in R^p. Scale mixtures expose the mixing law of the
    latent variance Z (``Z = 1`` identically for the normal kernel).
    """

    name = "radial"

    @abc.abstractmethod
    def log_radial(self, t, p: int):
        """log f_p(t) for squared radius t >= 0 (scalar or array)."""

    @property
    def has_mixing(self) -> bool:
        return False

    def sample_mixing(self, n: int, gen: np.random.Generator) -> np.ndarray:
        raise TypeError(f"{self.name} kernel has no scale-mixture representation")

    def mixing_mean(self) -> float:
        """E[Z]; equals the survival-mass constant gamma = E|V|^2 / p."""
        raise TypeError(f"{self.name} kernel has no scale-mixture representation")

    def log_survival(self, t, p: int):
        """log F_p(t) with F_p(t) = (1/2) * int_t^inf f_p(s) ds."""
        raise NotImplementedError

    def sample_survival(self, n: int, p: int, gen: np.random.Generator) -> np.ndarray:
        """Draw v in R^p from the normalized survival kernel F_p / gamma."""
        raise NotImplementedError

    def params(self) -> dict:
        return {}

    def __repr__(self):
        inner = ", ".join(f"{k}={v}" for k, v in self.params().items())
        return f"{type(self).__name__}({inner})"


class NormalRadial(RadialFamily):
    """Standard normal kernel, f_p(t) = (2 pi)^(-p/2) exp(-t/2)."""

    name = "normal"

    def log_radial(self, t, p):
        return -0.5 * p * _LOG_2PI - 0.5 * np.asarray(t, dtype=float)

    @property
    def has_mixing(self):
        return True

    def sample_mixing(self, n, gen):
        return np.ones(n)

    def mixing_mean(self):
        return 1.0

    def log_survival(self, t, p):
        # (1/2) int_t^inf exp(-s/2) ds = exp(-t/2): F_p coincides with f_p.
        return self.log_radial(t, p)

    def sample_survival(self, n, p, gen):
        return gen.standard_normal((n, p))


class StudentMixtureRadial(RadialFamily):
    """Student kernel: inverse-gamma(df/2, df/2) scale mixture of normals.

    The marginal of a p-vector with this kernel is the standard p-variate
    Student distribution with ``df`` degrees of freedom.
    """

    name = "student"

    def __init__(self, df: float):
        if not df > 0:
            raise ValueError(f"df must be positive, got {df}")
        self.df = float(df)

    def params(self):
        return {"df": self.df}

    def log_radial(self, t, p):
        nu = self.df
        t = np.asarray(t, dtype=float)
        return (
            special.gammaln((p + nu) / 2.0)
            - special.gammaln(nu / 2.0)
            - 0.5 * p * np.log(np.pi * nu)
            - 0.5 * (p + nu) * np.log1p(t / nu)
        )

    @property
    def has_mixing(self):
        return True

    def sample_mixing(self, n, gen):
        # Z ~ inverse-gamma(df/2, df/2): Z = (df/2) / Gamma(df/2, 1)
        return (self.df / 2.0) / gen.standard_gamma(self.df / 2.0, n)

    def mixing_mean(self):
        if self.df <= 2:
            raise ValueError(f"E[Z] diverges for df <= 2 (df={self.df})")
        return self.df / (self.df - 2.0)

    def log_survival(self, t, p):
        # (1/2) int_t^inf (1 + s/nu)^(-q) ds = (nu / (2(q-1))) (1 + t/nu)^(1-q)
        nu = self.df
        q = 0.5 * (p + nu)
        t = np.asarray(t, dtype=float)
        const = (
            special.gammaln((p + nu) / 2.0)
            - special.gammaln(nu / 2.0)
            - 0.5 * p * np.log(np.pi * nu)
            + np.log(nu)
            - np.log(2.0 * (q - 1.0))
        )
        return const - (q - 1.0) * np.log1p(t / nu)

    def sample_survival(self, n, p, gen):
        # Tilting the mixing law by z gives inverse-gamma(df/2 - 1, df/2).
        if self.df <= 2:
            raise ValueError(f"survival kernel not normalizable for df <= 2 (df={self.df})")
        z = (self.df / 2.0) / gen.standard_gamma(self.df / 2.0 - 1.0, n)
        return gen.standard_normal((n, p)) * np.sqrt(z)[:, None]


class DiscreteMixtureRadial(RadialFamily):
    """Finite scale mixture of normals with atoms (z_i, w_i)."""

    name = "discrete"

    def __init__(self, atoms):
        atoms = [(float(z), float(w)) for z, w in atoms]
        if not atoms:
            raise ValueError("at least one atom required")
        if any(z <= 0 or w <= 0 for z, w in atoms):
            raise ValueError("atom scales and weights must be positive")
        total = sum(w for _, w in atoms)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"atom weights must sum to 1 (got {total})")
        self.scales = np.array([z for z, _ in atoms])
        self.weights = np.array([w for _, w in atoms])

    def params(self):
        return {"atoms": list(zip(self.scales.tolist(), self.weights.tolist()))}

    def log_radial(self, t, p):
        t = np.asarray(t, dtype=float)
        # logsumexp over atoms of w_i * (2 pi z_i)^(-p/2) exp(-t / (2 z_i))
        terms = (
            np.log(self.weights)
            - 0.5 * p * (_LOG_2PI + np.log(self.scales))
            - 0.5 * t[..., None] / self.scales
        )
        return special.logsumexp(terms, axis=-1)

    @property
    def has_mixing(self):
        return True

    def sample_mixing(self, n, gen):
        idx = gen.choice(len(self.scales), size=n, p=self.weights)
        return self.scales[idx]

    def mixing_mean(self):
        return float(np.dot(self.weights, self.scales))

    def log_survival(self, t, p):
        t = np.asarray(t, dtype=float)
        terms = (
            np.log(self.weights)
            + np.log(self.scales)
            - 0.5 * p * (_LOG_2PI + np.log(self.scales))
            - 0.5 * t[..., None] / self.scales
        )
        return special.logsumexp(terms, axis=-1)

    def sample_survival(self, n, p, gen):
        tilted = self.weights * self.scales
        tilted = tilted / tilted.sum()
        idx = gen.choice(len(self.scales), size=n, p=tilted)
        return gen.standard_normal((n, p)) * np.sqrt(self.scales[idx])[:, None]


class NumericRadial(RadialFamily):
    """User-supplied radial function f(t) >= 0, normalized numerically.

    The normalizing constant and the inverse-CDF sampling table are built
    per dimension p on first use: 4096-point log-spaced radius grids with
    monotone cubic (PCHIP) interpolation. Rejects functions whose radial
    integral int r^(p-1) f(r^2) dr fails to converge.
    """

    name = "numeric"
    GRID_SIZE = 4096

    def __init__(self, f, r_max: float = 1e6):
        self.f = f
        self.r_max = float(r_max)
        self._cache = {}

    def params(self):
        return {"f": getattr(self.f, "__name__", "f")}

    def _tables(self, p):
        if p in self._cache:
            return self._cache[p]
        f = self.f

        def radial_integrand(r):
            return r ** (p - 1) * f(r * r)

        total, err = integrate.quad(
            radial_integrand, 0.0, np.inf, epsrel=1e-10, epsabs=0.0, limit=400
        )
        if not np.isfinite(total) or total <= 0 or err > 1e-6 * total:
            raise ValueError(
                "numeric radial function is not integrable against r^(p-1) "
                f"for p={p} (integral={total!r}, err={err!r})"
            )
        log_norm = -(log_unit_sphere_area(p) + np.log(total))

        # Bracket the radius support, then build the inverse-CDF table.
        probe = np.logspace(-8, np.log10(self.r_max), 2048)
        dens = radial_integrand(probe)
        mass = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(probe))])
        mass /= mass[-1]
        lo = probe[max(int(np.searchsorted(mass, 1e-14)) - 1, 0)]
        hi = probe[min(int(np.searchsorted(mass, 1.0 - 1e-13)) + 1, len(probe) - 1)]
        grid = np.logspace(np.log10(lo), np.log10(hi), self.GRID_SIZE)
        dens = radial_integrand(grid)
        cdf = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(grid))])
        cdf /= cdf[-1]
        keep = np.concatenate([[True], np.diff(cdf) > 0])
        inverse = interpolate.PchipInterpolator(cdf[keep], grid[keep], extrapolate=False)
        self._cache[p] = (log_norm, inverse)
        return self._cache[p]

    def log_radial(self, t, p):
        log_norm, _ = self._tables(p)
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore"):
            return log_norm + np.log(self.f(t))

    def sample_radius(self, n, p, gen):
        _, inverse = self._tables(p)
        u = gen.uniform(1e-12, 1.0 - 1e-12, size=n)
        return np.asarray(inverse(u))


def radial_from_name(kind: str, **kwargs) -> RadialFamily:
    kind = kind.lower()
    if kind == "normal":
        return NormalRadial()
    if kind == "student":
        return StudentMixtureRadial(kwargs["df"])
    if kind == "discrete":
        return DiscreteMixtureRadial(kwargs["atoms"])
    raise ValueError(f"unknown radial kind {kind!r}")


# ----------------------------------------------------------------------
# Model specification and samples
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class ModelSpec:
    """Full description of the sampling model.

    Parameters
    ----------
    d : int
        Dimension of X, Y, and theta (>= 1).
    k : int
        Dimension of the residual vector U (>= 1).
    c : float
        Known positive multiplier of theta in the Y-location.
    theta : array_like, shape (d,)
        Location parameter.
    eta : float
        Inverse squared scale (> 0).
    radial : RadialFamily
        Spherically symmetric density kernel.
    """

    d: int
    k: int
    c: float
    theta: np.ndarray
    eta: float
    radial: RadialFamily = field(default_factory=NormalRadial)

    def __post_init__(self):
        if int(self.d) < 1 or int(self.k) < 1:
            raise ValueError(f"d and k must be >= 1, got d={self.d}, k={self.k}")
        if not self.c > 0:
            raise ValueError(f"c must be positive, got {self.c}")
        if not self.eta > 0:
            raise ValueError(f"eta must be positive, got {self.eta}")
        theta = np.atleast_1d(np.asarray(self.theta, dtype=float))
        if theta.shape != (self.d,):
            raise ValueError(f"theta must have exactly d={self.d} coordinates, got shape {theta.shape}")
        if not np.all(np.isfinite(theta)):
            raise ValueError("theta must be finite")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "k", int(self.k))
        object.__setattr__(self, "c", float(self.c))
        object.__setattr__(self, "eta", float(self.eta))

    @property
    def p(self) -> int:
        """Total dimension 2d + k of the observable vector."""
        return 2 * self.d + self.k

    def with_theta_norm(self, norm: float, direction: int = 0) -> "ModelSpec":
        theta = np.zeros(self.d)
        theta[direction] = norm
        return ModelSpec(self.d, self.k, self.c, theta, self.eta, self.radial)

    def with_radial(self, radial: RadialFamily) -> "ModelSpec":
        return ModelSpec(self.d, self.k, self.c, self.theta, self.eta, radial)


@dataclass
class Triples:
    """A batch of samples, rows aligned across x (n,d), u (n,k), y (n,d)."""

    x: np.ndarray
    u: np.ndarray
    y: np.ndarray

    def __len__(self):
        return self.x.shape[0]

    def __getitem__(self, idx):
        return Triples(np.atleast_2d(self.x[idx]), np.atleast_2d(self.u[idx]), np.atleast_2d(self.y[idx]))


def sample_triples(spec: ModelSpec, n: int, rng) -> Triples:
    """Draw n i.i.d. triples from the model.

    Mixture kernels draw the latent scale Z and then conditionally normal
    coordinates with variance Z/eta. Numeric kernels draw a uniform
    direction on the unit sphere in R^(2d+k) and a radius by inverse CDF.
    The standard normals are always drawn first, so mixture families with
    a common (seed, stream) share them (common random numbers).

    Parameters
    ----------
    spec : ModelSpec
    n : int
        Number of replicates (>= 1).
    rng : RngStream or numpy Generator
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    gen = as_generator(rng)
    p = spec.p
    z = gen.standard_normal((n, p))
    radial = spec.radial
    if isinstance(radial, NumericRadial):
        norms = np.sqrt(np.einsum("ij,ij->i", z, z))
        radius = radial.sample_radius(n, p, gen)
        centered = z * (radius / norms)[:, None]
    elif radial.has_mixing:
        mix = radial.sample_mixing(n, gen)
        centered = z if isinstance(radial, NormalRadial) else z * np.sqrt(mix)[:, None]
    else:  # pragma: no cover - all concrete families hit a branch above
        raise TypeError(f"cannot sample from radial family {radial.name!r}")
    centered = centered / np.sqrt(spec.eta)
    d, k = spec.d, spec.k
    return Triples(
        x=spec.theta + centered[:, :d],
        u=centered[:, d : d + k],
        y=spec.c * spec.theta + centered[:, d + k :],
    )


def sample_mixing(spec: ModelSpec, n: int, rng) -> np.ndarray:
    """Draw n i.i.d. values of the latent mixing scale Z.

    The normal kernel is treated as the point mass Z = 1. Numeric radial
    kernels carry no mixture representation and are rejected.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not spec.radial.has_mixing:
        raise TypeError(f"radial family {spec.radial.name!r} has no mixing representation")
    return spec.radial.sample_mixing(n, as_generator(rng))


def joint_logpdf(spec: ModelSpec, x, u, y):
    """Log of the fully normalized joint density of (X, U, Y).

    Accepts single vectors or row-aligned batches.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    u = np.atleast_2d(np.asarray(u, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    dx = x - spec.theta
    dy = y - spec.c * spec.theta
    s = (
        np.einsum("ij,ij->i", dx, dx)
        + np.einsum("ij,ij->i", u, u)
        + np.einsum("ij,ij->i", dy, dy)
    )
    out = 0.5 * spec.p * np.log(spec.eta) + spec.radial.log_radial(spec.eta * s, spec.p)
    return out if out.shape != (1,) else float(out[0])


def joint_density(spec: ModelSpec, x, u, y):
    """Normalized joint density; see :func:`joint_logpdf`."""
    return np.exp(joint_logpdf(spec, x, u, y))


def log_eta_moment(radial: RadialFamily, s: float, power: float, dim: int) -> float:
    """log of int_0^inf eta^power f_dim(eta * s) d eta.

    Integrates in log coordinates (eta = e^v) after centering at the
    integrand's peak, so the result stays accurate for any scale of s.
    """
    if s <= 0:
        raise ValueError(f"s must be positive, got {s}")

    def g(v):
        e = np.exp(v)
        return (power + 1.0) * v + radial.log_radial(e * s, dim)

    # normal-kernel peak e* = 2 (power+1)/s as the search center
    vc = np.log(2.0 * max(power + 1.0, 0.5) / s)
    scan = vc + np.linspace(-40.0, 40.0, 321)
    vals = np.array([g(v) for v in scan])
    vmax = scan[int(np.argmax(vals))]
    gmax = float(g(vmax))
    val, err = integrate.quad(
        lambda v: np.exp(g(v) - gmax), vmax - 50.0, vmax + 50.0, epsrel=1e-11,
        limit=400, points=[vmax],
    )
    if not np.isfinite(val) or val <= 0 or err > 1e-7 * val:
        raise RuntimeError(
            f"scale-moment quadrature failed (s={s!r}, power={power!r}): value={val!r}, err={err!r}"
        )
    return gmax + float(np.log(val))


def marginal_xu_logpdf(spec: ModelSpec, x, u):
    """Log marginal density of (X, U), with Y integrated out.

    For the normal kernel and scale mixtures the marginal keeps the same
    mixing law in dimension d + k. Numeric kernels integrate the radial
    function over the Y block by quadrature.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    u = np.atleast_2d(np.asarray(u, dtype=float))
    dx = x - spec.theta
    s = np.einsum("ij,ij->i", dx, dx) + np.einsum("ij,ij->i", u, u)
    pk = spec.d + spec.k
    radial = spec.radial
    if radial.has_mixing:
        out = 0.5 * pk * np.log(spec.eta) + radial.log_radial(spec.eta * s, pk)
    else:
        d = spec.d
        log_area = log_unit_sphere_area(d)
        vals = np.empty(s.shape)
        for i, si in enumerate(spec.eta * s):
            integrand = lambda r: r ** (d - 1) * np.exp(radial.log_radial(si + r * r, spec.p))
            val, _ = integrate.quad(integrand, 0.0, np.inf, epsrel=1e-9, limit=300)
            vals[i] = np.log(val) + log_area
        out = 0.5 * pk * np.log(spec.eta) + vals
    return out if out.shape != (1,) else float(out[0])
