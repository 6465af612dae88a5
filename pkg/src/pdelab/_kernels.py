"""Hot numeric kernels, compiled with numba when available.

Two implementations exist for every kernel: a numba ``@njit`` version and
a pure-numpy fallback. The backend is fixed once at import time:

* ``PDELAB_KERNELS=numpy`` forces the fallback,
* ``PDELAB_KERNELS=numba`` forces compilation (ImportError if missing),
* unset: numba when importable, numpy otherwise.

Both backends compute the same quantities; floating-point summation
order differs, so cross-backend agreement is to rounding, not bitwise.
``benchmarks/bench_kernels.py`` times one against the other.
"""

import os

import numpy as np

_ENV_VAR = "PDELAB_KERNELS"
_NORM_FLOOR = 1e-300  # keeps |theta|^power finite at the (measure-zero) origin


def _select_backend():
    choice = os.environ.get(_ENV_VAR, "").strip().lower()
    if choice == "numpy":
        return "numpy"
    if choice == "numba":
        import numba  # noqa: F401  (raise if forced but unavailable)

        return "numba"
    if choice:
        raise ValueError(f"{_ENV_VAR} must be 'numpy' or 'numba', got {choice!r}")
    try:
        import numba  # noqa: F401

        return "numba"
    except ImportError:
        return "numpy"


BACKEND = _select_backend()


# ----------------------------------------------------------------------
# numpy implementations
# ----------------------------------------------------------------------

def _plugin_log_gain_numpy(r2_base, r2_alt, scale2, half_exp):
    """half_exp * (log(scale2 + r2_base) - log(scale2 + r2_alt)), elementwise."""
    return half_exp * (np.log(scale2 + r2_base) - np.log(scale2 + r2_alt))


def _student_norm_moment_numpy(z, v, center, scale, df, power):
    """Weight sums for matched-proposal importance sampling.

    Draw j of the proposal is ``theta_j = center + scale*sqrt(df/v_j)*z_j``
    with ``z_j`` standard normal rows and ``v_j`` chi-square(df) values.
    Returns (sum_j w_j, sum_j w_j^2) for w_j = |theta_j|^power.
    """
    t = scale * np.sqrt(df / v)
    th = center[None, :] + t[:, None] * z
    r = np.sqrt(np.einsum("ij,ij->i", th, th))
    w = np.maximum(r, _NORM_FLOOR) ** power
    return float(np.sum(w)), float(np.dot(w, w))


def _row_sq_norms_numpy(a):
    return np.einsum("ij,ij->i", a, a)


# ----------------------------------------------------------------------
# numba implementations
# ----------------------------------------------------------------------

if BACKEND == "numba":
    from numba import njit

    @njit(cache=True)
    def _plugin_log_gain_numba(r2_base, r2_alt, scale2, half_exp):
        n = r2_base.shape[0]
        out = np.empty(n)
        for i in range(n):
            out[i] = half_exp * (np.log(scale2[i] + r2_base[i]) - np.log(scale2[i] + r2_alt[i]))
        return out

    @njit(cache=True)
    def _student_norm_moment_numba(z, v, center, scale, df, power):
        n = v.shape[0]
        d = z.shape[1]
        acc = 0.0
        acc2 = 0.0
        for j in range(n):
            t = scale * np.sqrt(df / v[j])
            s = 0.0
            for i in range(d):
                x = center[i] + t * z[j, i]
                s += x * x
            r = np.sqrt(s)
            if r < _NORM_FLOOR:
                r = _NORM_FLOOR
            w = r**power
            acc += w
            acc2 += w * w
        return acc, acc2

    @njit(cache=True)
    def _row_sq_norms_numba(a):
        n, d = a.shape
        out = np.empty(n)
        for i in range(n):
            s = 0.0
            for j in range(d):
                s += a[i, j] * a[i, j]
            out[i] = s
        return out

    def plugin_log_gain(r2_base, r2_alt, scale2, half_exp):
        return _plugin_log_gain_numba(
            np.ascontiguousarray(r2_base, dtype=np.float64),
            np.ascontiguousarray(r2_alt, dtype=np.float64),
            np.ascontiguousarray(scale2, dtype=np.float64),
            float(half_exp),
        )

    def student_norm_moment(z, v, center, scale, df, power):
        return _student_norm_moment_numba(
            np.ascontiguousarray(z, dtype=np.float64),
            np.ascontiguousarray(v, dtype=np.float64),
            np.ascontiguousarray(center, dtype=np.float64),
            float(scale),
            float(df),
            float(power),
        )

    def row_sq_norms(a):
        return _row_sq_norms_numba(np.ascontiguousarray(a, dtype=np.float64))

else:
    plugin_log_gain = _plugin_log_gain_numpy
    student_norm_moment = _student_norm_moment_numpy
    row_sq_norms = _row_sq_norms_numpy


# Fallbacks are exported unconditionally so the benchmark can compare.
plugin_log_gain_numpy = _plugin_log_gain_numpy
student_norm_moment_numpy = _student_norm_moment_numpy
row_sq_norms_numpy = _row_sq_norms_numpy

plugin_log_gain.__doc__ = _plugin_log_gain_numpy.__doc__
student_norm_moment.__doc__ = _student_norm_moment_numpy.__doc__
