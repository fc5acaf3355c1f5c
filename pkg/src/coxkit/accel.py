"""Numerical hot kernels with optional numba acceleration.

Every function here is written once in scalar/loop style that numba can
compile. When the backend is enabled (the default if numba imports), the
functions are wrapped with ``@njit``; otherwise the same source runs as plain
Python, and the pairwise-kernel builders switch to vectorised numpy
implementations so the fallback stays usable on realistic sizes.

Backend selection is controlled by the ``COXKIT_NUMBA`` environment variable:
``auto`` (default) uses numba when importable, ``0``/``off``/``false`` forces
the pure-numpy path, ``1``/``on``/``true`` requires numba and raises if it is
missing. The flag is read once at import time.
"""

from __future__ import annotations

import math
import os

import numpy as np

_FLAG = os.environ.get("COXKIT_NUMBA", "auto").strip().lower()

if _FLAG in ("0", "off", "false", "no"):
    NUMBA_ENABLED = False
elif _FLAG in ("1", "on", "true", "yes"):
    import numba  # noqa: F401  (raises if unavailable, as requested)

    NUMBA_ENABLED = True
else:
    try:
        import numba  # noqa: F401

        NUMBA_ENABLED = True
    except ImportError:  # pragma: no cover - exercised only without numba
        NUMBA_ENABLED = False

BACKEND = "numba" if NUMBA_ENABLED else "numpy"


def maybe_jit(fn):
    """Apply ``numba.njit(cache=True)`` when the backend is enabled."""
    if NUMBA_ENABLED:
        import numba

        return numba.njit(cache=True)(fn)
    return fn


# ---------------------------------------------------------------------------
# scalar normal CDF / inverse CDF
# ---------------------------------------------------------------------------

_SQRT2 = math.sqrt(2.0)
_SQRT_2PI = math.sqrt(2.0 * math.pi)


@maybe_jit
def norm_cdf(x):
    """Standard normal CDF, accurate in both tails (erfc based)."""
    return 0.5 * math.erfc(-x / _SQRT2)


@maybe_jit
def norm_ppf(p):
    """Standard normal inverse CDF.

    Acklam's rational approximation polished with two Halley steps against the
    erfc-based CDF; agreement with scipy.special.ndtri is at machine precision
    over the full double range (verified in tests).
    """
    if p <= 0.0:
        return -np.inf
    if p >= 1.0:
        return np.inf
    p_low = 0.02425
    if p < p_low:
        q = math.sqrt(-2.0 * math.log(p))
        x = (
            ((((-7.784894002430293e-03 * q - 3.223964580411365e-01) * q
               - 2.400758277161838e+00) * q - 2.549732539343734e+00) * q
             + 4.374664141464968e+00) * q + 2.938163982698783e+00
        ) / (
            (((7.784695709041462e-03 * q + 3.224671290700398e-01) * q
              + 2.445134137142996e+00) * q + 3.754408661907416e+00) * q + 1.0
        )
    elif p <= 1.0 - p_low:
        q = p - 0.5
        r = q * q
        x = (
            (((((-3.969683028665376e+01 * r + 2.209460984245205e+02) * r
                - 2.759285104469687e+02) * r + 1.383577518672690e+02) * r
              - 3.066479806614716e+01) * r + 2.506628277459239e+00) * q
        ) / (
            ((((-5.447609879822406e+01 * r + 1.615858368580409e+02) * r
               - 1.556989798598866e+02) * r + 6.680131188771972e+01) * r
             - 1.328068155288572e+01) * r + 1.0
        )
    else:
        q = math.sqrt(-2.0 * math.log(1.0 - p))
        x = -(
            ((((-7.784894002430293e-03 * q - 3.223964580411365e-01) * q
               - 2.400758277161838e+00) * q - 2.549732539343734e+00) * q
             + 4.374664141464968e+00) * q + 2.938163982698783e+00
        ) / (
            (((7.784695709041462e-03 * q + 3.224671290700398e-01) * q
              + 2.445134137142996e+00) * q + 3.754408661907416e+00) * q + 1.0
        )
    # Halley refinement against the erfc-based CDF. For p >= 1/2 refine on the
    # complementary CDF with q = 1 - p (exact by Sterbenz) to avoid
    # cancellation near 1. Skipped where phi(x) underflows (|x| > 38.6).
    for _ in range(2):
        phi_x = math.exp(-0.5 * x * x) / _SQRT_2PI
        if phi_x <= 0.0:
            break
        if p < 0.5:
            u = (0.5 * math.erfc(-x / _SQRT2) - p) / phi_x
            x = x - u / (1.0 + 0.5 * x * u)
        else:
            u = (0.5 * math.erfc(x / _SQRT2) - (1.0 - p)) / phi_x
            x = x + u / (1.0 - 0.5 * x * u)
    return x


# ---------------------------------------------------------------------------
# truncated standard normal draws
# ---------------------------------------------------------------------------

_TAIL = 6.0
_LOOP_CAP = 10_000_000


@maybe_jit
def trunc_std_normal(rng, lo, hi):
    """One draw from N(0,1) truncated to (lo, hi).

    Inverse-CDF in the central regime; one-sided exponential-proposal
    rejection (uniform proposal for narrow intervals) once the whole interval
    sits beyond 6 standard deviations, which avoids CDF-difference underflow.
    """
    if lo > hi:
        if lo - hi > 1e-9:
            raise RuntimeError("truncated normal interval is empty")
        return 0.5 * (lo + hi)
    if lo > _TAIL:
        return _tail_draw(rng, lo, hi)
    if hi < -_TAIL:
        return -_tail_draw(rng, -hi, -lo)
    plo = norm_cdf(lo) if lo > -np.inf else 0.0
    phi = norm_cdf(hi) if hi < np.inf else 1.0
    if phi <= plo:
        return 0.5 * (max(lo, -_TAIL) + min(hi, _TAIL))
    u = plo + rng.random() * (phi - plo)
    x = norm_ppf(u)
    if x < lo:
        x = lo
    elif x > hi:
        x = hi
    return x


@maybe_jit
def _tail_draw(rng, lo, hi):
    """Right-tail draw, lo > 0 (hi possibly inf)."""
    alpha = 0.5 * (lo + math.sqrt(lo * lo + 4.0))
    if hi < np.inf and (hi - lo) * alpha < 1.0:
        # narrow interval: uniform proposal dominated at lo
        for _ in range(_LOOP_CAP):
            x = lo + (hi - lo) * rng.random()
            if rng.random() <= math.exp(0.5 * (lo * lo - x * x)):
                return x
        raise RuntimeError("truncated normal tail sampling stalled")
    for _ in range(_LOOP_CAP):
        x = lo + rng.standard_exponential() / alpha
        if x <= hi and rng.random() <= math.exp(-0.5 * (x - alpha) * (x - alpha)):
            return x
    raise RuntimeError("truncated normal tail sampling stalled")


# ---------------------------------------------------------------------------
# constrained standard Gaussian Gibbs sweeps  (feasible region A u > -g)
# ---------------------------------------------------------------------------


@maybe_jit
def feasible_start(a_lower, gamma_vec):
    """Point strictly inside {u : A u > -gamma}, built coordinate-by-coordinate.

    Row i is the only active constraint on u_i while u_{i+1:} are still free
    (A is lower triangular with positive diagonal), so each coordinate only
    needs to clear its own row's lower bound.
    """
    m = gamma_vec.shape[0]
    u = np.zeros(m)
    for i in range(m):
        acc = -gamma_vec[i]
        for l in range(i):
            acc -= a_lower[i, l] * u[l]
        lo = acc / a_lower[i, i]
        u[i] = lo + 0.1 * (1.0 + abs(lo))
    return u


@maybe_jit
def constrained_gibbs_sweeps(rng, a_lower, gamma_vec, u, n_sweeps):
    """In-place single-coordinate Gibbs sweeps for N(0, I) restricted to A u > -g.

    Coordinate i appears in rows j >= i only; row j contributes a lower bound
    when A[j,i] > 0 and an upper bound when A[j,i] < 0. Residuals
    r_j = A[j,:] u + g_j are maintained incrementally so one sweep costs
    O(m^2).
    """
    m = gamma_vec.shape[0]
    r = np.empty(m)
    for j in range(m):
        acc = gamma_vec[j]
        for l in range(j + 1):
            acc += a_lower[j, l] * u[l]
        r[j] = acc
    for _ in range(n_sweeps):
        for i in range(m):
            lo = -np.inf
            hi = np.inf
            for j in range(i, m):
                aji = a_lower[j, i]
                if aji != 0.0:
                    c = r[j] - aji * u[i]  # residual without i's contribution
                    b = -c / aji
                    if aji > 0.0:
                        if b > lo:
                            lo = b
                    else:
                        if b < hi:
                            hi = b
            new = trunc_std_normal(rng, lo, hi)
            d = new - u[i]
            if d != 0.0:
                for j in range(i, m):
                    r[j] += a_lower[j, i] * d
                u[i] = new
    return u


# ---------------------------------------------------------------------------
# gamma-exponential kernel matrices
# ---------------------------------------------------------------------------


def _rank1_update_loop(a, vec, alpha):
    n = vec.shape[0]
    for i in range(n):
        avi = alpha * vec[i]
        for j in range(n):
            a[i, j] += avi * vec[j]


def _rank1_update_np(a, vec, alpha):
    a += alpha * np.outer(vec, vec)


def _kernel_sym_loop(x, sigma2, inv_2tau2, gamma):
    n, d = x.shape
    out = np.empty((n, n))
    for i in range(n):
        out[i, i] = sigma2
        for j in range(i + 1, n):
            acc = 0.0
            for l in range(d):
                dif = x[i, l] - x[j, l]
                acc += dif * dif
            v = sigma2 * np.exp(-(math.sqrt(acc) ** gamma) * inv_2tau2)
            out[i, j] = v
            out[j, i] = v
    return out


def _kernel_cross_loop(x, y, sigma2, inv_2tau2, gamma):
    n, d = x.shape
    m = y.shape[0]
    out = np.empty((n, m))
    for i in range(n):
        for j in range(m):
            acc = 0.0
            for l in range(d):
                dif = x[i, l] - y[j, l]
                acc += dif * dif
            out[i, j] = sigma2 * np.exp(-(math.sqrt(acc) ** gamma) * inv_2tau2)
    return out


def _kernel_sym_np(x, sigma2, inv_2tau2, gamma):
    diff = x[:, None, :] - x[None, :, :]
    r = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    out = sigma2 * np.exp(-(r ** gamma) * inv_2tau2)
    np.fill_diagonal(out, sigma2)
    return out


def _kernel_cross_np(x, y, sigma2, inv_2tau2, gamma):
    diff = x[:, None, :] - y[None, :, :]
    r = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    return sigma2 * np.exp(-(r ** gamma) * inv_2tau2)


if NUMBA_ENABLED:
    _kernel_sym = maybe_jit(_kernel_sym_loop)
    _kernel_cross = maybe_jit(_kernel_cross_loop)
    rank1_update = maybe_jit(_rank1_update_loop)
else:
    _kernel_sym = _kernel_sym_np
    _kernel_cross = _kernel_cross_np
    rank1_update = _rank1_update_np


def kernel_sym(x, sigma2, tau2, gamma):
    """n x n gamma-exponential kernel matrix over rows of ``x``."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    return _kernel_sym(x, sigma2, 0.5 / tau2, gamma)


def kernel_cross(x, y, sigma2, tau2, gamma):
    """n x m gamma-exponential kernel matrix between rows of ``x`` and ``y``."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    return _kernel_cross(x, y, sigma2, 0.5 / tau2, gamma)
