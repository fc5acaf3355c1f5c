"""General multivariate skew-normal class: density, exact sampling, and the
constrained standard-Gaussian Gibbs sampler it relies on.

The distribution SN(xi, Sigma, W) is the law of (U1 + xi | U0 > -W xi) where
(U0, U1) is jointly Gaussian with Cov(U0) = Gamma = I_m + W Sigma W',
Cov(U1) = Sigma and Cov(U1, U0) = Sigma W'. Sampling follows the exact
composition: draw the constrained Gaussian part, then the conditional
Gaussian remainder.
"""

from __future__ import annotations

import numpy as np
from scipy.special import log_ndtr, ndtr

from . import accel
from .errors import InputError
from .kernel_gp import chol_with_jitter


class ConstraintRegion:
    """Feasible region {u : A u > -gamma_vec} with A lower triangular,
    positive diagonal (from the Cholesky factor of Gamma)."""

    def __init__(self, a_lower, gamma_vec):
        a = np.asarray(a_lower, dtype=np.float64)
        g = np.asarray(gamma_vec, dtype=np.float64).ravel()
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] != g.size:
            raise InputError("a_lower must be square and match gamma_vec")
        if not np.all(np.diag(a) > 0):
            raise InputError("a_lower must have strictly positive diagonal")
        if np.any(np.triu(a, 1) != 0):
            raise InputError("a_lower must be lower triangular")
        self.a_lower = np.ascontiguousarray(a)
        self.gamma_vec = np.ascontiguousarray(g)

    @property
    def m(self) -> int:
        return self.gamma_vec.size


class SkewNormalSpec:
    """Parameters (xi, Sigma, W) plus derived (Gamma, Delta', gamma_vec)."""

    def __init__(self, xi, sigma, w):
        xi = np.asarray(xi, dtype=np.float64).ravel()
        sigma = np.asarray(sigma, dtype=np.float64)
        w = np.asarray(w, dtype=np.float64)
        if w.ndim != 2 or w.shape[1] != xi.size or sigma.shape != (xi.size, xi.size):
            raise InputError("inconsistent shapes for (xi, sigma, w)")
        gamma_mat = np.eye(w.shape[0]) + w @ sigma @ w.T
        delta_t = w @ sigma
        self._init_from(xi, sigma, w, gamma_mat, delta_t)

    @classmethod
    def from_blocks(cls, xi_blocks, cov_blocks, signed_design):
        """Efficient constructor for the samplers' stacked-process layout.

        xi_blocks[p] and cov_blocks[p] give the Gaussian law of process p at
        the K points; signed_design is (K, P) with row k holding
        sign_k * W_p(s_k). The implied W matrix is (K, P*K) made of diagonal
        blocks, so Gamma and Delta' reduce to per-process products.
        """
        P = len(cov_blocks)
        K = signed_design.shape[0]
        xi = np.concatenate(xi_blocks)
        gamma_mat = np.eye(K)
        delta_parts = []
        for p in range(P):
            dp = signed_design[:, p]
            gamma_mat += dp[:, None] * cov_blocks[p] * dp[None, :]
            delta_parts.append(dp[:, None] * cov_blocks[p])
        delta_t = np.concatenate(delta_parts, axis=1)        # (K, P*K)
        sigma = np.zeros((P * K, P * K))
        for p in range(P):
            sigma[p * K:(p + 1) * K, p * K:(p + 1) * K] = cov_blocks[p]
        w = np.zeros((K, P * K))
        for p in range(P):
            w[:, p * K:(p + 1) * K] = np.diag(signed_design[:, p])
        obj = cls.__new__(cls)
        obj._init_from(xi, sigma, w, gamma_mat, delta_t)
        return obj

    def _init_from(self, xi, sigma, w, gamma_mat, delta_t):
        self.xi = xi
        self.sigma = sigma
        self.w = w
        self.gamma_mat = gamma_mat
        self.delta_t = delta_t
        self.gamma_vec = w @ xi
        try:
            self.a_lower = np.linalg.cholesky(gamma_mat)
        except np.linalg.LinAlgError as exc:  # cannot happen for real W, SPD Sigma
            raise InputError("Gamma = I + W Sigma W' is not positive definite") from exc

    @property
    def d(self) -> int:
        return self.xi.size

    @property
    def m(self) -> int:
        return self.w.shape[0]

    def region(self) -> ConstraintRegion:
        return ConstraintRegion(self.a_lower, self.gamma_vec)


def orthant_prob_mc(gamma_vec, gamma_mat, n_samples=100_000, rng=None) -> float:
    """Plain Monte Carlo estimate of P(N(0, Gamma) < gamma_vec), used only by
    the density (the sampler never needs it)."""
    g = np.asarray(gamma_vec, dtype=np.float64).ravel()
    m = g.size
    if m == 0:
        return 1.0
    if m == 1:
        return float(ndtr(g[0] / np.sqrt(gamma_mat[0, 0])))
    if np.all(gamma_mat == np.diag(np.diag(gamma_mat))):
        # independent coordinates: the orthant probability factorizes
        return float(np.prod(ndtr(g / np.sqrt(np.diag(gamma_mat)))))
    rng = np.random.default_rng(0) if rng is None else rng
    a = np.linalg.cholesky(gamma_mat)
    z = rng.standard_normal((n_samples, m))
    return float(np.mean(np.all(z @ a.T < g, axis=1)))


def sn_log_density(spec: SkewNormalSpec, z, n_orthant=100_000, rng=None):
    """Log density of SN(xi, Sigma, W) at z (vectorised over rows of z).

    The m-variate orthant factor with identity covariance splits into
    univariate Phi terms; the normalizer Phi_m(gamma; Gamma) is estimated by
    Monte Carlo (exact for m <= 1).
    """
    z = np.asarray(z, dtype=np.float64)
    single = z.ndim == 1
    zz = z[None, :] if single else z
    if not np.all(np.isfinite(zz)):
        raise InputError("z must be finite")
    if zz.shape[1] != spec.d:
        raise InputError(f"z has dimension {zz.shape[1]}, expected {spec.d}")
    lower, _ = chol_with_jitter(spec.sigma)
    dev = np.linalg.solve(lower, (zz - spec.xi).T)
    logdet = 2.0 * np.sum(np.log(np.diag(lower)))
    log_phi = -0.5 * (spec.d * np.log(2 * np.pi) + logdet + np.sum(dev * dev, axis=0))
    log_skew = np.sum(log_ndtr(zz @ spec.w.T), axis=1)
    log_norm = np.log(orthant_prob_mc(spec.gamma_vec, spec.gamma_mat, n_orthant, rng))
    out = log_phi + log_skew - log_norm
    return float(out[0]) if single else out


def sample_constrained_gaussian(region: ConstraintRegion, sweeps, rng,
                                initial=None) -> np.ndarray:
    """Draw u* from N(0, I_m) restricted to {A u > -gamma} by coordinate Gibbs.

    Starts from a recursively built interior point (or ``initial``) and runs
    ``sweeps`` full sweeps. The recommended default is m sweeps; being a
    Markov scheme from a deterministic start, a finite number of sweeps
    carries some start-up bias, which decays geometrically in ``sweeps``.
    """
    if sweeps < 1:
        raise InputError("sweeps must be >= 1")
    if initial is None:
        u = accel.feasible_start(region.a_lower, region.gamma_vec)
    else:
        u = np.array(initial, dtype=np.float64)
    return accel.constrained_gibbs_sweeps(
        rng, region.a_lower, region.gamma_vec, u, int(sweeps)
    )


def latent_given_value(spec: SkewNormalSpec, z, rng) -> np.ndarray:
    """Exact draw of the latent constrained Gaussian U0 given a current value.

    Conditional on U1 = z - xi, the components of U0 are independent
    N((W(z - xi))_i, 1) truncated below at -gamma_i, so the draw is m
    univariate truncated normals.
    """
    shift = spec.w @ (np.asarray(z, dtype=np.float64) - spec.xi)
    u0 = np.empty(spec.m)
    for i in range(spec.m):
        lo = -spec.gamma_vec[i] - shift[i]
        u0[i] = shift[i] + accel.trunc_std_normal(rng, lo, np.inf)
    return u0


def sample_skew_normal(spec: SkewNormalSpec, rng, sweeps=None,
                       initial=None) -> np.ndarray:
    """One draw from SN(xi, Sigma, W).

    Two ways to obtain the constrained Gaussian part:

    - cold (``initial is None``): run the coordinate Gibbs sampler from a
      feasible start for ``sweeps`` sweeps (default m). Good for standalone
      draws; increase ``sweeps`` when high distributional accuracy matters.
    - warm (``initial`` = a current value of the target variable): draw
      U0 | (U1 = initial - xi) exactly. Used inside the MCMC, where it makes
      the block update leave the skew-normal law exactly invariant with no
      tuning parameter.

    Either way the value is completed with the conditional Gaussian
    N(Delta Gamma^-1 u, Sigma - Delta Gamma^-1 Delta') shifted by xi.
    """
    m, d = spec.m, spec.d
    if m == 0:
        lower, _ = chol_with_jitter(spec.sigma)
        return spec.xi + lower @ rng.standard_normal(d)
    if initial is None:
        n_sweeps = m if sweeps is None else int(sweeps)
        ustar = sample_constrained_gaussian(spec.region(), max(n_sweeps, 1), rng)
        u = spec.a_lower @ ustar
    else:
        u = latent_given_value(spec, initial, rng)
    # Gamma^-1 u and Gamma^-1 Delta' through the Cholesky factor A
    b = np.linalg.solve(spec.a_lower, np.column_stack([u, spec.delta_t]))
    gi = np.linalg.solve(spec.a_lower.T, b)
    mean = spec.delta_t.T @ gi[:, 0]
    cond_cov = spec.sigma - spec.delta_t.T @ gi[:, 1:]
    cond_cov = 0.5 * (cond_cov + cond_cov.T)
    lower, _ = chol_with_jitter(cond_cov, float(np.mean(np.diag(spec.sigma))))
    return spec.xi + mean + lower @ rng.standard_normal(d)
