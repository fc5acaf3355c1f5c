"""Discrete-time dynamic Gaussian processes over continuous space.

Each univariate process evolves as beta_{t+1}(.) = alpha * beta_t(.) + w_t(.)
with an independent zero-mean GP disturbance per step (scalar transitions
keep the space-time covariance in closed form):

    Cov(beta_t(s), beta_t'(s')) = alpha^(t+t') k0(s, s')
                                  + alpha^|t-t'| g(min(t,t')) kw(s, s'),

with g(m) = sum_{i<m} alpha^(2i). Deterministic components (w == 0) drop the
second term; a seasonal harmonic multiplies one designated process in the
linear predictor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import accel
from .errors import InputError, UnsupportedConfigError
from .kernel_gp import GpHyper, SchurState, chol_with_jitter


@dataclass(frozen=True)
class Seasonal:
    period: int
    phase: float
    process: int = 1

    def __post_init__(self):
        if self.period < 2:
            raise InputError("seasonal period must be >= 2")

    def factor(self, t) -> float:
        return np.cos(2.0 * np.pi * np.asarray(t, dtype=np.float64) / self.period
                      + self.phase)


def seasonal_predictor(beta0, beta1, t, period, phi):
    """Linear predictor beta0 + beta1 * cos(2 pi t / period + phi)."""
    if period < 2:
        raise InputError("period must be >= 2")
    return beta0 + beta1 * np.cos(2.0 * np.pi * t / period + phi)


@dataclass(frozen=True)
class DgpSpec:
    """Joint specification of p+1 independent univariate dynamic GPs."""

    init_hyper: tuple            # GpHyper per process (law of beta_0)
    dist_hyper: tuple            # GpHyper or None per process (disturbance law)
    transition: tuple = None     # scalar alpha per process; default all 1.0
    seasonal: Seasonal | None = None

    def __post_init__(self):
        init = tuple(self.init_hyper)
        dist = tuple(self.dist_hyper)
        if len(init) != len(dist):
            raise InputError("init_hyper and dist_hyper must have equal length")
        trans = self.transition
        if trans is None:
            trans = tuple(1.0 for _ in init)
        else:
            trans = tuple(float(a) for a in trans)
            if len(trans) != len(init):
                raise InputError("transition length mismatch")
        for a in trans:
            if not np.isscalar(a) or not np.isfinite(a):
                raise UnsupportedConfigError("transitions must be finite scalars")
        for h in dist:
            if h is not None and h.mu != 0.0:
                raise InputError("disturbance GPs must have mean 0")
        if self.seasonal is not None and not (0 <= self.seasonal.process < len(init)):
            raise InputError("seasonal process index out of range")
        object.__setattr__(self, "init_hyper", init)
        object.__setattr__(self, "dist_hyper", dist)
        object.__setattr__(self, "transition", trans)

    @property
    def n_processes(self) -> int:
        return len(self.init_hyper)


def evolve(spec: DgpSpec, locations, values, rng) -> np.ndarray:
    """One time step: alpha * values + fresh zero-mean disturbance draw.

    ``values`` is (P, n) aligned to ``locations``; disturbances are drawn
    jointly (exactly) per stochastic process and independently across
    processes.
    """
    locs = np.asarray(locations, dtype=np.float64)
    if locs.ndim == 1:
        locs = locs[:, None]
    vals = np.asarray(values, dtype=np.float64)
    if vals.ndim == 1:
        vals = vals[None, :]
    if vals.shape != (spec.n_processes, locs.shape[0]):
        raise InputError(
            f"values shape {vals.shape} does not match "
            f"({spec.n_processes}, {locs.shape[0]})"
        )
    out = np.empty_like(vals)
    for p in range(spec.n_processes):
        out[p] = spec.transition[p] * vals[p]
        hw = spec.dist_hyper[p]
        if hw is not None:
            cov = accel.kernel_sym(locs, hw.sigma2, hw.tau2, hw.gamma)
            lower, _ = chol_with_jitter(cov, hw.sigma2)
            out[p] += lower @ rng.standard_normal(locs.shape[0])
    return out


class DgpProcessCov:
    """Space-time covariance model for one univariate dynamic GP.

    Points are rows [t, x1, ..., xd] with integer-valued times stored as
    floats. With a single time slice at t=0 this reduces bitwise to the
    spatial kernel of the initial law.
    """

    def __init__(self, h0: GpHyper, hw: GpHyper | None, alpha: float):
        self.h0 = h0
        self.hw = hw
        self.alpha = float(alpha)

    # -- time weight helpers -------------------------------------------------
    def _w_init(self, ta, tb):
        return np.power(self.alpha, ta[:, None] + tb[None, :])

    def _g(self, m):
        # sum_{i<m} alpha^(2i)
        if self.alpha == 1.0:
            return m
        a2 = self.alpha * self.alpha
        return (1.0 - np.power(a2, m)) / (1.0 - a2)

    def _w_dist(self, ta, tb):
        lo = np.minimum(ta[:, None], tb[None, :])
        dif = np.abs(ta[:, None] - tb[None, :])
        return np.power(self.alpha, dif) * self._g(lo)

    # -- CovModel interface ---------------------------------------------------
    def mean(self, pts):
        t = pts[:, 0]
        return np.power(self.alpha, t) * self.h0.mu

    def var(self, pts):
        t = pts[:, 0]
        out = np.power(self.alpha, 2.0 * t) * self.h0.sigma2
        if self.hw is not None:
            out = out + self._g(t) * self.hw.sigma2
        return out

    def cov(self, a, b):
        ta, sa = a[:, 0], a[:, 1:]
        tb, sb = b[:, 0], b[:, 1:]
        out = self._w_init(ta, tb) * accel.kernel_cross(
            sa, sb, self.h0.sigma2, self.h0.tau2, self.h0.gamma
        )
        if self.hw is not None:
            out = out + self._w_dist(ta, tb) * accel.kernel_cross(
                sa, sb, self.hw.sigma2, self.hw.tau2, self.hw.gamma
            )
        return out

    def cov_sym(self, pts):
        t, s = pts[:, 0], pts[:, 1:]
        out = self._w_init(t, t) * accel.kernel_sym(
            s, self.h0.sigma2, self.h0.tau2, self.h0.gamma
        )
        if self.hw is not None:
            out = out + self._w_dist(t, t) * accel.kernel_sym(
                s, self.hw.sigma2, self.hw.tau2, self.hw.gamma
            )
        return 0.5 * (out + out.T)


def st_rows(t, locs) -> np.ndarray:
    """Stack a time index onto spatial locations: rows [t, x1..xd]."""
    locs = np.asarray(locs, dtype=np.float64)
    if locs.ndim == 1:
        locs = locs[:, None]
    return np.column_stack([np.full(locs.shape[0], float(t)), locs])


def dgp_joint_conditional(spec: DgpSpec, known, query):
    """Exact Gaussian law of a queried slice given known slices.

    ``known`` is an iterable of (t, locations, values) where values is
    (n_processes, n_t); ``query`` is (t_q, locations_q). Returns a list of
    (mean, cov) per process.
    """
    t_q, locs_q = query
    rows_q = st_rows(t_q, locs_q)
    known = list(known)
    out = []
    for p in range(spec.n_processes):
        model = DgpProcessCov(spec.init_hyper[p], spec.dist_hyper[p],
                              spec.transition[p])
        if known:
            rows_k = np.vstack([st_rows(t, locs) for t, locs, _ in known])
            vals_k = np.concatenate(
                [np.asarray(v, dtype=np.float64)[p] for _, _, v in known]
            )
            st = SchurState.start(model, rows_k, vals_k)
        else:
            st = SchurState.start(model, np.empty((0, rows_q.shape[1])), np.empty(0))
        out.append(st.conditional(rows_q))
    return out


def dgp_logpdf(spec: DgpSpec, known) -> float:
    """Joint log density of the space-time GP at the given slices.

    ``known`` as in dgp_joint_conditional.
    """
    known = list(known)
    total = 0.0
    for p in range(spec.n_processes):
        model = DgpProcessCov(spec.init_hyper[p], spec.dist_hyper[p],
                              spec.transition[p])
        rows = np.vstack([st_rows(t, locs) for t, locs, _ in known])
        vals = np.concatenate([np.asarray(v, dtype=np.float64)[p]
                               for _, _, v in known])
        cov = model.cov_sym(rows)
        lower, _ = chol_with_jitter(cov)
        z = np.linalg.solve(lower, vals - model.mean(rows))
        logdet = 2.0 * np.sum(np.log(np.diag(lower)))
        total += -0.5 * (vals.size * math.log(2.0 * math.pi) + logdet + z @ z)
    return float(total)
