"""Gibbs sampler for the spatial Cox model with intensity lambda* Phi(W beta).

Blocks, in the paper's order: the thinned-event block, the joint GP block (a
skew-normal draw), an adaptive random-walk MH step for free GP
hyperparameters, and the conjugate Gamma draw for lambda*.

The thinned-event block deserves a note. The full conditional of the thinned
configuration (given observed-event GP values, lambda*, theta) is the marked
point process with density proportional to

    (lambda*)^M / M! * prod_m Phi(-W(s_m) beta(s_m)) * pi_GP(beta_M | beta_N)

per the Poisson coloring theorem. No feasible independence sampler for this
law exists once the GP correlates marks, so the default block update is a
birth-death Metropolis-within-Gibbs sweep that leaves the law exactly
invariant: births propose a uniform location with a GP-conditional mark and
accept with min(1, eta Phi(-W beta*) / (M+1)); deaths pick a point uniformly
and accept with min(1, M / (eta Phi(-W beta_j))). The sequential
rejection-sampling loop described alongside the model is available as
strategy "algorithm42" for comparison; its stationary law provably inflates
the thinned count (it never applies the Phi tilt to K) and it fails
forward/successive-conditional coherence checks, so it is not the default.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from .errors import InputError, RejectionCapError
from .kernel_gp import GpHyper, SchurState, SpatialCov, chol_with_jitter, gp_logpdf
from .point_process import Region
from .skew_normal import SkewNormalSpec, sample_skew_normal

# ---------------------------------------------------------------------------
# priors
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LambdaPrior:
    """Gamma(shape, rate) prior for lambda*; Exponential(rate) is shape=1."""

    shape: float
    rate: float

    def __post_init__(self):
        if self.shape <= 0 or self.rate <= 0:
            raise InputError("Gamma prior parameters must be > 0")

    @classmethod
    def gamma(cls, shape, rate):
        return cls(shape, rate)

    @classmethod
    def exponential(cls, rate):
        return cls(1.0, rate)

    @property
    def mean(self) -> float:
        return self.shape / self.rate


@dataclass(frozen=True)
class Param:
    """One scalar hyperparameter: fixed, or free with a uniform prior."""

    value: float
    low: float = np.nan
    high: float = np.nan
    free: bool = False

    @classmethod
    def fixed(cls, value):
        return cls(float(value))

    @classmethod
    def uniform(cls, low, high):
        if not low < high:
            raise InputError("uniform prior needs low < high")
        return cls(0.5 * (low + high), float(low), float(high), True)

    def in_support(self, v) -> bool:
        return (not self.free) or (self.low < v < self.high)


@dataclass(frozen=True)
class ProcessPrior:
    mu: Param
    sigma2: Param
    tau2: Param
    gamma: float = 1.5

    def initial_hyper(self) -> GpHyper:
        return GpHyper(self.mu.value, self.sigma2.value, self.tau2.value, self.gamma)


@dataclass(frozen=True)
class PriorSpec:
    lambda_prior: LambdaPrior
    processes: tuple

    def __post_init__(self):
        object.__setattr__(self, "processes", tuple(self.processes))


# ---------------------------------------------------------------------------
# data and chain state
# ---------------------------------------------------------------------------


@dataclass
class SpatialData:
    """Observed events plus the (deterministic) covariate field.

    ``covariate_fn(locs) -> (n, q)`` must be evaluable anywhere in the region;
    the intercept column is implicit, so the design at a location is
    [1, w_1(s), ..., w_q(s)] aligned with the q+1 GP processes.
    """

    region: Region
    events: np.ndarray
    covariate_fn: object = None
    n_cov: int = 0

    def __post_init__(self):
        self.events = np.asarray(self.events, dtype=np.float64).reshape(-1, self.region.dim)
        inside = self.region.contains(self.events)
        if not np.all(inside):
            bad = np.nonzero(~inside)[0]
            raise InputError(f"events outside region at rows {bad.tolist()}")

    @property
    def n_events(self) -> int:
        return self.events.shape[0]

    @property
    def n_processes(self) -> int:
        return 1 + self.n_cov

    def design(self, locs) -> np.ndarray:
        locs = np.asarray(locs, dtype=np.float64).reshape(-1, self.region.dim)
        cols = [np.ones(locs.shape[0])]
        if self.n_cov:
            w = np.asarray(self.covariate_fn(locs), dtype=np.float64).reshape(
                locs.shape[0], self.n_cov
            )
            cols.append(w)
        return np.column_stack(cols)


@dataclass
class SpatialChainState:
    n_obs: int
    thinned_locs: np.ndarray          # (M, d)
    beta_n: np.ndarray                # (P, N)
    beta_m: np.ndarray                # (P, M)
    lambda_star: float
    theta: tuple                      # GpHyper per process
    iteration: int = 0

    def __post_init__(self):
        if self.lambda_star <= 0:
            raise InputError("lambda_star must be > 0")
        if self.beta_n.shape[1] != self.n_obs:
            raise InputError("beta_n misaligned with observed events")
        if self.beta_m.shape[1] != self.thinned_locs.shape[0]:
            raise InputError("beta_m misaligned with thinned locations")

    @property
    def k_total(self) -> int:
        return self.n_obs + self.thinned_locs.shape[0]


def initial_state(data: SpatialData, priors: PriorSpec) -> SpatialChainState:
    """Start: lambda* at its prior mean, no thinned points, beta at the prior
    mean, free hyperparameters at their prior midpoints."""
    theta = tuple(pp.initial_hyper() for pp in priors.processes)
    p = len(theta)
    beta_n = np.tile(np.array([h.mu for h in theta])[:, None], (1, data.n_events))
    return SpatialChainState(
        n_obs=data.n_events,
        thinned_locs=np.empty((0, data.region.dim)),
        beta_n=beta_n,
        beta_m=np.empty((p, 0)),
        lambda_star=priors.lambda_prior.mean,
        theta=theta,
    )


# ---------------------------------------------------------------------------
# shared slice engine (reused by the spatio-temporal sampler)
# ---------------------------------------------------------------------------


def _draw_candidate_marks(proc_states, row, rng):
    """Sequential GP draws of all process values at one candidate point;
    returns the values and per-process append caches."""
    p = len(proc_states)
    vals = np.empty(p)
    caches = []
    for j in range(p):
        m, v, k, pk, s = proc_states[j].conditional_scalar_cached(row)
        vals[j] = m + math.sqrt(v) * rng.standard_normal()
        caches.append(None if k is None else (k, pk, s))
    return vals, caches


def bd_thinned_sweep(proc_states, thinned_rows, thinned_locs, thinned_beta,
                     design_fn, to_row, region, eta, rng, moves, on_swap=None):
    """Birth-death MH moves for one thinned-event slice.

    ``proc_states`` are mutated in place (births append rows, deaths
    swap-and-shrink), so the new thinned set stays in the conditioning set of
    subsequent slices. ``thinned_rows`` lists the slice's current row indices
    inside the states and is updated in place; when a death relocates an
    unrelated row, ``on_swap(new_idx, old_idx)`` lets external bookkeeping
    follow (the default patches only ``thinned_rows``).
    """
    rows = thinned_rows
    locs = [np.array(x) for x in thinned_locs]
    beta = [np.array(b) for b in thinned_beta.T]

    def _default_swap(new_idx, old_idx):
        for i, r in enumerate(rows):
            if r == old_idx:
                rows[i] = new_idx

    swap = on_swap if on_swap is not None else _default_swap
    for _ in range(moves):
        m = len(locs)
        if rng.random() < 0.5:  # birth
            s = region.sample(rng, 1)[0]
            row_pt = to_row(s[None, :])[0]
            vals, caches = _draw_candidate_marks(proc_states, row_pt, rng)
            pred = float(design_fn(s[None, :])[0] @ vals)
            acc = eta * ndtr(-pred) / (m + 1)
            if rng.random() < acc:
                idx = 0
                for j, st in enumerate(proc_states):
                    idx = st.append(row_pt, vals[j], cache=caches[j])
                rows.append(idx)
                locs.append(s)
                beta.append(vals)
        else:  # death
            if m == 0:
                continue
            j = int(rng.integers(m))
            pred = float(design_fn(locs[j][None, :])[0] @ beta[j])
            denom = eta * ndtr(-pred)
            if denom <= 0.0 or rng.random() < m / denom:
                r = rows[j]
                moved = None
                for st in proc_states:
                    moved = st.drop(r)
                del rows[j]
                del locs[j]
                del beta[j]
                if moved is not None:
                    swap(moved, proc_states[0].n)
    d = region.dim
    new_locs = np.array(locs).reshape(-1, d)
    p = len(proc_states)
    new_beta = np.array(beta).reshape(-1, p).T
    return new_locs, new_beta


def algorithm42_thinned(proc_states, design_fn, to_row, region, eta, n_obs,
                        rng, rejection_cap):
    """Sequential rejection loop of the companion algorithm (study variant).

    Draws K from a Poisson(eta) truncated to {N, N+1, ...} and fills each of
    the K - N thinned slots by retrying {uniform location, GP-conditional
    mark, Bernoulli(Phi(-W beta))} until acceptance, conditioning on
    previously accepted slots only. Kept for comparison with the default
    birth-death block; see the module docstring for why it is not exact.
    """
    k = sample_trunc_poisson(rng, eta, n_obs)
    d = region.dim
    p = len(proc_states)
    locs = np.empty((k - n_obs, d))
    beta = np.empty((p, k - n_obs))
    for slot in range(k - n_obs):
        for attempt in range(rejection_cap):
            s = region.sample(rng, 1)[0]
            row = to_row(s[None, :])[0]
            vals, caches = _draw_candidate_marks(proc_states, row, rng)
            pred = float(design_fn(s[None, :])[0] @ vals)
            if rng.random() < ndtr(-pred):
                for j, st in enumerate(proc_states):
                    st.append(row, vals[j], cache=caches[j])
                locs[slot] = s
                beta[:, slot] = vals
                break
        else:
            raise RejectionCapError(slot, rejection_cap)
    return locs, beta


def gp_slice_draw(prior_states, slice_rows, signed_design, rng, sweeps=None,
                  current=None):
    """Skew-normal draw of all process values over one slice of points.

    ``prior_states`` give each process's Gaussian law at ``slice_rows``
    conditional on everything outside the slice (the prior itself when they
    are empty); ``signed_design`` carries +W rows for observed events and -W
    rows for thinned events. When ``current`` (the slice's present values,
    shape (P, K)) is supplied and ``sweeps`` is None, the draw uses the
    exactly-invariant warm latent update; otherwise the cold constrained
    Gibbs scheme with the requested sweep count.
    """
    k = slice_rows.shape[0]
    p = len(prior_states)
    if k == 0:
        return np.empty((p, 0))
    xi_blocks, cov_blocks = [], []
    for st in prior_states:
        mean, cov = st.conditional(slice_rows)
        xi_blocks.append(mean)
        cov_blocks.append(cov)
    return gp_slice_draw_from_laws(xi_blocks, cov_blocks, signed_design, rng,
                                   sweeps, current)


def gp_slice_draw_from_laws(xi_blocks, cov_blocks, signed_design, rng,
                            sweeps=None, current=None):
    """Skew-normal slice draw when each process's conditional Gaussian law at
    the slice points is already known."""
    p = len(xi_blocks)
    k = signed_design.shape[0]
    if k == 0:
        return np.empty((p, 0))
    spec = SkewNormalSpec.from_blocks(xi_blocks, cov_blocks, signed_design)
    initial = None
    if current is not None and sweeps is None:
        initial = np.asarray(current, dtype=np.float64).reshape(p * k)
    z = sample_skew_normal(spec, rng, sweeps=sweeps, initial=initial)
    return z.reshape(p, k)


# ---------------------------------------------------------------------------
# spatial block updates
# ---------------------------------------------------------------------------


def _primed_states(state: SpatialChainState, data: SpatialData, with_thinned=True):
    rows = data.events if not with_thinned else np.vstack(
        [data.events, state.thinned_locs]
    )
    out = []
    for p, h in enumerate(state.theta):
        vals = state.beta_n[p] if not with_thinned else np.concatenate(
            [state.beta_n[p], state.beta_m[p]]
        )
        out.append(SchurState.start(SpatialCov(h), rows, vals))
    return out


def default_bd_moves(m_current: int) -> int:
    return max(40, 4 * (m_current + 8))


def sample_thinned_block(state: SpatialChainState, data: SpatialData, rng, *,
                         strategy="bd", bd_moves=None, rejection_cap=10 ** 6):
    """Update (K, thinned locations, beta_M) given beta_N, lambda*, theta."""
    eta = state.lambda_star * data.region.measure
    ident = lambda locs: locs
    if strategy == "bd":
        states = _primed_states(state, data, with_thinned=True)
        moves = default_bd_moves(state.thinned_locs.shape[0]) if bd_moves is None \
            else int(bd_moves)
        rows = list(range(data.n_events,
                          data.n_events + state.thinned_locs.shape[0]))
        locs, beta = bd_thinned_sweep(
            states, rows, state.thinned_locs, state.beta_m,
            data.design, ident, data.region, eta, rng, moves,
        )
    elif strategy == "algorithm42":
        states = _primed_states(state, data, with_thinned=False)
        locs, beta = algorithm42_thinned(
            states, data.design, ident, data.region, eta, data.n_events,
            rng, rejection_cap,
        )
    else:
        raise InputError(f"unknown thinned strategy {strategy!r}")
    return data.n_events + locs.shape[0], locs, beta


def sample_gp_block(state: SpatialChainState, data: SpatialData, rng,
                    sn_sweeps=None):
    """Joint redraw of beta at all K current locations (skew-normal)."""
    locs = np.vstack([data.events, state.thinned_locs])
    n, m = data.n_events, state.thinned_locs.shape[0]
    signs = np.concatenate([np.ones(n), -np.ones(m)])
    signed_design = signs[:, None] * data.design(locs)
    prior_states = [
        SchurState.start(SpatialCov(h), np.empty((0, data.region.dim)), np.empty(0))
        for h in state.theta
    ]
    current = np.hstack([state.beta_n, state.beta_m])
    vals = gp_slice_draw(prior_states, locs, signed_design, rng, sn_sweeps,
                         current=current)
    return vals[:, :n], vals[:, n:]


def sample_lambda_star(state: SpatialChainState, prior: LambdaPrior,
                       region: Region, rng) -> float:
    """Conjugate draw: Gamma(shape + K, rate + mu(S))."""
    return float(rng.gamma(prior.shape + state.k_total)
                 / (prior.rate + region.measure))


# -- adaptive random-walk MH for theta --------------------------------------

_ADAPT_START = 100
_ADAPT_SCALE = 2.38 ** 2
_ADAPT_EPS = 1e-6


@dataclass
class AdaptState:
    """Running mean/covariance of past samples for the adaptive proposal."""

    dim: int
    n: int = 0
    mean: np.ndarray = None
    m2: np.ndarray = None
    accepted: int = 0
    proposed: int = 0

    def __post_init__(self):
        if self.mean is None:
            self.mean = np.zeros(self.dim)
        if self.m2 is None:
            self.m2 = np.zeros((self.dim, self.dim))

    def update(self, x):
        self.n += 1
        delta = x - self.mean
        self.mean += delta / self.n
        self.m2 += np.outer(delta, x - self.mean)

    def proposal_chol(self) -> np.ndarray:
        d = self.dim
        if self.n <= _ADAPT_START or self.n < 2:
            cov = (0.1 ** 2 / d) * np.eye(d)
        else:
            cov = (_ADAPT_SCALE / d) * (self.m2 / (self.n - 1)) + _ADAPT_EPS * np.eye(d)
        return np.linalg.cholesky(cov)

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.proposed if self.proposed else float("nan")


_FREE_FIELDS = ("mu", "sigma2", "tau2")


def free_params(priors: PriorSpec):
    """(process index, field name) pairs for every free hyperparameter."""
    out = []
    for p, pp in enumerate(priors.processes):
        for name in _FREE_FIELDS:
            if getattr(pp, name).free:
                out.append((p, name))
    return out


def _pack(theta, free):
    vals = []
    for p, name in free:
        v = getattr(theta[p], name)
        vals.append(math.log(v) if name != "mu" else v)
    return np.array(vals)


def _unpack(theta, free, phi):
    hypers = list(theta)
    for (p, name), v in zip(free, phi):
        val = v if name == "mu" else math.exp(v)
        hypers[p] = hypers[p].replace(**{name: val})
    return tuple(hypers)


def _log_target_theta(theta, free, priors, loglik_fn):
    lp = 0.0
    for p, name in free:
        v = getattr(theta[p], name)
        if not getattr(priors.processes[p], name).in_support(v):
            return -np.inf
        if name != "mu":          # Jacobian of the log transform
            lp += math.log(v)
    return lp + loglik_fn(theta)


def mh_theta_step(theta, priors, loglik_fn, adapt: AdaptState, rng):
    """One adaptive Gaussian RW-MH update on the free hyperparameters.

    ``loglik_fn(theta)`` returns the GP log density of the current field
    values under ``theta``. No-op when nothing is free.
    """
    free = free_params(priors)
    if not free:
        return theta, adapt
    phi = _pack(theta, free)
    chol = adapt.proposal_chol()
    phi_prop = phi + chol @ rng.standard_normal(len(free))
    theta_prop = _unpack(theta, free, phi_prop)
    cur = _log_target_theta(theta, free, priors, loglik_fn)
    try:
        prop = _log_target_theta(theta_prop, free, priors, loglik_fn)
    except InputError:
        prop = -np.inf
    adapt.proposed += 1
    if math.log(rng.random()) < prop - cur:
        theta = theta_prop
        phi = phi_prop
        adapt.accepted += 1
    adapt.update(phi)
    return theta, adapt


def sample_theta(state: SpatialChainState, data: SpatialData, priors: PriorSpec,
                 adapt: AdaptState, rng):
    locs = np.vstack([data.events, state.thinned_locs])
    beta = np.hstack([state.beta_n, state.beta_m])

    def loglik(theta):
        return sum(
            gp_logpdf(theta[p], locs, beta[p]) for p in range(len(theta))
        )

    return mh_theta_step(state.theta, priors, loglik, adapt, rng)


# ---------------------------------------------------------------------------
# truncated Poisson utility (used by the algorithm42 strategy)
# ---------------------------------------------------------------------------


def sample_trunc_poisson(rng, eta, kmin) -> int:
    """Poisson(eta) truncated to {kmin, kmin+1, ...}, inverse-CDF from the
    mode with renormalisation; tail cut once cumulative mass is within 1e-14."""
    if eta < 0 or not np.isfinite(eta):
        raise InputError("eta must be finite and >= 0")
    if eta == 0.0:
        return kmin
    mode = max(kmin, int(eta))
    # unnormalised pmf relative to the mode, spreading both ways
    ks = [mode]
    ws = [1.0]
    w = 1.0
    k = mode
    while True:  # upward
        k += 1
        w *= eta / k
        if w < 1e-17 * max(ws):
            break
        ks.append(k)
        ws.append(w)
    w = 1.0
    k = mode
    while k > kmin:  # downward
        w *= k / eta
        k -= 1
        if w < 1e-17 * max(ws):
            break
        ks.append(k)
        ws.append(w)
    ks = np.array(ks)
    ws = np.array(ws)
    order = np.argsort(ks)
    ks, ws = ks[order], ws[order]
    cdf = np.cumsum(ws / ws.sum())
    u = rng.random()
    return int(ks[np.searchsorted(cdf, u, side="right").clip(0, len(ks) - 1)])


# ---------------------------------------------------------------------------
# intensity grid, functionals, full chain
# ---------------------------------------------------------------------------


@dataclass
class IntensityGrid:
    """Streaming accumulators for posterior lambda(s) summaries on a fixed
    location set (optionally with a time column)."""

    locs: np.ndarray
    times: np.ndarray | None = None
    sum_lambda: np.ndarray = None
    sum_sq: np.ndarray = None
    n_samples: int = 0
    keep_trace: bool = False
    trace: list = field(default_factory=list)

    def __post_init__(self):
        self.locs = np.asarray(self.locs, dtype=np.float64)
        if self.locs.ndim == 1:
            self.locs = self.locs[:, None]
        g = self.locs.shape[0]
        if self.sum_lambda is None:
            self.sum_lambda = np.zeros(g)
        if self.sum_sq is None:
            self.sum_sq = np.zeros(g)

    def add(self, lam_values):
        lam_values = np.asarray(lam_values, dtype=np.float64)
        self.sum_lambda += lam_values
        self.sum_sq += lam_values ** 2
        self.n_samples += 1
        if self.keep_trace:
            self.trace.append(lam_values.copy())

    def mean(self) -> np.ndarray:
        return self.sum_lambda / max(self.n_samples, 1)

    def sd(self) -> np.ndarray:
        if self.n_samples < 2:
            return np.zeros_like(self.sum_lambda)
        var = self.sum_sq / self.n_samples - self.mean() ** 2
        return np.sqrt(np.maximum(var, 0.0))


def field_conditional_draw(state: SpatialChainState, data: SpatialData, pts,
                           rng) -> np.ndarray:
    """Joint draw of all processes at ``pts`` given the current chain field."""
    pts = np.asarray(pts, dtype=np.float64).reshape(-1, data.region.dim)
    locs = np.vstack([data.events, state.thinned_locs])
    beta = np.hstack([state.beta_n, state.beta_m])
    out = np.empty((len(state.theta), pts.shape[0]))
    for p, h in enumerate(state.theta):
        st = SchurState.start(SpatialCov(h), locs, beta[p])
        mean, cov = st.conditional(pts)
        lower, _ = chol_with_jitter(cov, h.sigma2)
        out[p] = mean + lower @ rng.standard_normal(pts.shape[0])
    return out


def intensity_at(state, data, pts, beta_vals) -> np.ndarray:
    d = data.design(pts)
    return state.lambda_star * ndtr(np.einsum("np,pn->n", d, beta_vals))


def augment_grid(state: SpatialChainState, data: SpatialData,
                 grid: IntensityGrid, rng) -> IntensityGrid:
    """One posterior draw of lambda over the grid, accumulated in place."""
    if grid.locs.shape[0] == 0:
        return grid
    beta = field_conditional_draw(state, data, grid.locs, rng)
    grid.add(intensity_at(state, data, grid.locs, beta))
    return grid


def estimate_integral(region_r: Region, field_draws, n_strata, rng, *,
                      within: Region | None = None) -> float:
    """Monte Carlo estimate of E[ integral_R lambda(s) ds | data ].

    ``field_draws`` iterates over posterior draws of the intensity field, each
    a callable mapping (n, d) points to lambda values. One stratified uniform
    per equal-volume stratum is used per draw.
    """
    if within is not None:
        b = np.asarray(region_r.bounds)
        wb = np.asarray(within.bounds)
        if not (np.all(b[:, 0] >= wb[:, 0]) and np.all(b[:, 1] <= wb[:, 1])):
            raise InputError("integration region must lie inside the domain")
    strata = region_r.subdivide(int(n_strata))
    total = 0.0
    count = 0
    for lam_fn in field_draws:
        pts = np.vstack([s.sample(rng, 1) for s in strata])
        total += float(np.mean(lam_fn(pts)))
        count += 1
    if count == 0:
        raise InputError("no field draws supplied")
    return region_r.measure * total / count


@dataclass
class GibbsConfig:
    n_iter: int
    burn_in: int = 0
    thin: int = 1
    seed: int = 0
    sn_sweeps: int | None = None
    thinned_strategy: str = "bd"
    bd_moves: int | None = None
    rejection_cap: int = 10 ** 6
    grid_locs: np.ndarray | None = None
    functional_regions: tuple = ()
    n_strata: int = 4
    keep_snapshots: bool = False

    def __post_init__(self):
        if not (self.n_iter >= self.burn_in >= 0):
            raise InputError("need n_iter >= burn_in >= 0")
        if self.thin < 1:
            raise InputError("thin must be >= 1")


@dataclass
class Snapshot:
    iteration: int
    locs: np.ndarray          # (K, d)
    beta: np.ndarray          # (P, K)
    lambda_star: float
    theta: tuple


@dataclass
class FunctionalAccum:
    region: Region
    total: float = 0.0
    total_sq: float = 0.0
    n: int = 0

    def add(self, mean_lambda):
        self.total += mean_lambda
        self.total_sq += mean_lambda ** 2
        self.n += 1

    @property
    def estimate(self) -> float:
        return self.region.measure * self.total / max(self.n, 1)

    @property
    def se(self) -> float:
        if self.n < 2:
            return float("nan")
        var = self.total_sq / self.n - (self.total / self.n) ** 2
        return self.region.measure * math.sqrt(max(var, 0.0) / self.n)


@dataclass
class ChainOutput:
    trace_lambda: np.ndarray
    trace_k: np.ndarray
    trace_theta: dict
    grid: IntensityGrid | None
    functionals: list
    snapshots: list
    acceptance: dict
    runtime_s: float
    final_state: SpatialChainState


def run_gibbs(data: SpatialData, priors: PriorSpec, config: GibbsConfig) -> ChainOutput:
    """Run the full spatial Gibbs sampler; deterministic given config.seed."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(config.seed)
    state = initial_state(data, priors)
    free = free_params(priors)
    adapt = AdaptState(len(free)) if free else None
    trace_lambda = np.empty(config.n_iter)
    trace_k = np.empty(config.n_iter, dtype=np.int64)
    trace_theta = {f"{name}_{p}": np.empty(config.n_iter) for p, name in free}
    grid = None
    if config.grid_locs is not None and np.size(config.grid_locs):
        grid = IntensityGrid(config.grid_locs)
    funcs = [FunctionalAccum(r) for r in config.functional_regions]
    for r in config.functional_regions:
        b = np.asarray(r.bounds)
        wb = np.asarray(data.region.bounds)
        if not (np.all(b[:, 0] >= wb[:, 0]) and np.all(b[:, 1] <= wb[:, 1])):
            raise InputError("functional region must lie inside the domain")
    snapshots = []
    bd_acc = {"births": 0, "deaths": 0}

    for it in range(1, config.n_iter + 1):
        m_before = state.thinned_locs.shape[0]
        _, locs, beta_m = sample_thinned_block(
            state, data, rng,
            strategy=config.thinned_strategy,
            bd_moves=config.bd_moves,
            rejection_cap=config.rejection_cap,
        )
        state.thinned_locs = locs
        state.beta_m = beta_m
        state.beta_n, state.beta_m = sample_gp_block(state, data, rng,
                                                     config.sn_sweeps)
        if free:
            state.theta, adapt = sample_theta(state, data, priors, adapt, rng)
        state.lambda_star = sample_lambda_star(state, priors.lambda_prior,
                                               data.region, rng)
        state.iteration = it
        trace_lambda[it - 1] = state.lambda_star
        trace_k[it - 1] = state.k_total
        for p, name in free:
            trace_theta[f"{name}_{p}"][it - 1] = getattr(state.theta[p], name)
        bd_acc["births"] += max(0, state.thinned_locs.shape[0] - m_before)

        if it > config.burn_in and (it - config.burn_in) % config.thin == 0:
            n_grid = grid.locs.shape[0] if grid is not None else 0
            extra = []
            for fa in funcs:
                extra.append(np.vstack(
                    [s.sample(rng, 1) for s in fa.region.subdivide(config.n_strata)]
                ))
            pts = [grid.locs] if n_grid else []
            pts += extra
            if pts:
                all_pts = np.vstack(pts)
                beta = field_conditional_draw(state, data, all_pts, rng)
                lam = intensity_at(state, data, all_pts, beta)
                if n_grid:
                    grid.add(lam[:n_grid])
                ofs = n_grid
                for fa in funcs:
                    fa.add(float(np.mean(lam[ofs:ofs + config.n_strata])))
                    ofs += config.n_strata
            if config.keep_snapshots:
                snapshots.append(Snapshot(
                    it,
                    np.vstack([data.events, state.thinned_locs]),
                    np.hstack([state.beta_n, state.beta_m]),
                    state.lambda_star,
                    state.theta,
                ))

    acceptance = {"theta": adapt.acceptance_rate if adapt else float("nan")}
    return ChainOutput(
        trace_lambda=trace_lambda,
        trace_k=trace_k,
        trace_theta=trace_theta,
        grid=grid,
        functionals=funcs,
        snapshots=snapshots,
        acceptance=acceptance,
        runtime_s=time.perf_counter() - t0,
        final_state=state,
    )
