"""Gibbs sampler for the spatio-temporal Cox model over dynamic GPs.

Per-time thinned-event blocks and per-time GP slices sweep t = 0..T, each
conditioning on every other time's current field values (full space-time
conditioning through the closed-form dynamic-GP covariance). With a single
time the sweep reduces bit-for-bit to the spatial sampler under a shared
seed: the same engine functions run on the same matrices in the same order.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from .dynamic_gp import DgpProcessCov, DgpSpec, dgp_logpdf, st_rows
from .errors import InputError
from .kernel_gp import SchurState, chol_with_jitter
from .mcmc_spatial import (
    AdaptState,
    FunctionalAccum,
    GibbsConfig,
    IntensityGrid,
    LambdaPrior,
    ProcessPrior,
    bd_thinned_sweep,
    algorithm42_thinned,
    default_bd_moves,
    free_params,
    gp_slice_draw_from_laws,
    mh_theta_step,
)
from .point_process import PointPattern, Region

# ---------------------------------------------------------------------------
# model/data containers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LambdaStructure:
    """How lambda*_t varies over time: independently or one shared value."""

    mode: str
    prior: LambdaPrior

    def __post_init__(self):
        if self.mode not in ("independent", "common"):
            raise InputError("lambda structure mode must be independent|common")


@dataclass(frozen=True)
class StPriorSpec:
    lambda_structure: LambdaStructure
    init: tuple                     # ProcessPrior per process (law of beta_0)
    dist: tuple                     # ProcessPrior or None per process
    transition: tuple = None
    seasonal: object = None         # dynamic_gp.Seasonal

    def __post_init__(self):
        object.__setattr__(self, "init", tuple(self.init))
        object.__setattr__(self, "dist", tuple(self.dist))
        if len(self.init) != len(self.dist):
            raise InputError("init and dist prior lists must align")
        if self.transition is not None:
            object.__setattr__(self, "transition", tuple(self.transition))

    @property
    def n_processes(self) -> int:
        return len(self.init)

    def initial_spec(self) -> DgpSpec:
        init_h = tuple(pp.initial_hyper() for pp in self.init)
        dist_h = tuple(
            None if pp is None else pp.initial_hyper().replace(mu=0.0)
            for pp in self.dist
        )
        return DgpSpec(init_h, dist_h, self.transition, self.seasonal)


@dataclass
class StData:
    """Events per time plus the design over (t, s)."""

    region: Region
    events: list                   # (N_t, d) arrays, t = 0..T
    seasonal: object = None        # Seasonal giving the second design column
    covariate_fn: object = None    # (t, locs) -> (n, q) for extra processes
    n_cov: int = 0

    def __post_init__(self):
        self.events = [
            np.asarray(e, dtype=np.float64).reshape(-1, self.region.dim)
            for e in self.events
        ]
        for t, ev in enumerate(self.events):
            inside = self.region.contains(ev) if ev.size else np.ones(0, bool)
            if not np.all(inside):
                bad = np.nonzero(~inside)[0]
                raise InputError(f"time {t}: events outside region at rows {bad.tolist()}")
        if self.seasonal is not None:
            self.n_cov = max(self.n_cov, 1)

    @property
    def n_times(self) -> int:
        return len(self.events)

    @property
    def n_processes(self) -> int:
        return 1 + self.n_cov

    def design(self, t, locs) -> np.ndarray:
        locs = np.asarray(locs, dtype=np.float64).reshape(-1, self.region.dim)
        cols = [np.ones(locs.shape[0])]
        if self.seasonal is not None:
            cols.append(np.full(locs.shape[0], self.seasonal.factor(t)))
        elif self.n_cov:
            w = np.asarray(self.covariate_fn(t, locs), dtype=np.float64)
            cols.append(w.reshape(locs.shape[0], self.n_cov))
        return np.column_stack(cols)


@dataclass
class StChainState:
    thinned: list                   # (M_t, d) per time
    beta: list                      # (P, K_t) per time, order [events; thinned]
    lambda_star: np.ndarray         # (T+1,) (equal entries in common mode)
    theta: DgpSpec
    iteration: int = 0

    def k_at(self, data: StData, t: int) -> int:
        return data.events[t].shape[0] + self.thinned[t].shape[0]

    def k_totals(self, data: StData) -> np.ndarray:
        return np.array([self.k_at(data, t) for t in range(data.n_times)])


def initial_state_st(data: StData, priors: StPriorSpec) -> StChainState:
    spec = priors.initial_spec()
    p = spec.n_processes
    d = data.region.dim
    beta = []
    for t in range(data.n_times):
        n_t = data.events[t].shape[0]
        model_means = np.array([
            DgpProcessCov(spec.init_hyper[j], spec.dist_hyper[j],
                          spec.transition[j]).mean(st_rows(t, np.zeros((1, d))))[0]
            for j in range(p)
        ])
        beta.append(np.tile(model_means[:, None], (1, n_t)))
    lam0 = priors.lambda_structure.prior.mean
    return StChainState(
        thinned=[np.empty((0, d)) for _ in range(data.n_times)],
        beta=beta,
        lambda_star=np.full(data.n_times, lam0),
        theta=spec,
    )


# ---------------------------------------------------------------------------
# persistent-within-iteration conditioning states
# ---------------------------------------------------------------------------


def _process_models(spec: DgpSpec):
    return [
        DgpProcessCov(spec.init_hyper[p], spec.dist_hyper[p], spec.transition[p])
        for p in range(spec.n_processes)
    ]


def _slice_rows(data: StData, state: StChainState, t: int) -> np.ndarray:
    locs = np.vstack([data.events[t], state.thinned[t]])
    return st_rows(t, locs)


class StRowIndex:
    """Tracks which state row holds each (time, event/thinned) point.

    Rows move when a death swaps the last row into a freed slot, so the
    thinned-block engine reports swaps through ``on_swap``.
    """

    def __init__(self, n_times):
        self.event_rows = [[] for _ in range(n_times)]
        self.thinned_rows = [[] for _ in range(n_times)]

    def on_swap(self, new_idx, old_idx):
        for lists in (self.event_rows, self.thinned_rows):
            for lst in lists:
                for i, r in enumerate(lst):
                    if r == old_idx:
                        lst[i] = new_idx
                        return

    def slice_rows(self, t):
        """Rows of slice t in canonical [events; thinned] order."""
        return self.event_rows[t] + self.thinned_rows[t]


def build_states(data: StData, state: StChainState):
    """Fresh per-process conditioning states over all times, time-major with
    [events; thinned] inside each time. Returns (states, index)."""
    rows = []
    index = StRowIndex(data.n_times)
    ofs = 0
    for t in range(data.n_times):
        rows.append(_slice_rows(data, state, t))
        n_t = data.events[t].shape[0]
        m_t = state.thinned[t].shape[0]
        index.event_rows[t] = list(range(ofs, ofs + n_t))
        index.thinned_rows[t] = list(range(ofs + n_t, ofs + n_t + m_t))
        ofs += n_t + m_t
    all_rows = np.vstack(rows)
    models = _process_models(state.theta)
    vals = np.hstack(state.beta) if all_rows.shape[0] else np.empty((len(models), 0))
    states = [
        SchurState.start(models[p], all_rows, vals[p]) for p in range(len(models))
    ]
    return states, index


# ---------------------------------------------------------------------------
# block updates
# ---------------------------------------------------------------------------


def sample_thinned_all_times(state: StChainState, data: StData, rng, *,
                             strategy="bd", bd_moves=None,
                             rejection_cap=10 ** 6, states=None, index=None):
    """Per-time thinned-event updates, each conditioning on all current field
    values at every time (plus the growing slice itself)."""
    if states is None:
        states, index = build_states(data, state)
    new_thinned = list(state.thinned)
    new_beta = list(state.beta)
    for t in range(data.n_times):
        eta = float(state.lambda_star[t]) * data.region.measure
        design_fn = lambda locs, _t=t: data.design(_t, locs)
        to_row = lambda locs, _t=t: st_rows(_t, locs)
        n_t = data.events[t].shape[0]
        m_t = len(index.thinned_rows[t])
        if strategy == "bd":
            locs, beta_m = bd_thinned_sweep(
                states, index.thinned_rows[t], new_thinned[t],
                new_beta[t][:, n_t:],
                design_fn, to_row, data.region, eta, rng,
                default_bd_moves(m_t) if bd_moves is None else int(bd_moves),
                on_swap=index.on_swap,
            )
        elif strategy == "algorithm42":
            doomed = list(index.thinned_rows[t])
            for r in sorted(doomed, reverse=True):
                moved = None
                for st in states:
                    moved = st.drop(r)
                index.thinned_rows[t].remove(r)
                if moved is not None:
                    index.on_swap(moved, states[0].n)
            locs, beta_m = algorithm42_thinned(
                states, design_fn, to_row, data.region, eta, n_t,
                rng, rejection_cap,
            )
            n0 = states[0].n - locs.shape[0]
            index.thinned_rows[t] = list(range(n0, states[0].n))
        else:
            raise InputError(f"unknown thinned strategy {strategy!r}")
        new_thinned[t] = locs
        nb = np.empty((len(states), n_t + locs.shape[0]))
        nb[:, :n_t] = new_beta[t][:, :n_t]
        nb[:, n_t:] = beta_m
        new_beta[t] = nb
    return new_thinned, new_beta, states, index


def sample_gp_all_times(state: StChainState, data: StData, rng, *,
                        sn_sweeps=None, states=None, index=None):
    """Forward sweep of per-time skew-normal GP draws, each slice conditioned
    on every other slice's current values (via the precision partition, so
    the conditioning states are only touched through their tracked values)."""
    if states is None:
        states, index = build_states(data, state)
    new_beta = list(state.beta)
    for t in range(data.n_times):
        rows_idx = index.slice_rows(t)
        locs = np.vstack([data.events[t], state.thinned[t]])
        n_t = data.events[t].shape[0]
        m_t = state.thinned[t].shape[0]
        signs = np.concatenate([np.ones(n_t), -np.ones(m_t)])
        signed_design = signs[:, None] * data.design(t, locs)
        xi_blocks, cov_blocks = [], []
        for st in states:
            mean, cov = st.conditional_rows(rows_idx)
            xi_blocks.append(mean)
            cov_blocks.append(cov)
        vals = gp_slice_draw_from_laws(xi_blocks, cov_blocks, signed_design,
                                       rng, sn_sweeps, current=new_beta[t])
        for p, st in enumerate(states):
            st.set_values(rows_idx, vals[p])
        new_beta[t] = vals
    return new_beta, states, index


def sample_lambda_all(state: StChainState, structure: LambdaStructure,
                      data: StData, rng) -> np.ndarray:
    """Conjugate lambda* draw(s): per-time Gamma(a + K_t, b + mu(S)) in
    independent mode, one Gamma(a + sum K_t, b + (T+1) mu(S)) in common mode
    (all observed times enter the sum)."""
    prior = structure.prior
    mu_s = data.region.measure
    ks = state.k_totals(data)
    if structure.mode == "independent":
        return np.array([
            rng.gamma(prior.shape + k) / (prior.rate + mu_s) for k in ks
        ])
    lam = float(rng.gamma(prior.shape + ks.sum()) / (prior.rate + data.n_times * mu_s))
    return np.full(data.n_times, lam)


def sample_theta_st(state: StChainState, data: StData, priors: StPriorSpec,
                    adapt: AdaptState, rng):
    """Adaptive RW-MH on free hyperparameters of the dynamic GP."""
    slices = [
        (t, np.vstack([data.events[t], state.thinned[t]]), state.beta[t])
        for t in range(data.n_times)
    ]

    theta_priors = _StThetaView(priors)

    def loglik(theta_tuple):
        spec = theta_priors.to_spec(theta_tuple)
        return dgp_logpdf(spec, slices)

    theta_tuple = theta_priors.from_spec(state.theta)
    new_tuple, adapt = mh_theta_step(theta_tuple, theta_priors, loglik, adapt, rng)
    return theta_priors.to_spec(new_tuple), adapt


class _StThetaView:
    """Adapter flattening (init, dist) process priors into the spatial MH
    machinery's (processes,) layout."""

    def __init__(self, priors: StPriorSpec):
        self.priors = priors
        self.processes = list(priors.init) + [
            pp for pp in priors.dist if pp is not None
        ]
        self._dist_slots = [i for i, pp in enumerate(priors.dist) if pp is not None]

    def from_spec(self, spec: DgpSpec):
        hypers = list(spec.init_hyper)
        hypers += [spec.dist_hyper[i] for i in self._dist_slots]
        return tuple(hypers)

    def to_spec(self, theta_tuple) -> DgpSpec:
        p = self.priors.n_processes
        init = tuple(theta_tuple[:p])
        dist = list(self.priors.initial_spec().dist_hyper)
        for j, slot in enumerate(self._dist_slots):
            dist[slot] = theta_tuple[p + j].replace(mu=0.0)
        return DgpSpec(init, tuple(dist), self.priors.transition,
                       self.priors.seasonal)


# ---------------------------------------------------------------------------
# chain driver
# ---------------------------------------------------------------------------


@dataclass
class StSnapshot:
    iteration: int
    locs: list                      # (K_t, d) per time
    beta: list                      # (P, K_t) per time
    lambda_star: np.ndarray
    theta: DgpSpec


@dataclass
class StChainOutput:
    trace_lambda: np.ndarray        # (n_iter, T+1)
    trace_k: np.ndarray             # (n_iter, T+1)
    trace_theta: dict
    grid: IntensityGrid | None      # rows are (t, grid point) pairs
    snapshots: list
    acceptance: dict
    runtime_s: float
    final_state: StChainState


def run_gibbs_st(data: StData, priors: StPriorSpec, config: GibbsConfig) -> StChainOutput:
    """Full spatio-temporal Gibbs run; deterministic given config.seed."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(config.seed)
    state = initial_state_st(data, priors)
    view = _StThetaView(priors)
    free = free_params(view)
    adapt = AdaptState(len(free)) if free else None
    n_times = data.n_times
    trace_lambda = np.empty((config.n_iter, n_times))
    trace_k = np.empty((config.n_iter, n_times), dtype=np.int64)
    trace_theta = {f"{name}_{p}": np.empty(config.n_iter) for p, name in free}
    grid = None
    grid_rows = None
    if config.grid_locs is not None and np.size(config.grid_locs):
        g = np.asarray(config.grid_locs, dtype=np.float64).reshape(-1, data.region.dim)
        times_col = np.repeat(np.arange(n_times), g.shape[0])
        grid = IntensityGrid(np.tile(g, (n_times, 1)), times=times_col)
        grid_rows = np.vstack([st_rows(t, g) for t in range(n_times)])
    snapshots = []

    for it in range(1, config.n_iter + 1):
        states, index = build_states(data, state)
        state.thinned, state.beta, states, index = sample_thinned_all_times(
            state, data, rng,
            strategy=config.thinned_strategy, bd_moves=config.bd_moves,
            rejection_cap=config.rejection_cap, states=states, index=index,
        )
        state.beta, states, index = sample_gp_all_times(
            state, data, rng, sn_sweeps=config.sn_sweeps,
            states=states, index=index,
        )
        if free:
            state.theta, adapt = sample_theta_st(state, data, priors, adapt, rng)
        state.lambda_star = sample_lambda_all(
            state, priors.lambda_structure, data, rng
        )
        state.iteration = it
        trace_lambda[it - 1] = state.lambda_star
        trace_k[it - 1] = state.k_totals(data)
        theta_tuple = view.from_spec(state.theta)
        for p, name in free:
            trace_theta[f"{name}_{p}"][it - 1] = getattr(theta_tuple[p], name)

        if it > config.burn_in and (it - config.burn_in) % config.thin == 0:
            if grid is not None:
                lam = _grid_intensity_draw(state, data, grid_rows, states, rng)
                grid.add(lam)
            if config.keep_snapshots:
                snapshots.append(StSnapshot(
                    it,
                    [np.vstack([data.events[t], state.thinned[t]])
                     for t in range(n_times)],
                    [b.copy() for b in state.beta],
                    state.lambda_star.copy(),
                    state.theta,
                ))

    acceptance = {"theta": adapt.acceptance_rate if adapt else float("nan")}
    return StChainOutput(
        trace_lambda=trace_lambda,
        trace_k=trace_k,
        trace_theta=trace_theta,
        grid=grid,
        snapshots=snapshots,
        acceptance=acceptance,
        runtime_s=time.perf_counter() - t0,
        final_state=state,
    )


def _grid_intensity_draw(state, data, grid_rows, states, rng):
    """One joint posterior draw of lambda over the (time, grid) lattice given
    the current chain field (theta-free states are already primed)."""
    p = len(states)
    vals = np.empty((p, grid_rows.shape[0]))
    for j, st in enumerate(states):
        mean, cov = st.conditional(grid_rows)
        lower, _ = chol_with_jitter(cov)
        vals[j] = mean + lower @ rng.standard_normal(grid_rows.shape[0])
    lam = np.empty(grid_rows.shape[0])
    g = grid_rows.shape[0] // data.n_times
    for t in range(data.n_times):
        sl = slice(t * g, (t + 1) * g)
        d = data.design(t, grid_rows[sl, 1:])
        lam[sl] = state.lambda_star[t] * ndtr(
            np.einsum("np,pn->n", d, vals[:, sl])
        )
    return lam


# ---------------------------------------------------------------------------
# prediction
# ---------------------------------------------------------------------------


@dataclass
class PredictionResult:
    horizon: int
    lambda_draws: np.ndarray        # (n_draws, J)
    counts: np.ndarray              # (n_draws, J)
    grid: IntensityGrid | None      # rows: (future t, grid point)
    functionals: list               # FunctionalAccum per (region, future t)
    patterns: list | None           # per draw: list of PointPattern per time


def predict(snapshots, data: StData, structure: LambdaStructure, horizon: int,
            rng, *, grid_locs=None, functional_regions=(), n_strata=4,
            keep_patterns=False) -> PredictionResult:
    """Predictive simulation at future times T+1..T+horizon, one realization
    per retained posterior draw.

    lambda*_t comes from the prior in independent mode and from the posterior
    draw in common mode; candidate GP values extend each snapshot's field
    sequentially through the dynamic-GP conditional, so the space-time law is
    exact.
    """
    if horizon < 0:
        raise InputError("horizon must be >= 0")
    n_draws = len(snapshots)
    T = data.n_times - 1
    counts = np.zeros((n_draws, horizon))
    lam_draws = np.zeros((n_draws, horizon))
    grid = None
    g = None
    if grid_locs is not None and np.size(grid_locs) and horizon:
        g = np.asarray(grid_locs, dtype=np.float64).reshape(-1, data.region.dim)
        times_col = np.repeat(np.arange(T + 1, T + 1 + horizon), g.shape[0])
        grid = IntensityGrid(np.tile(g, (horizon, 1)), times=times_col)
    funcs = [
        [FunctionalAccum(r) for r in functional_regions] for _ in range(horizon)
    ]
    patterns = [] if keep_patterns else None

    for i, snap in enumerate(snapshots):
        models = _process_models(snap.theta)
        rows = np.vstack([st_rows(t, snap.locs[t]) for t in range(T + 1)])
        states = [
            SchurState.start(models[p], rows, np.hstack(snap.beta)[p])
            for p in range(len(models))
        ]
        draw_patterns = []
        grid_lams = []
        for j, t in enumerate(range(T + 1, T + 1 + horizon)):
            if structure.mode == "common":
                lam_t = float(snap.lambda_star[0])
            else:
                lam_t = float(rng.gamma(structure.prior.shape) / structure.prior.rate)
            lam_draws[i, j] = lam_t
            k = rng.poisson(lam_t * data.region.measure)
            kept = []
            for _ in range(k):
                s = data.region.sample(rng, 1)[0]
                row = st_rows(t, s[None, :])[0]
                vals = np.empty(len(states))
                for p, st in enumerate(states):
                    m, v = st.conditional_scalar(row)
                    vals[p] = m + math.sqrt(v) * rng.standard_normal()
                    st.append(row, vals[p])
                pred = float(data.design(t, s[None, :])[0] @ vals)
                if rng.random() < ndtr(pred):
                    kept.append(s)
            counts[i, j] = len(kept)
            if keep_patterns:
                locs = np.array(kept).reshape(-1, data.region.dim)
                draw_patterns.append(PointPattern(
                    data.region.dim, np.full(len(kept), t, dtype=np.int64),
                    locs, times_present=True,
                ))
            extra_pts = [g] if g is not None else []
            strata_pts = []
            for fa in funcs[j]:
                strata_pts.append(np.vstack([
                    s.sample(rng, 1) for s in fa.region.subdivide(n_strata)
                ]))
            extra_pts += strata_pts
            if extra_pts:
                pts = np.vstack(extra_pts)
                pred_rows = st_rows(t, pts)
                vals = np.empty((len(states), pts.shape[0]))
                for p, st in enumerate(states):
                    mean, cov = st.conditional(pred_rows)
                    lower, _ = chol_with_jitter(cov)
                    vals[p] = mean + lower @ rng.standard_normal(pts.shape[0])
                    st.append_block(pred_rows, vals[p])
                d = data.design(t, pts)
                lam_vals = lam_t * ndtr(np.einsum("np,pn->n", d, vals))
                ofs = g.shape[0] if g is not None else 0
                if g is not None:
                    grid_lams.append(lam_vals[:ofs])
                for fa in funcs[j]:
                    fa.add(float(np.mean(lam_vals[ofs:ofs + n_strata])))
                    ofs += n_strata
        if grid is not None and grid_lams:
            grid.add(np.concatenate(grid_lams))
        if keep_patterns:
            patterns.append(draw_patterns)

    flat_funcs = [fa for per_t in funcs for fa in per_t]
    return PredictionResult(horizon, lam_draws, counts, grid, flat_funcs, patterns)
