"""Batch front-end: ``coxkit simulate|fit|predict``.

Configuration is one JSON document; every subcommand is a pure function of
(config, input files, seed), so reruns with the same seed are byte-identical.
Exit codes: 0 success, 1 user/config error, 2 I/O error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import ast
import csv
import json
import sys
import time

import numpy as np
from scipy.special import ndtr, ndtri

from . import diagnostics
from .dynamic_gp import DgpProcessCov, Seasonal, st_rows
from .errors import CoxkitError, InputError, NumericalError, UnsupportedConfigError
from .kernel_gp import GpFieldSampler, GpHyper, SpatialCov
from .mcmc_spatial import (
    GibbsConfig,
    LambdaPrior,
    Param,
    PriorSpec,
    ProcessPrior,
    SpatialData,
    run_gibbs,
)
from .mcmc_spatiotemporal import (
    LambdaStructure,
    StData,
    StPriorSpec,
    StSnapshot,
    predict,
    run_gibbs_st,
)
from .point_process import PointPattern, Region, read_pattern, write_pattern

# ---------------------------------------------------------------------------
# config parsing
# ---------------------------------------------------------------------------


def _fmt(x) -> str:
    return repr(float(x))


def _parse_param(node, name) -> Param:
    if isinstance(node, (int, float)):
        return Param.fixed(node)
    if isinstance(node, dict):
        if "fixed" in node:
            return Param.fixed(node["fixed"])
        if "uniform" in node:
            lo, hi = node["uniform"]
            return Param.uniform(lo, hi)
    raise InputError(f"config field {name!r}: expected number or "
                     f"{{'fixed': v}} / {{'uniform': [lo, hi]}}")


def _parse_process(node, idx) -> ProcessPrior:
    return ProcessPrior(
        mu=_parse_param(node.get("mu", 0.0), f"processes[{idx}].mu"),
        sigma2=_parse_param(node.get("sigma2", 1.0), f"processes[{idx}].sigma2"),
        tau2=_parse_param(node.get("tau2", 1.0), f"processes[{idx}].tau2"),
        gamma=float(node.get("gamma", 1.5)),
    )


def _parse_region(cfg) -> Region:
    if "region" not in cfg:
        raise InputError("config field 'region' is required")
    return Region(tuple(map(tuple, cfg["region"])))


def _parse_lambda_prior(cfg, events=None, region=None) -> LambdaPrior:
    node = cfg.get("lambda_prior", {"type": "gamma", "shape": 1.0, "rate": 1.0})
    kind = node.get("type", "gamma")
    if kind == "gamma":
        return LambdaPrior.gamma(float(node["shape"]), float(node["rate"]))
    if kind == "exponential":
        return LambdaPrior.exponential(float(node["rate"]))
    if kind == "empirical":
        if events is None or region is None:
            raise InputError("empirical lambda prior requires observed data")
        factor = float(node.get("factor", 2.0))
        lam_hat = empirical_max_intensity(events, region)
        return LambdaPrior.exponential(1.0 / (factor * lam_hat))
    raise InputError(f"unknown lambda_prior type {kind!r}")


def empirical_max_intensity(events, region: Region) -> float:
    """Empirical near-maximum intensity: the densest axis-aligned hypercube
    (side swept over a dyadic family) still containing at least 5% of the
    events, count divided by volume."""
    events = np.asarray(events, dtype=np.float64)
    n = events.shape[0]
    if n == 0:
        raise InputError("empirical lambda prior needs at least one event")
    b = np.asarray(region.bounds)
    lens = b[:, 1] - b[:, 0]
    need = max(1, int(np.ceil(0.05 * n)))
    best = n / region.measure
    for k in range(2, 21):
        sides = lens / k
        vol = float(np.prod(sides))
        # overlapping cubes on a half-side stride
        steps = [np.arange(0.0, lens[d] - sides[d] + 1e-12, sides[d] / 2.0)
                 for d in range(region.dim)]
        mesh = np.meshgrid(*steps, indexing="ij")
        origins = b[:, 0] + np.column_stack([m.ravel() for m in mesh])
        for o in origins:
            cnt = int(np.sum(np.all((events >= o) & (events <= o + sides), axis=1)))
            if cnt >= need:
                best = max(best, cnt / vol)
    return best


_ALLOWED_FUNCS = {"exp": np.exp, "log": np.log, "sqrt": np.sqrt, "sin": np.sin,
                  "cos": np.cos, "tan": np.tan, "abs": np.abs, "Phi": ndtr}
_ALLOWED_NODES = (
    ast.Expression, ast.BinOp, ast.UnaryOp, ast.Constant, ast.Name, ast.Call,
    ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.USub, ast.UAdd, ast.Load,
)


def compile_expr(expr: str, dim: int):
    """Compile a whitelisted arithmetic expression in s1..sd (and t) into a
    vectorised callable(locs, t)."""
    tree = ast.parse(expr, mode="eval")
    names = {f"s{i + 1}" for i in range(dim)} | {"t", "pi"}
    for node in ast.walk(tree):
        if not isinstance(node, _ALLOWED_NODES):
            raise InputError(f"intensity expression: disallowed syntax {type(node).__name__}")
        if isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in _ALLOWED_FUNCS:
                raise InputError("intensity expression: only exp/log/sqrt/sin/cos/tan/abs/Phi calls allowed")
        elif isinstance(node, ast.Name):
            if node.id not in names and node.id not in _ALLOWED_FUNCS:
                raise InputError(f"intensity expression: unknown name {node.id!r}")
    code = compile(tree, "<intensity>", "eval")

    def fn(locs, t=0):
        locs = np.asarray(locs, dtype=np.float64).reshape(-1, dim)
        env = {f"s{i + 1}": locs[:, i] for i in range(dim)}
        env["t"] = t
        env["pi"] = np.pi
        env.update(_ALLOWED_FUNCS)
        return np.asarray(eval(code, {"__builtins__": {}}, env), dtype=np.float64) \
            * np.ones(locs.shape[0])

    return fn


def _parse_seasonal(cfg):
    node = cfg.get("seasonal")
    if node is None:
        return None
    return Seasonal(int(node["period"]), float(node["phase"]),
                    int(node.get("process", 1)))


def _parse_mcmc(cfg) -> dict:
    node = dict(cfg.get("mcmc", {}))
    return dict(
        n_iter=int(node.get("n_iter", 1000)),
        burn_in=int(node.get("burn_in", 0)),
        thin=int(node.get("thin", 1)),
        sn_sweeps=node.get("sn_sweeps"),
        thinned_strategy=node.get("thinned_strategy", "bd"),
        bd_moves=node.get("bd_moves"),
        rejection_cap=int(node.get("rejection_cap", 10 ** 6)),
        keep_snapshots=bool(node.get("snapshots", False)),
    )


def _grid_locs(cfg, region: Region):
    node = cfg.get("grid")
    if not node:
        return None
    return region.grid(node["resolution"])


def _functional_regions(cfg):
    return tuple(Region(tuple(map(tuple, r)))
                 for r in cfg.get("functional_regions", []))


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def _sim_spatial(cfg, region, rng):
    node = cfg.get("simulate", {"mode": "gp"})
    mode = node.get("mode", "gp")
    if mode == "intensity":
        lam_star = float(node["lambda_star"])
        lam_fn = compile_expr(node["expr"], region.dim)

        def link(s):
            lam = float(lam_fn(s[None, :])[0])
            if lam < 0 or lam > lam_star * (1 + 1e-9):
                raise InputError("intensity exceeds its lambda_star envelope")
            ratio = min(max(lam / lam_star, 1e-300), 1.0 - 1e-16)
            return float(ndtri(ratio))

        true_lam = lam_fn
    elif mode == "gp":
        procs = [_parse_process(p, i).initial_hyper()
                 for i, p in enumerate(cfg.get("processes", [{}]))]
        if len(procs) != 1:
            raise UnsupportedConfigError("spatial simulation supports one GP process")
        lam_star = float(node.get("lambda_star", cfg.get("lambda_star", 1.0)))
        sampler = GpFieldSampler(SpatialCov(procs[0]), dim=region.dim)

        def link(s):
            return sampler.draw_at(s, rng)

        true_lam = None
    else:
        raise InputError(f"unknown simulate mode {mode!r}")

    from .point_process import sim_cox_thinning

    real = sim_cox_thinning(region, lam_star, link, rng)
    return real.retained, true_lam, lam_star


def _sim_st(cfg, region, rng):
    node = cfg.get("simulate", {"mode": "gp"})
    n_times = int(cfg.get("n_times", 1))
    seasonal = _parse_seasonal(cfg)
    mode = node.get("mode", "gp")
    pats = []
    true_fn = None
    if mode == "intensity":
        lam_star = float(node["lambda_star"])
        lam_fn = compile_expr(node["expr"], region.dim)
        from .point_process import sim_cox_thinning

        for t in range(n_times):
            def link(s, _t=t):
                lam = float(lam_fn(s[None, :], _t)[0])
                if lam < 0 or lam > lam_star * (1 + 1e-9):
                    raise InputError("intensity exceeds its lambda_star envelope")
                ratio = min(max(lam / lam_star, 1e-300), 1.0 - 1e-16)
                return float(ndtri(ratio))

            real = sim_cox_thinning(region, lam_star, link, rng, time_index=t)
            pats.append(real.retained)
        true_fn = lam_fn
    elif mode == "gp":
        priors = _parse_st_priors(cfg)
        spec = priors.initial_spec()
        lam_star = float(node.get("lambda_star", 1.0))
        models = [DgpProcessCov(spec.init_hyper[p], spec.dist_hyper[p],
                                spec.transition[p])
                  for p in range(spec.n_processes)]
        samplers = [GpFieldSampler(m, dim=region.dim + 1) for m in models]
        data_stub = StData(region, [np.empty((0, region.dim))] * n_times,
                           seasonal=seasonal)
        from .point_process import sim_cox_thinning

        for t in range(n_times):
            def link(s, _t=t):
                row = st_rows(_t, s[None, :])[0]
                vals = np.array([sm.draw_at(row, rng) for sm in samplers])
                return float(data_stub.design(_t, s[None, :])[0] @ vals)

            real = sim_cox_thinning(region, lam_star, link, rng, time_index=t)
            pats.append(real.retained)
    else:
        raise InputError(f"unknown simulate mode {mode!r}")
    return pats, true_fn, lam_star


def cmd_simulate(cfg, out_dir, seed) -> None:
    region = _parse_region(cfg)
    rng = np.random.default_rng(seed)
    model = cfg.get("model", "spatial")
    out_dir.mkdir(parents=True, exist_ok=True)
    grid = _grid_locs(cfg, region)
    if model == "spatial":
        pattern, true_fn, _ = _sim_spatial(cfg, region, rng)
        n_times = 1
    elif model == "spatiotemporal":
        pats, true_fn, _ = _sim_st(cfg, region, rng)
        n_times = len(pats)
        pattern = PointPattern(
            region.dim,
            np.concatenate([p.times for p in pats]) if pats else np.empty(0, np.int64),
            np.vstack([p.locs for p in pats]) if pats else None,
            times_present=True,
        )
    else:
        raise InputError(f"unknown model {model!r}")
    write_pattern(out_dir / "pattern.csv", pattern)
    if grid is not None and true_fn is not None and cfg.get("simulate", {}).get("mode") == "intensity":
        with open(out_dir / "true_grid.csv", "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["t"] + [f"x{i + 1}" for i in range(region.dim)] + ["lambda"])
            for t in range(n_times):
                lam = true_fn(grid, t)
                for g, l in zip(grid, lam):
                    wr.writerow([t] + [_fmt(v) for v in g] + [_fmt(l)])


# ---------------------------------------------------------------------------
# fit
# ---------------------------------------------------------------------------


def _parse_st_priors(cfg) -> StPriorSpec:
    procs = [_parse_process(p, i) for i, p in enumerate(cfg.get("processes", [{}]))]
    dist_nodes = cfg.get("disturbances")
    if dist_nodes is None:
        dist_nodes = [None] * len(procs)
    dist = [None if d is None else _parse_process(d, i)
            for i, d in enumerate(dist_nodes)]
    lam_prior = _parse_lambda_prior(cfg)
    structure = LambdaStructure(cfg.get("lambda_structure", "common"), lam_prior)
    transition = cfg.get("transition")
    return StPriorSpec(structure, tuple(procs), tuple(dist),
                       None if transition is None else tuple(transition),
                       _parse_seasonal(cfg))


def _write_trace_spatial(path, out):
    theta_cols = _theta_columns(out.trace_theta)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["iter", "lambda_star"] + theta_cols + ["K"])
        for i in range(len(out.trace_lambda)):
            row = [i + 1, _fmt(out.trace_lambda[i])]
            row += [_fmt(out.trace_theta[c][i]) for c in theta_cols]
            row.append(int(out.trace_k[i]))
            wr.writerow(row)


def _theta_columns(trace_theta) -> list:
    cols = list(trace_theta)
    order = {"sigma2": 0, "tau2": 1, "mu": 2}
    cols.sort(key=lambda c: (order.get(c.rsplit("_", 1)[0], 9), c))
    return cols


def _write_trace_st(path, out, n_times):
    theta_cols = _theta_columns(out.trace_theta)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(
            ["iter"] + [f"lambda_star_{t}" for t in range(n_times)]
            + theta_cols + [f"K_{t}" for t in range(n_times)]
        )
        for i in range(out.trace_lambda.shape[0]):
            row = [i + 1] + [_fmt(v) for v in out.trace_lambda[i]]
            row += [_fmt(out.trace_theta[c][i]) for c in theta_cols]
            row += [int(v) for v in out.trace_k[i]]
            wr.writerow(row)


def _write_grid(path, grid, dim, times=None):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["t"] + [f"x{i + 1}" for i in range(dim)] + ["mean", "sd", "n"])
        mean, sd = grid.mean(), grid.sd()
        tcol = grid.times if grid.times is not None else np.zeros(len(mean), int)
        for i in range(len(mean)):
            wr.writerow([int(tcol[i])] + [_fmt(v) for v in grid.locs[i]]
                        + [_fmt(mean[i]), _fmt(sd[i]), grid.n_samples])


def _save_snapshots_spatial(path, out):
    snaps = out.snapshots
    offsets = np.cumsum([0] + [s.locs.shape[0] for s in snaps])
    theta = np.array([
        [[h.mu, h.sigma2, h.tau2, h.gamma] for h in s.theta] for s in snaps
    ])
    np.savez(
        path,
        model=np.array(["spatial"]),
        iters=np.array([s.iteration for s in snaps]),
        offsets=offsets,
        locs=np.vstack([s.locs for s in snaps]) if snaps else np.empty((0, 1)),
        beta=np.hstack([s.beta for s in snaps]) if snaps else np.empty((1, 0)),
        lam=np.array([s.lambda_star for s in snaps]),
        theta=theta,
    )


def _save_snapshots_st(path, out, data):
    snaps = out.snapshots
    n_times = data.n_times
    kw = dict(
        model=np.array(["spatiotemporal"]),
        n_times=np.array([n_times]),
        iters=np.array([s.iteration for s in snaps]),
        lam=np.vstack([s.lambda_star for s in snaps]) if snaps else np.empty((0, n_times)),
    )
    spec0 = snaps[0].theta if snaps else None
    init = np.array([
        [[h.mu, h.sigma2, h.tau2, h.gamma] for h in s.theta.init_hyper]
        for s in snaps
    ])
    dist = np.array([
        [[0.0, h.sigma2, h.tau2, h.gamma] if h is not None else [np.nan] * 4
         for h in s.theta.dist_hyper]
        for s in snaps
    ])
    kw["theta_init"] = init
    kw["theta_dist"] = dist
    kw["transition"] = np.array(spec0.transition) if spec0 else np.empty(0)
    for t in range(n_times):
        kw[f"offsets_{t}"] = np.cumsum([0] + [s.locs[t].shape[0] for s in snaps])
        kw[f"locs_{t}"] = np.vstack([s.locs[t] for s in snaps]) if snaps else np.empty((0, 1))
        kw[f"beta_{t}"] = np.hstack([s.beta[t] for s in snaps]) if snaps else np.empty((1, 0))
    np.savez(path, **kw)


def _summary(cfg, out, trace_cols, acceptance, runtime) -> dict:
    posterior = {}
    ess = {}
    for name, arr in trace_cols.items():
        arr = np.asarray(arr, dtype=np.float64)
        posterior[name] = {"mean": float(arr.mean()), "sd": float(arr.std(ddof=1))
                           if arr.size > 1 else 0.0}
        ess[name] = diagnostics.ess_imse(arr)
    return {
        "posterior": posterior,
        "ess": ess,
        "acceptance": acceptance,
        "runtime_s": runtime,
        "config_echo": cfg,
    }


def cmd_fit(cfg, data_path, out_dir, seed) -> None:
    region = _parse_region(cfg)
    pattern = read_pattern(data_path)
    if pattern.dim != region.dim:
        raise InputError(
            f"data dimension {pattern.dim} does not match region dimension {region.dim}"
        )
    if pattern.n_cov > 0:
        raise UnsupportedConfigError(
            "fitting with per-event covariate columns is not supported via the "
            "CLI; intercept-only and seasonal models are available"
        )
    inside = region.contains(pattern.locs) if pattern.n_events else np.ones(0, bool)
    if not np.all(inside):
        bad = (np.nonzero(~inside)[0] + 1).tolist()
        raise InputError(f"data rows outside region: {bad}")
    model = cfg.get("model", "spatial")
    mcmc = _parse_mcmc(cfg)
    out_dir.mkdir(parents=True, exist_ok=True)
    grid = _grid_locs(cfg, region)
    t0 = time.perf_counter()
    if model == "spatial":
        if np.any(pattern.times > 0):
            raise InputError("spatial model, but the data carry time indices > 0")
        procs = [_parse_process(p, i) for i, p in enumerate(cfg.get("processes", [{}]))]
        if len(procs) != 1:
            raise UnsupportedConfigError("CLI spatial fits are intercept-only (one process)")
        lam_prior = _parse_lambda_prior(cfg, pattern.locs, region)
        priors = PriorSpec(lam_prior, tuple(procs))
        data = SpatialData(region, pattern.locs)
        config = GibbsConfig(
            seed=seed, grid_locs=grid,
            functional_regions=_functional_regions(cfg),
            n_strata=int(cfg.get("n_strata", 4)), **mcmc,
        )
        out = run_gibbs(data, priors, config)
        _write_trace_spatial(out_dir / "trace.csv", out)
        if out.grid is not None:
            _write_grid(out_dir / "grid.csv", out.grid, region.dim)
        if mcmc["keep_snapshots"]:
            _save_snapshots_spatial(out_dir / "snapshots.npz", out)
        cols = {"lambda_star": out.trace_lambda, "K": out.trace_k.astype(float)}
        cols.update(out.trace_theta)
        summary = _summary(cfg, out, cols, out.acceptance,
                           time.perf_counter() - t0)
    elif model == "spatiotemporal":
        n_times = int(pattern.times.max()) + 1 if pattern.n_events else int(
            cfg.get("n_times", 1))
        if "n_times" in cfg:
            n_times = max(n_times, int(cfg["n_times"]))
        events = [pattern.for_time(t) for t in range(n_times)]
        priors = _parse_st_priors(cfg)
        data = StData(region, events, seasonal=_parse_seasonal(cfg))
        config = GibbsConfig(
            seed=seed, grid_locs=grid,
            n_strata=int(cfg.get("n_strata", 4)), **mcmc,
        )
        out = run_gibbs_st(data, priors, config)
        _write_trace_st(out_dir / "trace.csv", out, n_times)
        if out.grid is not None:
            _write_grid(out_dir / "grid.csv", out.grid, region.dim)
        if mcmc["keep_snapshots"]:
            _save_snapshots_st(out_dir / "snapshots.npz", out, data)
        cols = {f"lambda_star_{t}": out.trace_lambda[:, t] for t in range(n_times)}
        cols.update({f"K_{t}": out.trace_k[:, t].astype(float) for t in range(n_times)})
        cols.update(out.trace_theta)
        summary = _summary(cfg, out, cols, out.acceptance,
                           time.perf_counter() - t0)
    else:
        raise InputError(f"unknown model {model!r}")
    with open(out_dir / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# predict
# ---------------------------------------------------------------------------


def _load_snapshots_st(npz):
    n_times = int(npz["n_times"][0])
    iters = npz["iters"]
    snaps = []
    for j in range(len(iters)):
        locs, beta = [], []
        for t in range(n_times):
            o = npz[f"offsets_{t}"]
            locs.append(npz[f"locs_{t}"][o[j]:o[j + 1]])
            beta.append(npz[f"beta_{t}"][:, o[j]:o[j + 1]])
        init = tuple(GpHyper(*row) for row in npz["theta_init"][j])
        dist = tuple(
            None if np.isnan(row[1]) else GpHyper(0.0, row[1], row[2], row[3])
            for row in npz["theta_dist"][j]
        )
        from .dynamic_gp import DgpSpec

        spec = DgpSpec(init, dist, tuple(npz["transition"]))
        snaps.append(StSnapshot(int(iters[j]), locs, beta, npz["lam"][j], spec))
    return snaps, n_times


def cmd_predict(cfg, fit_dir, out_dir, seed) -> None:
    region = _parse_region(cfg)
    horizon = int(cfg.get("prediction", {}).get("horizon", 0))
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    counts_path = out_dir / "counts.csv"
    if horizon == 0:
        with open(counts_path, "w", newline="") as fh:
            csv.writer(fh).writerow(["t", "draw", "count"])
        return
    if cfg.get("model", "spatial") != "spatiotemporal":
        raise UnsupportedConfigError("prediction over future times requires the "
                                     "spatiotemporal model")
    snap_path = fit_dir / "snapshots.npz"
    if not snap_path.exists():
        raise InputError(
            f"{snap_path} not found: run `coxkit fit` with mcmc.snapshots=true first"
        )
    npz = np.load(snap_path)
    if str(npz["model"][0]) != "spatiotemporal":
        raise InputError("snapshots were produced by a spatial fit")
    snaps, n_times = _load_snapshots_st(npz)
    seasonal = _parse_seasonal(cfg)
    data = StData(region, [np.empty((0, region.dim))] * n_times, seasonal=seasonal)
    priors = _parse_st_priors(cfg)
    grid = _grid_locs(cfg, region)
    res = predict(
        snaps, data, priors.lambda_structure, horizon, rng,
        grid_locs=grid, functional_regions=_functional_regions(cfg),
        n_strata=int(cfg.get("n_strata", 4)),
    )
    with open(counts_path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["t", "draw", "count"])
        T = n_times - 1
        for j in range(horizon):
            for i in range(res.counts.shape[0]):
                wr.writerow([T + 1 + j, i, int(res.counts[i, j])])
    if res.grid is not None:
        _write_grid(out_dir / "pred_grid.csv", res.grid, region.dim)
    if res.functionals:
        with open(out_dir / "functionals.csv", "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["region_index", "t", "estimate", "se", "n"])
            n_regions = len(_functional_regions(cfg))
            for i, fa in enumerate(res.functionals):
                t = n_times + i // n_regions
                wr.writerow([i % n_regions, t, _fmt(fa.estimate), _fmt(fa.se), fa.n])


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def main(argv=None) -> int:
    from pathlib import Path

    parser = argparse.ArgumentParser(prog="coxkit")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("simulate", "fit", "predict"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--out", required=True)
        p.add_argument("--seed", type=int, default=None)
        if name == "fit":
            p.add_argument("--data", required=True)
        if name == "predict":
            p.add_argument("--fit", required=True, dest="fit_dir")
    args = parser.parse_args(argv)
    try:
        with open(args.config) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        print(f"coxkit: cannot read config: {exc}", file=sys.stderr)
        return 2
    except json.JSONDecodeError as exc:
        print(f"coxkit: config is not valid JSON: {exc}", file=sys.stderr)
        return 1
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    try:
        if args.command == "simulate":
            cmd_simulate(cfg, Path(args.out), seed)
        elif args.command == "fit":
            cmd_fit(cfg, Path(args.data), Path(args.out), seed)
        else:
            cmd_predict(cfg, Path(args.fit_dir), Path(args.out), seed)
    except (InputError, UnsupportedConfigError, KeyError) as exc:
        print(f"coxkit: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"coxkit: I/O error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"coxkit: numerical failure: {exc}", file=sys.stderr)
        return 3
    except CoxkitError as exc:
        print(f"coxkit: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
