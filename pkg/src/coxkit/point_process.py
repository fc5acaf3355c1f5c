"""Point-pattern data model, homogeneous Poisson simulation, and exact Cox
simulation by thinning of a dominating homogeneous process."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from .errors import InputError


@dataclass(frozen=True)
class Region:
    """Axis-aligned hyper-rectangle."""

    bounds: tuple

    def __post_init__(self):
        b = np.asarray(self.bounds, dtype=np.float64)
        if b.ndim != 2 or b.shape[1] != 2:
            raise InputError("bounds must be a list of (low, high) pairs")
        if not np.all(b[:, 1] > b[:, 0]):
            raise InputError("each axis needs high > low")
        object.__setattr__(self, "bounds", tuple(map(tuple, b)))

    @property
    def dim(self) -> int:
        return len(self.bounds)

    @property
    def measure(self) -> float:
        b = np.asarray(self.bounds)
        return float(np.prod(b[:, 1] - b[:, 0]))

    def contains(self, locs) -> np.ndarray:
        locs = np.atleast_2d(np.asarray(locs, dtype=np.float64))
        b = np.asarray(self.bounds)
        return np.all((locs >= b[:, 0]) & (locs <= b[:, 1]), axis=1)

    def sample(self, rng, n: int) -> np.ndarray:
        b = np.asarray(self.bounds)
        return b[:, 0] + rng.random((n, self.dim)) * (b[:, 1] - b[:, 0])

    def grid(self, resolution) -> np.ndarray:
        """Cell-center grid with ``resolution`` cells per axis."""
        res = np.broadcast_to(np.asarray(resolution, dtype=int), (self.dim,))
        axes = []
        for (lo, hi), r in zip(self.bounds, res):
            step = (hi - lo) / r
            axes.append(lo + step * (np.arange(r) + 0.5))
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.column_stack([m.ravel() for m in mesh])

    def subdivide(self, n_strata: int) -> list:
        """Equal-volume axis-aligned split along the longest axis."""
        b = np.asarray(self.bounds, dtype=np.float64)
        axis = int(np.argmax(b[:, 1] - b[:, 0]))
        edges = np.linspace(b[axis, 0], b[axis, 1], n_strata + 1)
        out = []
        for i in range(n_strata):
            nb = b.copy()
            nb[axis] = (edges[i], edges[i + 1])
            out.append(Region(tuple(map(tuple, nb))))
        return out


@dataclass
class PointPattern:
    """Event locations with integer time indices and optional covariates."""

    dim: int
    times: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    locs: np.ndarray = None
    covariates: np.ndarray = None
    times_present: bool = False

    def __post_init__(self):
        if self.locs is None:
            self.locs = np.empty((0, self.dim))
        self.locs = np.asarray(self.locs, dtype=np.float64).reshape(-1, self.dim)
        self.times = np.asarray(self.times, dtype=np.int64).ravel()
        if self.covariates is None:
            self.covariates = np.empty((len(self.locs), 0))
        self.covariates = np.asarray(self.covariates, dtype=np.float64)
        if self.covariates.ndim == 1:
            self.covariates = self.covariates[:, None]
        if self.times.size != self.locs.shape[0]:
            raise InputError("times and locations length mismatch")
        if self.covariates.shape[0] != self.locs.shape[0]:
            raise InputError("covariates and locations length mismatch")
        if np.any(self.times < 0):
            raise InputError("time indices must be >= 0")

    @property
    def n_events(self) -> int:
        return self.locs.shape[0]

    @property
    def n_cov(self) -> int:
        return self.covariates.shape[1]

    def for_time(self, t: int) -> np.ndarray:
        return self.locs[self.times == t]

    def equals(self, other: "PointPattern") -> bool:
        return (
            self.dim == other.dim
            and self.times_present == other.times_present
            and np.array_equal(self.times, other.times)
            and np.array_equal(self.locs, other.locs)
            and np.array_equal(self.covariates, other.covariates)
        )


@dataclass
class ThinnedRealization:
    """Result of one exact Cox simulation: retained events, thinned events,
    and the linear predictor (W beta) at every candidate."""

    retained: PointPattern
    thinned: PointPattern
    gp_retained: np.ndarray
    gp_thinned: np.ndarray

    @property
    def k_total(self) -> int:
        return self.retained.n_events + self.thinned.n_events

    @property
    def gp_values(self) -> np.ndarray:
        return np.concatenate([self.gp_retained, self.gp_thinned])


def sim_homogeneous_pp(region: Region, rate: float, rng) -> np.ndarray:
    """Homogeneous Poisson process draw: (n, d) locations."""
    if not np.isfinite(rate) or rate < 0:
        raise InputError(f"rate must be finite and >= 0, got {rate}")
    n = rng.poisson(rate * region.measure)
    return region.sample(rng, n)


def sim_cox_thinning(region: Region, lambda_star: float, link_input, rng,
                     time_index: int = 0) -> ThinnedRealization:
    """Exact Cox-process simulation by thinning.

    Candidates arrive as a homogeneous Poisson process with rate
    ``lambda_star``; each is retained with probability Phi(link_input(s)).
    ``link_input`` is called once per candidate, in order, so a stateful
    closure can realise the exact sequential GP law.
    """
    if not np.isfinite(lambda_star) or lambda_star < 0:
        raise InputError(f"lambda_star must be finite and >= 0, got {lambda_star}")
    k = rng.poisson(lambda_star * region.measure)
    locs = np.empty((k, region.dim))
    preds = np.empty(k)
    keep = np.empty(k, dtype=bool)
    for i in range(k):
        locs[i] = region.sample(rng, 1)[0]
        preds[i] = link_input(locs[i])
        keep[i] = rng.random() < ndtr(preds[i])
    t = np.full(k, time_index, dtype=np.int64)
    retained = PointPattern(region.dim, t[keep], locs[keep], times_present=time_index > 0)
    thinned = PointPattern(region.dim, t[~keep], locs[~keep], times_present=time_index > 0)
    return ThinnedRealization(retained, thinned, preds[keep], preds[~keep])


# ---------------------------------------------------------------------------
# CSV schema: header "t,x1,...,xd[,w1,...,wq]"
# ---------------------------------------------------------------------------


def write_pattern(path, pattern: PointPattern) -> None:
    header = ["t"] + [f"x{i + 1}" for i in range(pattern.dim)] + [
        f"w{j + 1}" for j in range(pattern.n_cov)
    ]
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(header)
        for i in range(pattern.n_events):
            row = [int(pattern.times[i])]
            row += [repr(float(v)) for v in pattern.locs[i]]
            row += [repr(float(v)) for v in pattern.covariates[i]]
            wr.writerow(row)


def read_pattern(path) -> PointPattern:
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        try:
            header = next(rd)
        except StopIteration:
            raise InputError(f"{path}: empty file, expected a header row") from None
        header = [h.strip() for h in header]
        if not header or header[0] != "t":
            raise InputError(f"{path}: header must start with 't'")
        dim = sum(1 for h in header if h.startswith("x"))
        n_cov = sum(1 for h in header if h.startswith("w"))
        if dim == 0 or header != ["t"] + [f"x{i + 1}" for i in range(dim)] + [
            f"w{j + 1}" for j in range(n_cov)
        ]:
            raise InputError(f"{path}: malformed header {header}")
        times, locs, covs = [], [], []
        for rownum, row in enumerate(rd, start=1):
            if not row:
                continue
            if len(row) != 1 + dim + n_cov:
                raise InputError(
                    f"{path}: row {rownum} has {len(row)} columns, expected "
                    f"{1 + dim + n_cov}"
                )
            try:
                times.append(int(row[0]))
                locs.append([float(v) for v in row[1:1 + dim]])
                covs.append([float(v) for v in row[1 + dim:]])
            except ValueError as exc:
                raise InputError(f"{path}: row {rownum}: {exc}") from None
    times = np.asarray(times, dtype=np.int64)
    n = times.size
    loc_arr = np.asarray(locs, dtype=np.float64).reshape(n, dim) if n else \
        np.empty((0, dim))
    cov_arr = np.asarray(covs, dtype=np.float64).reshape(n, n_cov) if n else \
        np.empty((0, n_cov))
    return PointPattern(
        dim, times, loc_arr, cov_arr,
        times_present=bool(n) and bool(np.any(times > 0)),
    )
