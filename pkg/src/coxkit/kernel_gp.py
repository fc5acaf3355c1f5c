"""Stationary Gaussian-process kernels, factorizations and conditionals.

Everything the samplers need from the GP side lives here: the
gamma-exponential covariance family, jitter-guarded Cholesky, exact
conditional (predictive) laws, and an incrementally updatable state that
supports appending and dropping conditioning points at O(n^2) cost via
Schur-complement updates of the precision matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import accel
from .errors import InputError, NumericalError

# jitter escalation for near-singular covariance matrices (relative to the
# marginal variance scale): 1e-10, 1e-9, ..., 1e-6
_JITTER_START = 1e-10
_JITTER_MAX = 1e-6


@dataclass(frozen=True)
class GpHyper:
    """Hyperparameters of one univariate stationary GP.

    Covariance between two points at distance r is
    ``sigma2 * exp(-r**gamma / (2 * tau2))`` and the mean function is the
    constant ``mu``.
    """

    mu: float
    sigma2: float
    tau2: float
    gamma: float = 1.5

    def __post_init__(self):
        if not (self.sigma2 > 0):
            raise InputError(f"sigma2 must be > 0, got {self.sigma2}")
        if not (self.tau2 > 0):
            raise InputError(f"tau2 must be > 0, got {self.tau2}")
        if not (0 < self.gamma <= 2):
            raise InputError(f"gamma must be in (0, 2], got {self.gamma}")

    def replace(self, **kw) -> "GpHyper":
        d = dict(mu=self.mu, sigma2=self.sigma2, tau2=self.tau2, gamma=self.gamma)
        d.update(kw)
        return GpHyper(**d)


def _as_points(x) -> np.ndarray:
    """Coerce to an (n, d) float array; 1-d input is treated as n points in 1-d."""
    a = np.asarray(x, dtype=np.float64)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise InputError(f"expected point array, got shape {np.shape(x)}")
    return a


def kernel_eval(h: GpHyper, s, s_prime) -> float:
    """Covariance between two points under ``h``."""
    a = np.atleast_1d(np.asarray(s, dtype=np.float64))
    b = np.atleast_1d(np.asarray(s_prime, dtype=np.float64))
    if a.shape != b.shape or a.ndim != 1:
        raise InputError(f"point dimension mismatch: {a.shape} vs {b.shape}")
    r = float(np.sqrt(np.sum((a - b) ** 2)))
    return h.sigma2 * float(np.exp(-(r ** h.gamma) / (2.0 * h.tau2)))


def chol_with_jitter(mat: np.ndarray, scale: float | None = None):
    """Lower Cholesky factor of ``mat`` (+ escalating diagonal jitter if needed).

    Returns (lower, jitter_used). Raises NumericalError carrying the smallest
    eigenvalue estimate if the factorization still fails at the jitter cap.
    """
    n = mat.shape[0]
    if scale is None:
        scale = float(np.mean(np.diag(mat))) if n else 1.0
    try:
        return np.linalg.cholesky(mat), 0.0
    except np.linalg.LinAlgError:
        pass
    jitter = _JITTER_START * scale
    eye = np.eye(n)
    while jitter <= _JITTER_MAX * scale * (1 + 1e-12):
        try:
            return np.linalg.cholesky(mat + jitter * eye), jitter
        except np.linalg.LinAlgError:
            jitter *= 10.0
    min_eig = float(np.linalg.eigvalsh(mat).min())
    raise NumericalError(
        f"covariance factorization failed at maximum jitter "
        f"{_JITTER_MAX * scale:.3e}; minimum eigenvalue ~ {min_eig:.3e}"
    )


@dataclass
class CovFactor:
    """Kernel matrix over a location set together with its Cholesky factor."""

    locations: np.ndarray
    matrix: np.ndarray
    lower: np.ndarray
    jitter_used: float


def build_cov_factor(h: GpHyper, locations) -> CovFactor:
    locs = _as_points(locations)
    if locs.shape[0] < 1:
        raise InputError("need at least one location")
    if not np.all(np.isfinite(locs)):
        raise InputError("locations must be finite")
    mat = accel.kernel_sym(locs, h.sigma2, h.tau2, h.gamma)
    lower, jit = chol_with_jitter(mat, h.sigma2)
    return CovFactor(locations=locs, matrix=mat, lower=lower, jitter_used=jit)


def gp_conditional(h: GpHyper, known_locs, known_vals, new_locs):
    """Gaussian law at ``new_locs`` given observed process values.

    Returns (mean, cov). With no known points this is the prior.
    """
    new = _as_points(new_locs)
    known = _as_points(known_locs) if np.size(known_locs) else np.empty((0, new.shape[1]))
    vals = np.asarray(known_vals, dtype=np.float64).ravel()
    if vals.size != known.shape[0]:
        raise InputError(
            f"known_vals length {vals.size} != number of known locations {known.shape[0]}"
        )
    if known.shape[0] == 0:
        mean = np.full(new.shape[0], h.mu)
        cov = accel.kernel_sym(new, h.sigma2, h.tau2, h.gamma)
        return mean, cov
    if known.shape[1] != new.shape[1]:
        raise InputError("known and new locations must share dimension")
    ckk = accel.kernel_sym(known, h.sigma2, h.tau2, h.gamma)
    lower, _ = chol_with_jitter(ckk, h.sigma2)
    kqk = accel.kernel_cross(new, known, h.sigma2, h.tau2, h.gamma)
    a = np.linalg.solve(lower, kqk.T)          # n_known x n_new
    z = np.linalg.solve(lower, vals - h.mu)
    mean = h.mu + a.T @ z
    cov = accel.kernel_sym(new, h.sigma2, h.tau2, h.gamma) - a.T @ a
    cov = 0.5 * (cov + cov.T)
    return mean, cov


def gp_logpdf(h: GpHyper, locations, values) -> float:
    """Log density of the GP at a finite location set."""
    locs = _as_points(locations)
    v = np.asarray(values, dtype=np.float64).ravel()
    fac = build_cov_factor(h, locs)
    z = np.linalg.solve(fac.lower, v - h.mu)
    logdet = 2.0 * np.sum(np.log(np.diag(fac.lower)))
    return float(-0.5 * (v.size * np.log(2.0 * np.pi) + logdet + z @ z))


# ---------------------------------------------------------------------------
# covariance models: spatial kernel now, space-time kernels in dynamic_gp
# ---------------------------------------------------------------------------


class SpatialCov:
    """Covariance model over spatial points for a single GP."""

    def __init__(self, h: GpHyper):
        self.h = h

    def mean(self, pts):
        return np.full(pts.shape[0], self.h.mu)

    def var(self, pts):
        return np.full(pts.shape[0], self.h.sigma2)

    def cov_sym(self, pts):
        return accel.kernel_sym(pts, self.h.sigma2, self.h.tau2, self.h.gamma)

    def cov(self, a, b):
        return accel.kernel_cross(a, b, self.h.sigma2, self.h.tau2, self.h.gamma)


# ---------------------------------------------------------------------------
# incremental conditioning state
# ---------------------------------------------------------------------------

_REBUILD_EVERY = 2048


class SchurState:
    """Incrementally maintained Gaussian conditioning state.

    Keeps the dense precision matrix of the covariance over the current point
    set inside capacity-doubling buffers, extended in place through Schur
    complements (O(n^2) per point, no reallocation) and shrunk by swapping the
    doomed point with the last row and downdating the border. ``values`` may
    be absent for factor-only use, otherwise ``w = prec (values - mean)`` is
    cached for O(n) conditional means.
    """

    def __init__(self, model, dim, values_tracked=True, capacity=64):
        self.model = model
        self.dim = dim
        self._n = 0
        self._cap = capacity
        self._pts = np.empty((capacity, dim))
        self._prec = np.empty((capacity, capacity))
        self._vals = np.empty(capacity) if values_tracked else None
        self._w = np.empty(capacity) if values_tracked else None
        self.jitter_used = 0.0
        self._ops = 0

    @classmethod
    def start(cls, model, pts, values=None):
        pts = np.asarray(pts, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[:, None]
        n, dim = pts.shape
        st = cls(model, dim, values_tracked=values is not None,
                 capacity=max(64, 2 * n))
        st._n = n
        st._pts[:n] = pts
        if values is not None:
            st._vals[:n] = np.asarray(values, dtype=np.float64)
        st._rebuild()
        return st

    # -- views ---------------------------------------------------------------
    @property
    def n(self) -> int:
        return self._n

    @property
    def pts(self) -> np.ndarray:
        return self._pts[:self._n]

    @property
    def prec(self) -> np.ndarray:
        return self._prec[:self._n, :self._n]

    @property
    def values(self):
        return None if self._vals is None else self._vals[:self._n]

    @property
    def w(self):
        return None if self._w is None else self._w[:self._n]

    # -- internals -------------------------------------------------------------
    def _grow(self, need):
        if need <= self._cap:
            return
        cap = self._cap
        while cap < need:
            cap *= 2
        pts = np.empty((cap, self.dim))
        pts[:self._n] = self._pts[:self._n]
        prec = np.empty((cap, cap))
        prec[:self._n, :self._n] = self._prec[:self._n, :self._n]
        self._pts, self._prec = pts, prec
        if self._vals is not None:
            vals = np.empty(cap)
            vals[:self._n] = self._vals[:self._n]
            self._vals = vals
            w = np.empty(cap)
            w[:self._n] = self._w[:self._n]
            self._w = w
        self._cap = cap

    def _refresh_w(self):
        if self._vals is not None and self._n:
            dev = self._vals[:self._n] - self.model.mean(self._pts[:self._n])
            np.matmul(self._prec[:self._n, :self._n], dev,
                      out=self._w[:self._n])

    def _rebuild(self, extra_jitter=0.0):
        n = self._n
        if n:
            cov = self.model.cov_sym(self._pts[:n])
            if extra_jitter:
                cov = cov + extra_jitter * np.eye(n)
            lower, jit = chol_with_jitter(cov)
            li = np.linalg.inv(lower)
            self._prec[:n, :n] = li.T @ li
            self.jitter_used = max(self.jitter_used, jit)
        self._ops = 0
        self._refresh_w()

    # -- queries ---------------------------------------------------------------
    def conditional(self, new_pts):
        """(mean, cov) of the process at new points given the current set."""
        new = np.asarray(new_pts, dtype=np.float64)
        if new.ndim == 1:
            new = new[:, None]
        pm = self.model.mean(new)
        cq = self.model.cov_sym(new)
        if self._n == 0:
            return pm, cq
        k = self.model.cov(new, self.pts)       # (m, n)
        kp = k @ self.prec
        cov = cq - kp @ k.T
        cov = 0.5 * (cov + cov.T)
        mean = pm + k @ self.w
        return mean, cov

    def conditional_scalar(self, new_pt):
        """(mean, var) at a single point; fast path for candidate loops."""
        mean, var, _, _, _ = self.conditional_scalar_cached(new_pt)
        return mean, var

    def conditional_scalar_cached(self, new_pt):
        """Like conditional_scalar but also returns (k, prec k, raw Schur
        complement), reusable by ``append`` to avoid a second O(n^2) solve."""
        new = np.asarray(new_pt, dtype=np.float64).reshape(1, -1)
        m0 = float(self.model.mean(new)[0])
        v0 = float(self.model.var(new)[0])
        if self._n == 0:
            return m0, v0, None, None, v0
        k = self.model.cov(new, self.pts)[0]
        pk = self.prec @ k
        s = v0 - float(k @ pk)
        mean = m0 + float(k @ self.w)
        return mean, max(s, 1e-12 * v0), k, pk, s

    def conditional_rows(self, rows):
        """Gaussian law of the tracked points ``rows`` given all the others.

        Uses the precision partition identity: the conditional covariance is
        inv(P_BB) and the conditional mean is v_B - inv(P_BB) w_B, with w the
        cached prec (v - mean). O(|B|^2 (|B| + 1)) and no structural change.
        With ``rows`` covering the whole set the conditioning set is empty and
        the prior is returned directly.
        """
        rows = np.asarray(rows, dtype=np.intp)
        if rows.size == 0:
            return np.empty(0), np.empty((0, 0))
        if rows.size == self._n:
            pts = self._pts[rows]
            return self.model.mean(pts), self.model.cov_sym(pts)
        pbb = self.prec[np.ix_(rows, rows)]
        lower, _ = chol_with_jitter(pbb, float(np.mean(np.diag(pbb))))
        li = np.linalg.inv(lower)
        cov = li.T @ li
        mean = self.values[rows] - cov @ self.w[rows]
        return mean, 0.5 * (cov + cov.T)

    def set_values(self, rows, new_vals):
        """Replace tracked values at ``rows`` (points unchanged)."""
        self._vals[np.asarray(rows, dtype=np.intp)] = new_vals
        self._refresh_w()

    def inverse(self) -> np.ndarray:
        """Current precision matrix (copy)."""
        return self.prec.copy()

    # -- updates ----------------------------------------------------------------
    def append(self, new_pt, value=None, cache=None):
        """Add one point in place; returns its row index.

        ``cache = (k, prec k, raw Schur complement)`` from
        conditional_scalar_cached skips recomputing the O(n^2) solve. The
        cached conditional-mean vector w is maintained with an O(n) update.
        """
        new = np.asarray(new_pt, dtype=np.float64).reshape(1, -1)
        n = self._n
        self._grow(n + 1)
        val = 0.0 if value is None else float(value)
        if n == 0:
            v0 = float(self.model.var(new)[0])
            self._pts[0] = new[0]
            self._prec[0, 0] = 1.0 / v0
            self._n = 1
            if self._vals is not None:
                self._vals[0] = val
                self._w[0] = (val - float(self.model.mean(new)[0])) / v0
            self._ops += 1
            return 0
        if cache is None:
            k = self.model.cov(new, self.pts)[0]
            pk = self.prec @ k
            v0 = float(self.model.var(new)[0])
            s = v0 - float(k @ pk)
        else:
            k, pk, s = cache
            v0 = float(self.model.var(new)[0])
        if s <= 1e-12 * v0:
            # near-singular extension: fall back to jittered rebuild
            self._pts[n] = new[0]
            self._n = n + 1
            if self._vals is not None:
                self._vals[n] = val
            self._rebuild(extra_jitter=1e-8 * v0)
            return n
        si = 1.0 / s
        accel.rank1_update(self._prec[:n, :n], pk, si)
        self._prec[:n, n] = -si * pk
        self._prec[n, :n] = -si * pk
        self._prec[n, n] = si
        self._pts[n] = new[0]
        self._n = n + 1
        if self._vals is not None:
            self._vals[n] = val
            dev_dot = float(pk @ (self._vals[:n] - self.model.mean(self._pts[:n])))
            dv = val - float(self.model.mean(new)[0])
            c = si * (dev_dot - dv)
            self._w[:n] += c * pk
            self._w[n] = -c
        self._ops += 1
        if self._ops >= _REBUILD_EVERY:
            self._rebuild()
        return n

    def drop(self, idx: int):
        """Remove the point at ``idx`` by swapping it with the last row.

        Returns the index that the former last row now occupies (i.e. ``idx``)
        or None when ``idx`` was already last; callers tracking row indices
        must remap the moved row.
        """
        n = self._n
        last = n - 1
        moved = None
        if idx != last:
            p = self._prec[:n, :n]
            p[[idx, last], :] = p[[last, idx], :]
            p[:, [idx, last]] = p[:, [last, idx]]
            self._pts[[idx, last]] = self._pts[[last, idx]]
            if self._vals is not None:
                self._vals[[idx, last]] = self._vals[[last, idx]]
                self._w[[idx, last]] = self._w[[last, idx]]
            moved = idx
        # downdate the (now) trailing point
        m = last
        pll = self._prec[m, m]
        col = self._prec[:m, m].copy()
        accel.rank1_update(self._prec[:m, :m], col, -1.0 / pll)
        if self._vals is not None and m:
            self._w[:m] -= col * (self._w[m] / pll)
        self._n = m
        self._ops += 1
        if self._ops >= _REBUILD_EVERY:
            self._rebuild()
        return moved

    def append_block(self, new_pts, new_vals=None):
        """Add several points at once (blocked Schur update)."""
        new = np.asarray(new_pts, dtype=np.float64)
        if new.ndim == 1:
            new = new[:, None]
        k = new.shape[0]
        if k == 0:
            return
        n = self._n
        self._grow(n + k)
        if n == 0:
            self._pts[:k] = new
            self._n = k
            if self._vals is not None and new_vals is not None:
                self._vals[:k] = new_vals
            self._rebuild()
            return
        cab = self.model.cov(new, self.pts)          # (k, n)
        b = self.prec @ cab.T                        # (n, k)
        s = self.model.cov_sym(new) - cab @ b        # (k, k) Schur complement
        s = 0.5 * (s + s.T)
        lower, jit = chol_with_jitter(s, float(np.mean(self.model.var(new))))
        li = np.linalg.inv(lower)
        s_inv = li.T @ li
        self.jitter_used = max(self.jitter_used, jit)
        bs = b @ s_inv
        self._prec[:n, :n] += bs @ b.T
        self._prec[:n, n:n + k] = -bs
        self._prec[n:n + k, :n] = -bs.T
        self._prec[n:n + k, n:n + k] = s_inv
        self._pts[n:n + k] = new
        self._n = n + k
        if self._vals is not None and new_vals is not None:
            self._vals[n:n + k] = new_vals
        self._ops += k
        if self._ops >= _REBUILD_EVERY:
            self._rebuild()
        else:
            self._refresh_w()

    def drop_block(self, rows):
        """Remove several points at once (blocked Schur downdate)."""
        rows = sorted(set(int(r) for r in rows))
        if not rows:
            return
        n = self._n
        keep = np.ones(n, dtype=bool)
        keep[rows] = False
        kidx = np.flatnonzero(keep)
        pbb = self.prec[np.ix_(rows, rows)]
        pab = self.prec[kidx][:, rows]
        lower, _ = chol_with_jitter(pbb, float(np.mean(np.diag(pbb))))
        x = np.linalg.solve(lower, pab.T)
        m = kidx.size
        new_prec = self.prec[kidx][:, kidx] - x.T @ x
        self._prec[:m, :m] = 0.5 * (new_prec + new_prec.T)
        self._pts[:m] = self._pts[kidx]
        if self._vals is not None:
            self._vals[:m] = self._vals[kidx]
        self._n = m
        self._ops += len(rows)
        if self._ops >= _REBUILD_EVERY:
            self._rebuild()
        else:
            self._refresh_w()

    def copy(self) -> "SchurState":
        out = SchurState(self.model, self.dim, self._vals is not None, self._cap)
        out._n = self._n
        out._pts[:self._n] = self._pts[:self._n]
        out._prec[:self._n, :self._n] = self._prec[:self._n, :self._n]
        if self._vals is not None:
            out._vals[:self._n] = self._vals[:self._n]
            out._w[:self._n] = self._w[:self._n]
        out.jitter_used = self.jitter_used
        out._ops = self._ops
        return out


def schur_extend(state: SchurState, new_loc, value=None) -> SchurState:
    """Functional wrapper: extended copy of ``state`` including ``new_loc``."""
    out = state.copy()
    out.append(new_loc, value)
    return out


class GpFieldSampler:
    """Sequential exact simulation of a GP field: draw-at-point, then condition.

    Used for forward simulation and prediction, where each new location must
    be drawn from the GP conditional on everything drawn before.
    """

    def __init__(self, model, pts=None, values=None, dim=None):
        if pts is None or np.size(pts) == 0:
            pts = np.empty((0, dim if dim else 1))
            values = np.empty(0)
        self.state = SchurState.start(model, pts, values)

    def draw_at(self, pt, rng) -> float:
        m, v, k, pk, s = self.state.conditional_scalar_cached(pt)
        val = m + np.sqrt(v) * rng.standard_normal()
        self.state.append(pt, val, cache=None if k is None else (k, pk, s))
        return val

    def draw_batch(self, pts, rng) -> np.ndarray:
        """Joint draw at several points (conditioned on the current set)."""
        pts = np.asarray(pts, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.shape[0] == 0:
            return np.empty(0)
        mean, cov = self.state.conditional(pts)
        lower, _ = chol_with_jitter(cov)
        vals = mean + lower @ rng.standard_normal(pts.shape[0])
        for p, v in zip(pts, vals):
            self.state.append(p, v)
        return vals
