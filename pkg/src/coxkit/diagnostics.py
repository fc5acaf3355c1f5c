"""Chain summaries: effective sample size via the initial monotone sequence
estimator."""

from __future__ import annotations

import numpy as np


def ess_imse(x) -> float:
    """Effective sample size of one chain (Geyer's initial monotone positive
    sequence estimator of the asymptotic variance)."""
    x = np.asarray(x, dtype=np.float64).ravel()
    n = x.size
    if n < 4:
        return float(n)
    x = x - x.mean()
    var0 = float(x @ x) / n
    if var0 <= 0:
        return float(n)
    # autocovariances via FFT
    nfft = int(2 ** np.ceil(np.log2(2 * n)))
    f = np.fft.rfft(x, nfft)
    acov = np.fft.irfft(f * np.conj(f), nfft)[:n].real / n
    # pair sums Gamma_j = gamma_{2j} + gamma_{2j+1}
    n_pairs = (n - 1) // 2
    sigma2 = -acov[0]
    prev = np.inf
    for j in range(n_pairs + 1):
        if 2 * j + 1 >= n:
            break
        g = acov[2 * j] + acov[2 * j + 1]
        if g <= 0:
            break
        g = min(g, prev)   # enforce monotone decrease
        prev = g
        sigma2 += 2.0 * g
    if sigma2 <= 0:
        return float(n)
    return float(min(n, n * acov[0] / sigma2))


def batch_means_se(x, n_batches=50) -> float:
    """Standard error of the mean by non-overlapping batch means."""
    x = np.asarray(x, dtype=np.float64).ravel()
    x = x[~np.isnan(x)]
    if x.size < 2 * n_batches:
        return float(np.std(x, ddof=1) / np.sqrt(max(x.size, 1)))
    m = x.size // n_batches
    bm = x[: m * n_batches].reshape(n_batches, m).mean(axis=1)
    return float(bm.std(ddof=1) / np.sqrt(n_batches))
