"""Distribution-free test statistics used by the verification campaigns.

Implements the one- and two-sample Kolmogorov-Smirnov statistics with
asymptotic p-values from the alternating Kolmogorov series, plus the
normal-tail helpers behind the z-score reports.  Everything here is a pure
function of its sample arrays.
"""

from __future__ import annotations

import math

import numpy as np

_KOLMOGOROV_TERM_EPS = 1e-12
MIN_KS_SAMPLES = 100


def normal_sf(z: float) -> float:
    """P(N(0,1) > z)."""
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def two_sided_p(z: float) -> float:
    """P(|N(0,1)| > |z|)."""
    return math.erfc(abs(z) / math.sqrt(2.0))


def kolmogorov_sf(lam: float) -> float:
    """P(K > lam) for the Kolmogorov distribution.

    The alternating series 2 sum_k (-1)^{k-1} exp(-2 k^2 lam^2), truncated
    once terms drop below 1e-12, clamped to [0, 1].  For lam <= 0 the
    survival probability is 1.
    """
    if lam <= 0.0:
        return 1.0
    acc = 0.0
    sign = 1.0
    for k in range(1, 200):
        term = math.exp(-2.0 * k * k * lam * lam)
        acc += sign * term
        if term < _KOLMOGOROV_TERM_EPS:
            break
        sign = -sign
    return min(1.0, max(0.0, 2.0 * acc))


def _check_cdf_values(f: np.ndarray) -> None:
    if np.any(f < -1e-9) or np.any(f > 1.0 + 1e-9):
        raise ValueError("cdf values fall outside [0, 1]")
    if np.any(np.diff(f) < -1e-12):
        raise ValueError("cdf is not monotone on the sample")
    if f.max() - f.min() == 0.0:
        raise ValueError("cdf is constant on the sample; the test is degenerate")


def ks_test(samples, cdf) -> tuple[float, float]:
    """One-sample Kolmogorov-Smirnov test against a continuous cdf.

    Returns (statistic, asymptotic p-value).  The cdf callable is applied
    to the sorted sample array; it must be monotone with values in [0, 1]
    and non-constant over the sample, otherwise the input is rejected.
    Fewer than 100 samples are rejected too, as the asymptotic p-value
    would be meaningless.
    """
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    if n < MIN_KS_SAMPLES:
        raise ValueError(f"need at least {MIN_KS_SAMPLES} samples, got {n}")
    f = np.asarray(cdf(x), dtype=float)
    if f.shape != x.shape:
        raise ValueError("cdf must map the sample array to an equal-length array")
    _check_cdf_values(f)
    grid = np.arange(1, n + 1) / n
    d_plus = float(np.max(grid - f))
    d_minus = float(np.max(f - (grid - 1.0 / n)))
    stat = max(d_plus, d_minus)
    return stat, kolmogorov_sf(math.sqrt(n) * stat)


def ks_two_sample(x, y) -> tuple[float, float]:
    """Two-sample Kolmogorov-Smirnov test with asymptotic p-value."""
    x = np.sort(np.asarray(x, dtype=float))
    y = np.sort(np.asarray(y, dtype=float))
    nx, ny = x.size, y.size
    if min(nx, ny) < MIN_KS_SAMPLES:
        raise ValueError(f"need at least {MIN_KS_SAMPLES} samples per side")
    both = np.concatenate([x, y])
    cdf_x = np.searchsorted(x, both, side="right") / nx
    cdf_y = np.searchsorted(y, both, side="right") / ny
    stat = float(np.max(np.abs(cdf_x - cdf_y)))
    n_eff = nx * ny / (nx + ny)
    return stat, kolmogorov_sf(math.sqrt(n_eff) * stat)
