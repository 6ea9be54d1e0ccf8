"""Statistical post-processing: normality testing, KDE, QQ data, moments.

The Shapiro-Wilk implementation follows Royston's AS R94 polynomial
approximation (valid for 3 <= n <= 5000); the normal inverse CDF is a
rational approximation accurate to ~1e-15 after one Halley refinement.
"""

from dataclasses import dataclass
from math import erfc, sqrt, log, exp

import numpy as np

__all__ = [
    "SampleSummary", "shapiro_wilk", "kde", "qq_points",
    "empirical_cov_corr", "norm_inv_cdf", "silverman_bandwidth",
]


@dataclass(frozen=True)
class SampleSummary:
    n: int
    mean: float
    variance: float
    median: float
    mad: float
    minimum: float
    maximum: float

    @staticmethod
    def from_samples(x):
        x = np.asarray(x, dtype=float)
        med = float(np.median(x))
        return SampleSummary(
            n=len(x), mean=float(np.mean(x)),
            variance=float(np.var(x, ddof=1)) if len(x) > 1 else 0.0,
            median=med, mad=float(np.median(np.abs(x - med))),
            minimum=float(np.min(x)), maximum=float(np.max(x)))


# ---------------------------------------------------------------------------
# normal inverse CDF (Acklam-style rational approximation + Halley step)

_A = [-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
      1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00]
_B = [-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
      6.680131188771972e+01, -1.328068155288572e+01]
_C = [-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
      -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00]
_D = [7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
      3.754408661907416e+00]


def _ndtr(x):
    return 0.5 * erfc(-x / sqrt(2.0))


def _norm_inv_scalar(p):
    if not 0.0 < p < 1.0:
        if p == 0.0:
            return -np.inf
        if p == 1.0:
            return np.inf
        return np.nan
    p_low, p_high = 0.02425, 1.0 - 0.02425
    if p < p_low:
        q = sqrt(-2.0 * log(p))
        x = ((((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q
              + _C[4]) * q + _C[5])
             / ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0))
    elif p <= p_high:
        q = p - 0.5
        r = q * q
        x = ((((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r
              + _A[4]) * r + _A[5]) * q
             / (((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r
                 + _B[4]) * r + 1.0))
    else:
        q = sqrt(-2.0 * log(1.0 - p))
        x = -((((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q
               + _C[4]) * q + _C[5])
              / ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0))
    # one Halley step against the exact CDF
    e = _ndtr(x) - p
    u = e * sqrt(2.0 * np.pi) * exp(0.5 * x * x)
    x = x - u / (1.0 + 0.5 * x * u)
    return x


def norm_inv_cdf(p):
    """Standard normal quantile function, |error| well below 1e-9."""
    if np.isscalar(p):
        return _norm_inv_scalar(float(p))
    p = np.asarray(p, dtype=float)
    return np.array([_norm_inv_scalar(float(v)) for v in p.ravel()]
                    ).reshape(p.shape)


# ---------------------------------------------------------------------------
# Shapiro-Wilk (AS R94)

_SW_C1 = [0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056]
_SW_C2 = [0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633]


def _poly(coefs, x):
    out = 0.0
    for c in reversed(coefs):
        out = out * x + c
    return out


def shapiro_wilk(samples):
    """Shapiro-Wilk W and p-value for composite normality.

    Supports 3 <= n <= 5000 and rejects zero-spread samples.  Returns
    (W, p_value).
    """
    x = np.sort(np.asarray(samples, dtype=float))
    n = len(x)
    if not 3 <= n <= 5000:
        raise ValueError(f"sample size {n} outside supported range [3, 5000]")
    rng = x[-1] - x[0]
    if rng <= 0:
        raise ValueError("sample has zero spread")

    mtilde = norm_inv_cdf((np.arange(1, n + 1) - 0.375) / (n + 0.25))
    mm = float(mtilde @ mtilde)
    c = mtilde / sqrt(mm)
    u = 1.0 / sqrt(n)
    a = np.zeros(n)
    if n > 5:
        a_n = _poly(_SW_C1, u) + c[-1]
        a_n1 = _poly(_SW_C2, u) + c[-2]
        phi = (mm - 2.0 * mtilde[-1] ** 2 - 2.0 * mtilde[-2] ** 2) \
            / (1.0 - 2.0 * a_n ** 2 - 2.0 * a_n1 ** 2)
        a[2:-2] = mtilde[2:-2] / sqrt(phi)
        a[-1], a[-2] = a_n, a_n1
        a[0], a[1] = -a_n, -a_n1
    else:
        a_n = _poly(_SW_C1, u) + c[-1]
        if n == 3:
            a_n = sqrt(0.5)
        phi = (mm - 2.0 * mtilde[-1] ** 2) / (1.0 - 2.0 * a_n ** 2) \
            if n > 3 else 1.0
        if n > 3:
            a[1:-1] = mtilde[1:-1] / sqrt(phi)
        a[-1] = a_n
        a[0] = -a_n

    xm = x - x.mean()
    W = float((a @ x) ** 2 / (xm @ xm))
    W = min(W, 1.0)

    if n == 3:
        # exact distribution for n = 3
        pi6 = 6.0 / np.pi
        stqr = np.arcsin(sqrt(0.75))
        p = pi6 * (np.arcsin(sqrt(W)) - stqr)
        return W, float(min(max(p, 0.0), 1.0))
    if n <= 11:
        g = -2.273 + 0.459 * n
        mu = 0.5440 - 0.39978 * n + 0.025054 * n ** 2 - 0.0006714 * n ** 3
        sig = exp(1.3822 - 0.77857 * n + 0.062767 * n ** 2
                  - 0.0020322 * n ** 3)
        z = (-log(g - log(1.0 - W)) - mu) / sig
    else:
        ln_n = log(n)
        mu = -1.5861 - 0.31082 * ln_n - 0.083751 * ln_n ** 2 \
            + 0.0038915 * ln_n ** 3
        sig = exp(-0.4803 - 0.082676 * ln_n + 0.0030302 * ln_n ** 2)
        z = (log(1.0 - W) - mu) / sig
    p = 1.0 - _ndtr(z)
    return W, float(min(max(p, 0.0), 1.0))


# ---------------------------------------------------------------------------
# kernel density estimation

def silverman_bandwidth(x):
    x = np.asarray(x, dtype=float)
    sd = float(np.std(x, ddof=1))
    q75, q25 = np.percentile(x, [75, 25])
    iqr = q75 - q25
    spread = min(sd, iqr / 1.34) if iqr > 0 else sd
    return 0.9 * spread * len(x) ** (-0.2)


def kde(samples, bandwidth=None, grid=None, grid_size=512):
    """Gaussian-kernel density estimate on an evaluation grid.

    Default bandwidth is Silverman's rule 0.9 min(sd, IQR/1.34) n^{-1/5};
    the default grid spans the data plus 4 bandwidths so the curve carries
    mass 1 to about 1e-4.  Returns (grid, density).
    """
    x = np.asarray(samples, dtype=float)
    if len(x) < 2:
        raise ValueError("need at least 2 samples")
    if bandwidth is None:
        bandwidth = silverman_bandwidth(x)
    if not bandwidth > 0:
        raise ValueError("sample has zero spread; bandwidth undefined")
    if grid is None:
        lo = x.min() - 4.0 * bandwidth
        hi = x.max() + 4.0 * bandwidth
        grid = np.linspace(lo, hi, grid_size)
    z = (grid[:, None] - x[None, :]) / bandwidth
    dens = np.exp(-0.5 * z * z).sum(axis=1) \
        / (len(x) * bandwidth * np.sqrt(2.0 * np.pi))
    return grid, dens


def qq_points(samples):
    """(standard-normal quantile, order statistic) pairs at plotting
    positions (i - 1/2)/n; the caller standardizes the sample."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = len(x)
    if n < 2:
        raise ValueError("need at least 2 samples")
    q = norm_inv_cdf((np.arange(1, n + 1) - 0.5) / n)
    return np.column_stack([q, x])


def empirical_cov_corr(matrix):
    """Unbiased covariance and correlation across repetition rows.

    Columns with zero variance get NaN correlation entries; the second
    return value lists their indices.
    """
    X = np.asarray(matrix, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] < 2:
        raise ValueError("need at least 2 repetitions")
    cov = np.cov(X, rowvar=False, ddof=1)
    cov = np.atleast_2d(cov)
    sd = np.sqrt(np.diag(cov))
    flagged = [int(i) for i in np.nonzero(sd == 0)[0]]
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = cov / np.outer(sd, sd)
    corr[np.diag_indices_from(corr)] = np.where(sd > 0, 1.0, np.nan)
    return cov, corr, flagged
