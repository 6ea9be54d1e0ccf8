"""Plug-in estimators of the eigenvalue-fluctuation variance.

Everything is built from one per-point ingredient: the gradient surrogate

    G(x_i) = 1/(2 n eps^{m+2}) sum_j |u(x_j) - u(x_i)|^2 w_ij,

a data-driven stand-in for the Dirichlet energy density.  The per-point
terms t_i = lam u(x_i)^2 + lam - 2 G(x_i) give the variance estimate
mean(t_i^2) and, across eigenvalue indices, the covariance estimate.
All quantities inherit the scaling convention of the operator they are
computed from, and are invariant under u -> -u.
"""

from dataclasses import dataclass

import numpy as np

__all__ = [
    "VarianceEstimate", "CovarianceEstimate", "NonSimpleIndex",
    "ZeroVariance", "gradient_surrogate", "per_point_terms", "sigma_hat_sq",
    "cov_hat", "studentize",
]


class NonSimpleIndex(ValueError):
    pass


class ZeroVariance(ValueError):
    pass


@dataclass(frozen=True)
class VarianceEstimate:
    sigma_hat_sq: float
    terms: np.ndarray
    l: int
    n: int
    eps: float


@dataclass(frozen=True)
class CovarianceEstimate:
    matrix: np.ndarray
    indices: tuple


def gradient_surrogate(L, u):
    """Pointwise squared-gradient surrogate; nonnegative everywhere.

    Expects u normalized in L2(X_n).  Uses the algebraic expansion
    sum_j w_ij (u_i - u_j)^2 = deg_i u_i^2 - 2 u_i (W u)_i + (W u^2)_i,
    so the cost is two sparse matvecs.
    """
    u = np.asarray(u, dtype=float)
    Wu = L.weights @ u
    Wu2 = L.weights @ (u * u)
    quad = L.degrees * u * u - 2.0 * u * Wu + Wu2
    return 0.5 * L.scale * np.maximum(quad, 0.0)


def per_point_terms(lam, u, G):
    return lam * np.asarray(u) ** 2 + lam - 2.0 * np.asarray(G)


def sigma_hat_sq(lam, u, G, l=0, eps=float("nan")):
    """Variance estimate (1/n) sum_i (lam u_i^2 + lam - 2 G_i)^2."""
    t = per_point_terms(lam, u, G)
    return VarianceEstimate(sigma_hat_sq=float(np.mean(t * t)), terms=t,
                            l=l, n=len(t), eps=eps)


def cov_hat(estimates, gap_report=None, force=False):
    """Covariance estimate from per-index VarianceEstimates.

    Entry (j, k) is the mean of t^{(j)} t^{(k)}; the diagonal reproduces the
    individual sigma_hat_sq values exactly.  Refuses indices flagged
    non-simple by the eigengap report unless ``force`` is set.
    """
    if not estimates:
        raise ValueError("need at least one variance estimate")
    if gap_report is not None and not force:
        bad = [e.l for e in estimates
               if e.l >= 1 and not gap_report.is_simple(e.l)]
        if bad:
            raise NonSimpleIndex(
                f"indices {bad} are not simple; pass force=True to proceed")
    T = np.column_stack([e.terms for e in estimates])
    n = T.shape[0]
    mat = T.T @ T / n
    mat = 0.5 * (mat + mat.T)
    return CovarianceEstimate(matrix=mat,
                              indices=tuple(e.l for e in estimates))


def studentize(lam, center, sigma_hat, n):
    """sqrt(n) (lam - center) / sigma_hat."""
    if sigma_hat <= 0:
        raise ZeroVariance("studentization needs a positive scale")
    return float(np.sqrt(n) * (lam - center) / sigma_hat)
