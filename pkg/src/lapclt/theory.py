"""Limit-operator quantities by quadrature: fluctuation variances and
covariances, the density-perturbation gradient and its dissipation identity,
eigenvalue perturbation derivatives, estimation lower bounds, and
finite-sample diagnostics.

The central integrand is the zero-mean function

    b_l(x) = lam_l u_l(x)^2 + lam_l - 2 E_l(x),       E_l = scale |grad u_l|^2 rho,

whose squared rho-weighted integral is the asymptotic variance sigma_l^2 of
the l-th eigenvalue fluctuation.  All quantities scale coherently with the
operator convention carried by the spectrum entries: replacing the operator
by a * operator multiplies eigenvalues by a and sigma^2 by a^2.
"""

from dataclasses import dataclass, field
import json

import numpy as np

from .manifolds import (AnalyticSpectrum, Circle, Ellipse, EmbeddedTorus,
                        FlatTorus, Sphere, UnsupportedManifold)

__all__ = [
    "QuadratureGrid", "TheoryReport", "NonTangentDirection",
    "ScalingMismatch", "quadrature_grid", "sigma_sq_quadrature",
    "covariance_quadrature", "fisher_rao_gradient", "perturbation_derivative",
    "cramer_rao_bound", "pointwise_consistency_residual", "bias_magnitude",
    "theory_report", "eigenspace_sigma_sums",
]


class NonTangentDirection(ValueError):
    pass


class ScalingMismatch(ValueError):
    pass


@dataclass(frozen=True)
class QuadratureGrid:
    """Evaluation points on the manifold with exact cell measures.

    Weights sum to the manifold volume to roundoff; resolution is the node
    count per parameter direction.
    """

    points: np.ndarray
    weights: np.ndarray
    resolution: tuple
    spec: object

    @property
    def size(self):
        return len(self.weights)


def quadrature_grid(model, resolution=None):
    """Parameter-space grid for the model's manifold.

    Circle/ellipse: uniform nodes in arc length.  Sphere (m=2): midpoint
    (theta, phi) polar grid with exact spherical-cap cell areas.  Flat torus:
    uniform product grid.  The embedded torus is not supported.
    """
    spec = model.spec
    if isinstance(spec, Circle):
        n = resolution or 200_000
        theta = (np.arange(n) + 0.5) * (2.0 * np.pi / n)
        pts = spec.radius * np.column_stack([np.cos(theta), np.sin(theta)])
        w = np.full(n, spec.volume / n)
        return QuadratureGrid(points=pts, weights=w, resolution=(n,),
                              spec=spec)
    if isinstance(spec, Ellipse):
        n = resolution or 200_000
        arc = spec._arc
        s = (np.arange(n) + 0.5) * (arc.length / n)
        t = arc.param_of_arclength(s)
        pts = np.column_stack([spec.semi_axis_a * np.cos(t),
                               spec.semi_axis_b * np.sin(t)])
        w = np.full(n, arc.length / n)
        return QuadratureGrid(points=pts, weights=w, resolution=(n,),
                              spec=spec)
    if isinstance(spec, Sphere) and spec.intrinsic_dim == 2:
        if resolution is None:
            n_th, n_ph = 2000, 4000
        elif np.isscalar(resolution):
            n_th, n_ph = int(resolution), 2 * int(resolution)
        else:
            n_th, n_ph = resolution
        r = spec.radius
        edges = np.linspace(0.0, np.pi, n_th + 1)
        theta = 0.5 * (edges[:-1] + edges[1:])
        # exact band areas r^2 (cos a - cos b) dphi, pole-free midpoints
        band = r * r * (np.cos(edges[:-1]) - np.cos(edges[1:]))
        phi = (np.arange(n_ph) + 0.5) * (2.0 * np.pi / n_ph)
        TH, PH = np.meshgrid(theta, phi, indexing="ij")
        pts = np.column_stack([
            (r * np.sin(TH) * np.cos(PH)).ravel(),
            (r * np.sin(TH) * np.sin(PH)).ravel(),
            (r * np.cos(TH)).ravel()])
        w = np.repeat(band / n_ph, n_ph)
        return QuadratureGrid(points=pts, weights=w,
                              resolution=(n_th, n_ph), spec=spec)
    if isinstance(spec, FlatTorus):
        m = spec.intrinsic_dim
        if resolution is None:
            n_side = 1000 if m == 2 else max(40, int(round(2e6 ** (1 / m))))
        elif np.isscalar(resolution):
            n_side = int(resolution)
        else:
            n_side = int(resolution[0])
        axes = [(np.arange(n_side) + 0.5) * (2.0 * np.pi / n_side)
                for _ in range(m)]
        grids = np.meshgrid(*axes, indexing="ij")
        cols = []
        for i, r in enumerate(spec.radii):
            cols += [r * np.cos(grids[i]).ravel(), r * np.sin(grids[i]).ravel()]
        pts = np.column_stack(cols)
        w = np.full(pts.shape[0], spec.volume / pts.shape[0])
        return QuadratureGrid(points=pts, weights=w,
                              resolution=(n_side,) * m, spec=spec)
    if isinstance(spec, EmbeddedTorus):
        raise UnsupportedManifold(
            "no quadrature spectrum support for the embedded torus")
    raise ValueError(f"unknown manifold spec: {spec!r}")


def _check_grid(model, grid):
    if grid.spec != model.spec:
        raise ValueError("grid was built for a different manifold")


def fluctuation_integrand(model, entry, x):
    """b(x) = lam u(x)^2 + lam - 2 * scale |grad u(x)|^2 rho(x)."""
    u = entry.u(x)
    return entry.eigenvalue * u * u + entry.eigenvalue \
        - 2.0 * entry.energy_density(model, x)


def sigma_sq_quadrature(model, entry, grid):
    """Asymptotic eigenvalue-fluctuation variance by weighted grid sum."""
    _check_grid(model, grid)
    b = fluctuation_integrand(model, entry, grid.points)
    rho = model.density_at(grid.points)
    return float(np.sum(grid.weights * b * b * rho))


def covariance_quadrature(model, entry_j, entry_k, grid):
    _check_grid(model, grid)
    bj = fluctuation_integrand(model, entry_j, grid.points)
    bk = fluctuation_integrand(model, entry_k, grid.points)
    rho = model.density_at(grid.points)
    return float(np.sum(grid.weights * bj * bk * rho))


def fisher_rao_gradient(model, entry, x):
    """Density-perturbation gradient of the l-th eigenvalue at x:
    -lam u^2 - lam + 2 scale |grad u|^2 rho (the negative of the
    fluctuation integrand)."""
    return -fluctuation_integrand(model, entry, x)


def perturbation_derivative(model, entry, xi, grid, tangent_tol=1e-8):
    """First-order eigenvalue response to the density perturbation
    rho -> rho (1 + t xi):

        d lam / dt = -lam int xi u^2 rho + 2 int xi scale |grad u|^2 rho^2.

    ``xi`` must be tangent: int xi rho = 0 within tangent_tol.
    """
    _check_grid(model, grid)
    xi_vals = xi(grid.points) if callable(xi) else np.asarray(xi, dtype=float)
    rho = model.density_at(grid.points)
    mass = float(np.sum(grid.weights * xi_vals * rho))
    if abs(mass) > tangent_tol:
        raise NonTangentDirection(
            f"int xi rho = {mass:.3e} exceeds tolerance {tangent_tol:.1e}")
    u = entry.u(grid.points)
    energy = entry.energy_density(model, grid.points)
    term1 = -entry.eigenvalue * np.sum(grid.weights * xi_vals * u * u * rho)
    term2 = 2.0 * np.sum(grid.weights * xi_vals * energy * rho)
    return float(term1 + term2)


def cramer_rao_bound(sigma_sq, n):
    """Variance lower bound sigma^2 / n for unbiased eigenvalue estimators."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if sigma_sq < 0:
        raise ValueError("sigma_sq must be nonnegative")
    return sigma_sq / n


def pointwise_consistency_residual(L, model, entry, cloud):
    """max_i |(L u)(x_i) - lam u(x_i)| over the sample.

    Requires the entry's operator scale to match the Laplacian's kernel
    convention, otherwise the comparison is meaningless and a
    ScalingMismatch is raised.
    """
    if L.kernel is not None:
        from .manifolds import raw_operator_scale
        m = L.m
        expected = raw_operator_scale(m, sigma_eta=L.kernel.sigma_eta) \
            * L.kernel.scale_factor
        if not np.isclose(entry.operator_scale, expected, rtol=1e-12):
            raise ScalingMismatch(
                f"spectrum scale {entry.operator_scale} vs operator "
                f"convention {expected}")
    u = entry.u(cloud.points)
    return float(np.max(np.abs(L.apply(u) - entry.eigenvalue * u)))


def bias_magnitude(mc_mean, lam, n):
    """Centering-obstruction statistic sqrt(n) |mc_mean - lam|."""
    return float(np.sqrt(n) * abs(mc_mean - lam))


def eigenspace_sigma_sums(model, entries, grid):
    """Sum of sigma^2 over a degenerate eigenspace (basis independent)."""
    return float(sum(sigma_sq_quadrature(model, e, grid) for e in entries))


@dataclass(frozen=True)
class TheoryReport:
    eigenvalues: np.ndarray
    sigma_sq: np.ndarray
    covariance: np.ndarray
    correlation: np.ndarray
    cramer_rao: dict
    operator_scale: float
    manifold: str
    degeneracy: tuple = ()

    def to_json(self, path=None):
        payload = {
            "schema_version": 1,
            "manifold": self.manifold,
            "operator_scale": self.operator_scale,
            "eigenvalues": [float(v) for v in self.eigenvalues],
            "sigma_sq": [float(v) for v in self.sigma_sq],
            "covariance": [[float(v) for v in row]
                           for row in self.covariance],
            "correlation": [[float(v) for v in row]
                            for row in self.correlation],
            "cramer_rao": {str(k): float(v)
                           for k, v in self.cramer_rao.items()},
            "degeneracy": list(self.degeneracy),
        }
        text = json.dumps(payload, indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text

    def matrix_csv(self, path, which="correlation"):
        mat = getattr(self, which)
        with open(path, "w") as fh:
            k = mat.shape[0]
            fh.write(",".join(f"l{j + 1}" for j in range(k)) + "\n")
            for row in mat:
                fh.write(",".join(repr(float(v)) for v in row) + "\n")


def theory_report(spectrum, grid, n_for_bound=None):
    """Variance/covariance report for every entry of an analytic spectrum."""
    model = spectrum.model
    entries = spectrum.entries
    k = len(entries)
    sig = np.array([sigma_sq_quadrature(model, e, grid) for e in entries])
    cov = np.empty((k, k))
    for a in range(k):
        cov[a, a] = sig[a]
        for b in range(a + 1, k):
            cov[a, b] = cov[b, a] = covariance_quadrature(
                model, entries[a], entries[b], grid)
    sd = np.sqrt(np.maximum(sig, 0.0))
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = cov / np.outer(sd, sd)
    corr[~np.isfinite(corr)] = 0.0
    bounds = {}
    if n_for_bound:
        bounds = {e.index: cramer_rao_bound(s, n_for_bound)
                  for e, s in zip(entries, sig)}
    return TheoryReport(
        eigenvalues=spectrum.values, sigma_sq=sig, covariance=cov,
        correlation=corr, cramer_rao=bounds,
        operator_scale=spectrum.operator_scale,
        manifold=type(model.spec).__name__,
        degeneracy=tuple(e.degeneracy for e in entries))
