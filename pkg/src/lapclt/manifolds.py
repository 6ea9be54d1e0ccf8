"""Data-generating models: test manifolds, uniform densities, samplers, and
closed-form limit spectra.

Supported manifolds: circle, ellipse, m-sphere, embedded torus (donut) and
flat torus (product of circles embedded in R^{2m}).  Densities are uniform
with respect to the surface measure; volumes are carried explicitly and never
assumed to be 1.  Analytic spectra are available for every kind except the
embedded torus and are expressed for the operator

    scale * Delta_rho,      Delta_rho f = -(1/rho) div(rho^2 grad f),

where ``scale`` encodes the kernel-scaling convention (see
:func:`raw_operator_scale`): 1 for a second-moment-normalized kernel,
sigma_eta/2 for the kernel as built.
"""

from dataclasses import dataclass, field
from math import gamma as _gamma

import numpy as np
from scipy.special import lpmv

__all__ = [
    "Circle", "Ellipse", "Sphere", "EmbeddedTorus", "FlatTorus",
    "DensityModel", "PointCloud", "SpectrumEntry", "AnalyticSpectrum",
    "UnsupportedManifold", "sample", "density_at", "analytic_spectrum",
    "uniform_model", "rotate_eigenspace",
]


class UnsupportedManifold(ValueError):
    """Requested operation has no closed form for this manifold."""


def _check_positive(**kwargs):
    for name, value in kwargs.items():
        if not value > 0:
            raise ValueError(f"{name} must be strictly positive, got {value}")


@dataclass(frozen=True)
class Circle:
    radius: float = 1.0

    def __post_init__(self):
        _check_positive(radius=self.radius)

    ambient_dim = 2
    intrinsic_dim = 1

    @property
    def volume(self):
        return 2.0 * np.pi * self.radius


@dataclass(frozen=True)
class Ellipse:
    semi_axis_a: float = 1.0
    semi_axis_b: float = 1.0

    def __post_init__(self):
        _check_positive(semi_axis_a=self.semi_axis_a,
                        semi_axis_b=self.semi_axis_b)
        object.__setattr__(self, "_arc", _EllipseArc(self.semi_axis_a,
                                                     self.semi_axis_b))

    ambient_dim = 2
    intrinsic_dim = 1

    @property
    def volume(self):
        return self._arc.length


@dataclass(frozen=True)
class Sphere:
    intrinsic_dim: int = 2
    radius: float = 1.0

    def __post_init__(self):
        if self.intrinsic_dim < 1:
            raise ValueError("sphere dimension must be >= 1")
        _check_positive(radius=self.radius)

    @property
    def ambient_dim(self):
        return self.intrinsic_dim + 1

    @property
    def volume(self):
        m = self.intrinsic_dim
        area_unit = 2.0 * np.pi ** ((m + 1) / 2.0) / _gamma((m + 1) / 2.0)
        return area_unit * self.radius ** m


@dataclass(frozen=True)
class EmbeddedTorus:
    major_radius: float = 1.0
    minor_radius: float = 1.0

    def __post_init__(self):
        _check_positive(major_radius=self.major_radius,
                        minor_radius=self.minor_radius)

    ambient_dim = 3
    intrinsic_dim = 2

    @property
    def volume(self):
        return 4.0 * np.pi ** 2 * self.major_radius * self.minor_radius


@dataclass(frozen=True)
class FlatTorus:
    side_lengths: tuple = (2.0 * np.pi, 2.0 * np.pi)

    def __post_init__(self):
        sides = tuple(float(s) for s in self.side_lengths)
        _check_positive(**{f"side_{k}": s for k, s in enumerate(sides)})
        object.__setattr__(self, "side_lengths", sides)

    @property
    def intrinsic_dim(self):
        return len(self.side_lengths)

    @property
    def ambient_dim(self):
        return 2 * len(self.side_lengths)

    @property
    def radii(self):
        return tuple(s / (2.0 * np.pi) for s in self.side_lengths)

    @property
    def volume(self):
        return float(np.prod(self.side_lengths))


@dataclass(frozen=True)
class DensityModel:
    """Uniform density 1/volume with respect to the surface measure."""

    spec: object

    @property
    def volume(self):
        return self.spec.volume

    @property
    def rho(self):
        return 1.0 / self.volume

    def density_at(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return self.rho
        return np.full(x.shape[0], self.rho)


def uniform_model(spec):
    return DensityModel(spec)


def density_at(model, x):
    return model.density_at(x)


@dataclass(frozen=True)
class PointCloud:
    points: np.ndarray
    spec: object = None
    seed: object = None

    @property
    def n(self):
        return self.points.shape[0]

    @property
    def ambient_dim(self):
        return self.points.shape[1]

    def to_csv(self, path):
        d = self.ambient_dim
        header = ",".join(f"x{k}" for k in range(d))
        with open(path, "w") as fh:
            fh.write(header + "\n")
            for row in self.points:
                fh.write(",".join(repr(float(v)) for v in row) + "\n")


# ---------------------------------------------------------------------------
# sampling


def _rng_for(seed):
    # counter-based generator: per-point streams do not depend on scheduling
    return np.random.Generator(np.random.Philox(key=np.uint64(seed)))


def sample(spec, n, seed):
    """Draw n i.i.d. points, uniform w.r.t. the surface measure of spec.

    Deterministic for a fixed (spec, n, seed); points satisfy the defining
    surface equation to ~1e-12.
    """
    if n < 1:
        raise ValueError("need n >= 1 samples")
    rng = _rng_for(seed)
    if isinstance(spec, Circle):
        theta = rng.uniform(0.0, 2.0 * np.pi, n)
        pts = spec.radius * np.column_stack([np.cos(theta), np.sin(theta)])
    elif isinstance(spec, Ellipse):
        s = rng.uniform(0.0, spec._arc.length, n)
        t = spec._arc.param_of_arclength(s)
        pts = np.column_stack([spec.semi_axis_a * np.cos(t),
                               spec.semi_axis_b * np.sin(t)])
    elif isinstance(spec, Sphere):
        g = rng.standard_normal((n, spec.ambient_dim))
        pts = spec.radius * g / np.linalg.norm(g, axis=1, keepdims=True)
    elif isinstance(spec, EmbeddedTorus):
        pts = _sample_torus(spec, n, rng)
    elif isinstance(spec, FlatTorus):
        cols = []
        for r in spec.radii:
            theta = rng.uniform(0.0, 2.0 * np.pi, n)
            cols += [r * np.cos(theta), r * np.sin(theta)]
        pts = np.column_stack(cols)
    else:
        raise ValueError(f"unknown manifold spec: {spec!r}")
    return PointCloud(points=pts, spec=spec, seed=seed)


def _sample_torus(spec, n, rng):
    """Rejection sampling with acceptance (R + r cos(phi)) / (R + r)."""
    R, r = spec.major_radius, spec.minor_radius
    theta = rng.uniform(0.0, 2.0 * np.pi, n)
    phi = np.empty(n)
    filled = 0
    while filled < n:
        todo = n - filled
        cand = rng.uniform(0.0, 2.0 * np.pi, todo)
        u = rng.uniform(0.0, 1.0, todo)
        acc = u <= (R + r * np.cos(cand)) / (R + r)
        k = int(acc.sum())
        phi[filled:filled + k] = cand[acc]
        filled += k
    x = (R + r * np.cos(phi)) * np.cos(theta)
    y = (R + r * np.cos(phi)) * np.sin(theta)
    z = r * np.sin(phi)
    return np.column_stack([x, y, z])


# ---------------------------------------------------------------------------
# ellipse arc-length machinery


class _EllipseArc:
    """Cumulative arc length of (a cos t, b sin t) and its inverse."""

    _NODES = 200_001

    def __init__(self, a, b):
        self.a, self.b = a, b
        t = np.linspace(0.0, 2.0 * np.pi, self._NODES)
        speed = np.hypot(a * np.sin(t), b * np.cos(t))
        # composite trapezoid on a uniform grid; O(h^2) ~ 1e-9 here
        ds = 0.5 * (speed[1:] + speed[:-1]) * np.diff(t)
        s = np.concatenate([[0.0], np.cumsum(ds)])
        self._t = t
        self._s = s
        self.length = float(s[-1])

    def arclength_of_param(self, t):
        t = np.mod(t, 2.0 * np.pi)
        return np.interp(t, self._t, self._s)

    def param_of_arclength(self, s):
        s = np.mod(s, self.length)
        return np.interp(s, self._s, self._t)

    def speed(self, t):
        return np.hypot(self.a * np.sin(t), self.b * np.cos(t))


# ---------------------------------------------------------------------------
# analytic spectra


@dataclass(frozen=True)
class SpectrumEntry:
    """One limit eigenpair: eigenvalue, evaluators, degeneracy bookkeeping.

    ``u`` maps (n, d) ambient points to values; ``grad`` maps them to ambient
    tangent vectors.  ``operator_scale`` is the multiple of Delta_rho this
    eigenvalue refers to; ``grad`` itself is the unscaled geometric gradient.
    """

    index: int
    eigenvalue: float
    u: object
    grad: object
    degeneracy: str
    operator_scale: float = 1.0

    def energy_density(self, model, x):
        """Pointwise Dirichlet energy density scale*|grad u|^2 rho."""
        g = self.grad(x)
        return self.operator_scale * np.einsum("ij,ij->i", g, g) \
            * model.density_at(x)


@dataclass(frozen=True)
class AnalyticSpectrum:
    entries: list
    operator_scale: float
    model: DensityModel

    def __getitem__(self, l):
        """1-based eigenvalue index, matching the ordering l = 1, 2, ..."""
        return self.entries[l - 1]

    def __len__(self):
        return len(self.entries)

    @property
    def values(self):
        return np.array([e.eigenvalue for e in self.entries])


def raw_operator_scale(m, profile="indicator", sigma_eta=None):
    """Scale of the limit operator for a kernel used as built: sigma_eta/2.

    For the indicator profile sigma_eta = omega_m/(m+2) in closed form
    (2/3 at m=1, pi/4 at m=2), with omega_m the unit-ball volume.
    """
    if sigma_eta is None:
        if profile != "indicator":
            raise ValueError("sigma_eta required for non-indicator profiles")
        omega_m = np.pi ** (m / 2.0) / _gamma(m / 2.0 + 1.0)
        sigma_eta = omega_m / (m + 2.0)
    return sigma_eta / 2.0


def _const_entry(model, scale):
    vol = model.volume

    def u(x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.ones(x.shape[0])

    def grad(x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.zeros_like(x)

    return SpectrumEntry(index=1, eigenvalue=0.0, u=u, grad=grad,
                         degeneracy="const", operator_scale=scale)


def _circle_like_entries(model, scale, l_max, angle_of, tangent_of,
                         arclength_rate):
    """Fourier ladder for 1-manifolds parameterized by arc length.

    angle_of(x) -> phase in [0, 2pi); tangent_of(x) -> unit tangent;
    arclength_rate = d(arclength)/d(phase) evaluator (constant for circle).
    """
    rho = model.rho
    L = model.volume
    entries = [_const_entry(model, scale)]
    k = 1
    while len(entries) < l_max:
        lam = scale * rho * (2.0 * np.pi * k / L) ** 2
        for trig, name in ((np.sin, "sin"), (np.cos, "cos")):
            dtrig = np.cos if trig is np.sin else lambda z: -np.sin(z)

            def u(x, k=k, trig=trig):
                ph = angle_of(np.atleast_2d(np.asarray(x, dtype=float)))
                return np.sqrt(2.0) * trig(k * ph)

            def grad(x, k=k, dtrig=dtrig):
                x = np.atleast_2d(np.asarray(x, dtype=float))
                ph = angle_of(x)
                rate = arclength_rate(ph)
                du_ds = np.sqrt(2.0) * k * dtrig(k * ph) / rate
                return du_ds[:, None] * tangent_of(x)

            entries.append(SpectrumEntry(
                index=len(entries) + 1, eigenvalue=lam, u=u, grad=grad,
                degeneracy=f"k={k}", operator_scale=scale))
            if len(entries) == l_max:
                break
        k += 1
    return entries


def _circle_spectrum(model, scale, l_max):
    r = model.spec.radius

    def angle_of(x):
        return np.mod(np.arctan2(x[:, 1], x[:, 0]), 2.0 * np.pi)

    def tangent_of(x):
        th = angle_of(x)
        return np.column_stack([-np.sin(th), np.cos(th)])

    def rate(ph):
        return np.full_like(ph, r)

    return _circle_like_entries(model, scale, l_max, angle_of, tangent_of,
                                rate)


def _ellipse_spectrum(model, scale, l_max):
    spec = model.spec
    arc = spec._arc
    L = arc.length

    def angle_of(x):
        t = np.mod(np.arctan2(x[:, 1] / spec.semi_axis_b,
                              x[:, 0] / spec.semi_axis_a), 2.0 * np.pi)
        return 2.0 * np.pi * arc.arclength_of_param(t) / L

    def tangent_of(x):
        t = np.mod(np.arctan2(x[:, 1] / spec.semi_axis_b,
                              x[:, 0] / spec.semi_axis_a), 2.0 * np.pi)
        tx = -spec.semi_axis_a * np.sin(t)
        ty = spec.semi_axis_b * np.cos(t)
        nrm = np.hypot(tx, ty)
        return np.column_stack([tx / nrm, ty / nrm])

    def rate(ph):
        # phase is 2*pi*s/L, so ds/dphase is constant
        return np.full_like(ph, L / (2.0 * np.pi))

    return _circle_like_entries(model, scale, l_max, angle_of, tangent_of,
                                rate)


def _real_sph_harm(k, mm, theta, phi):
    """Real spherical harmonic of degree k, order mm, orthonormal on S^2."""
    x = np.cos(theta)
    am = abs(mm)
    # orthonormalization constant for P_k^m with Condon-Shortley in lpmv
    lognorm = 0.5 * (np.log(2 * k + 1) - np.log(4 * np.pi)
                     + _lgamma(k - am + 1) - _lgamma(k + am + 1))
    norm = np.exp(lognorm)
    p = lpmv(am, k, x)
    if mm == 0:
        return norm * p
    if mm > 0:
        return np.sqrt(2.0) * norm * p * np.cos(mm * phi)
    return np.sqrt(2.0) * norm * p * np.sin(am * phi)


def _real_sph_harm_dtheta(k, mm, theta, phi):
    """d/dtheta of the real spherical harmonic."""
    x = np.cos(theta)
    sin_t = np.maximum(np.sin(theta), 1e-300)
    am = abs(mm)
    lognorm = 0.5 * (np.log(2 * k + 1) - np.log(4 * np.pi)
                     + _lgamma(k - am + 1) - _lgamma(k + am + 1))
    norm = np.exp(lognorm)
    p_k = lpmv(am, k, x)
    p_km1 = lpmv(am, k - 1, x) if k - 1 >= am else np.zeros_like(x)
    # (1-x^2) dP/dx = -k x P_k^m + (k+m) P_{k-1}^m;  d/dtheta = -sin dP/dx
    dp_dtheta = (k * x * p_k - (k + am) * p_km1) / sin_t
    if mm == 0:
        return norm * dp_dtheta
    if mm > 0:
        return np.sqrt(2.0) * norm * dp_dtheta * np.cos(mm * phi)
    return np.sqrt(2.0) * norm * dp_dtheta * np.sin(am * phi)


def _lgamma(z):
    from math import lgamma
    return lgamma(z)


def _sphere2_spectrum(model, scale, l_max):
    spec = model.spec
    r = spec.radius
    vol = model.volume
    rho = model.rho
    entries = [_const_entry(model, scale)]
    k = 1
    while len(entries) < l_max:
        lam = scale * rho * k * (k + 1) / r ** 2
        for mm in range(-k, k + 1):
            def u(x, k=k, mm=mm):
                x = np.atleast_2d(np.asarray(x, dtype=float))
                theta, phi = _sphere_angles(x, r)
                return np.sqrt(vol) * _real_sph_harm(k, mm, theta, phi)

            def grad(x, k=k, mm=mm):
                x = np.atleast_2d(np.asarray(x, dtype=float))
                theta, phi = _sphere_angles(x, r)
                dth = np.sqrt(vol) * _real_sph_harm_dtheta(k, mm, theta, phi)
                if mm == 0:
                    dph = np.zeros_like(dth)
                else:
                    dph = np.sqrt(vol) * (-mm if mm > 0 else abs(mm)) \
                        * _real_sph_harm(k, -mm, theta, phi)
                sin_t = np.maximum(np.sin(theta), 1e-300)
                e_th = np.column_stack([
                    np.cos(theta) * np.cos(phi),
                    np.cos(theta) * np.sin(phi),
                    -np.sin(theta)])
                e_ph = np.column_stack([-np.sin(phi), np.cos(phi),
                                        np.zeros_like(phi)])
                return (dth / r)[:, None] * e_th \
                    + (dph / (r * sin_t))[:, None] * e_ph

            entries.append(SpectrumEntry(
                index=len(entries) + 1, eigenvalue=lam, u=u, grad=grad,
                degeneracy=f"degree={k}", operator_scale=scale))
            if len(entries) == l_max:
                break
        k += 1
    return entries


def _sphere_angles(x, r):
    z = np.clip(x[:, 2] / r, -1.0, 1.0)
    theta = np.arccos(z)
    phi = np.arctan2(x[:, 1], x[:, 0])
    return theta, phi


def _sphere_m_spectrum(model, scale, l_max):
    """Degree <= 1 ladder for S^m, any m: constants and coordinates."""
    spec = model.spec
    m = spec.intrinsic_dim
    r = spec.radius
    rho = model.rho
    entries = [_const_entry(model, scale)]
    lam = scale * rho * m / r ** 2
    for axis in range(m + 1):
        if len(entries) == l_max:
            break

        def u(x, axis=axis):
            x = np.atleast_2d(np.asarray(x, dtype=float))
            return np.sqrt(m + 1.0) * x[:, axis] / r

        def grad(x, axis=axis):
            x = np.atleast_2d(np.asarray(x, dtype=float))
            xhat = x / r
            e = np.zeros((x.shape[0], x.shape[1]))
            e[:, axis] = 1.0
            tang = e - xhat * xhat[:, [axis]]
            return np.sqrt(m + 1.0) / r * tang

        entries.append(SpectrumEntry(
            index=len(entries) + 1, eigenvalue=lam, u=u, grad=grad,
            degeneracy="degree=1", operator_scale=scale))
    if len(entries) < l_max:
        raise UnsupportedManifold(
            f"analytic spectrum for S^{m} implemented through degree 1 "
            f"({m + 2} eigenpairs); requested {l_max}")
    return entries


def _flat_torus_spectrum(model, scale, l_max):
    spec = model.spec
    m = spec.intrinsic_dim
    radii = np.array(spec.radii)
    rho = model.rho

    # enumerate frequency vectors k >= 0 and cos/sin choices per nonzero k_i
    kmax = 1
    while (kmax / radii.max()) ** 2 <= _flat_torus_kth_needed(l_max, radii):
        kmax += 1
    freqs = np.array(np.meshgrid(*([range(kmax + 1)] * m),
                                 indexing="ij")).reshape(m, -1).T
    modes = []
    for kvec in freqs:
        lam0 = float(np.sum((kvec / radii) ** 2))
        if lam0 == 0.0:
            continue
        nz = [i for i in range(m) if kvec[i] > 0]
        for pattern in range(2 ** len(nz)):
            trig = ["cos"] * m
            for b, i in enumerate(nz):
                if (pattern >> b) & 1:
                    trig[i] = "sin"
            modes.append((lam0, tuple(kvec), tuple(trig)))
    modes.sort(key=lambda t: (t[0], t[1], t[2]))

    entries = [_const_entry(model, scale)]
    for lam0, kvec, trig in modes:
        if len(entries) == l_max:
            break

        def u(x, kvec=kvec, trig=trig):
            x = np.atleast_2d(np.asarray(x, dtype=float))
            th = _torus_angles(x, m)
            val = np.ones(x.shape[0])
            for i, k in enumerate(kvec):
                if k == 0:
                    continue
                f = np.cos if trig[i] == "cos" else np.sin
                val = val * np.sqrt(2.0) * f(k * th[:, i])
            return val

        def grad(x, kvec=kvec, trig=trig):
            x = np.atleast_2d(np.asarray(x, dtype=float))
            th = _torus_angles(x, m)
            n = x.shape[0]
            factors = np.ones((n, m))
            dfactors = np.zeros((n, m))
            for i, k in enumerate(kvec):
                if k == 0:
                    continue
                if trig[i] == "cos":
                    factors[:, i] = np.sqrt(2.0) * np.cos(k * th[:, i])
                    dfactors[:, i] = -np.sqrt(2.0) * k * np.sin(k * th[:, i])
                else:
                    factors[:, i] = np.sqrt(2.0) * np.sin(k * th[:, i])
                    dfactors[:, i] = np.sqrt(2.0) * k * np.cos(k * th[:, i])
            g = np.zeros((n, 2 * m))
            for i in range(m):
                du_dth = dfactors[:, i].copy()
                for j in range(m):
                    if j != i:
                        du_dth *= factors[:, j]
                # d/d(arclength_i) = (1/r_i) d/dtheta_i; tangent of factor i
                du_ds = du_dth / radii[i]
                g[:, 2 * i] = -np.sin(th[:, i]) * du_ds
                g[:, 2 * i + 1] = np.cos(th[:, i]) * du_ds
            return g

        entries.append(SpectrumEntry(
            index=len(entries) + 1,
            eigenvalue=scale * rho * lam0, u=u, grad=grad,
            degeneracy=f"freq={kvec},trig={trig}", operator_scale=scale))
    if len(entries) < l_max:
        raise UnsupportedManifold("flat torus mode enumeration exhausted; "
                                  "increase internal kmax")
    return entries


def _flat_torus_kth_needed(l_max, radii):
    # generous eigenvalue cutoff so enumeration covers l_max modes
    return (l_max + 2.0) / min(radii) ** 2


def _torus_angles(x, m):
    th = np.empty((x.shape[0], m))
    for i in range(m):
        th[:, i] = np.mod(np.arctan2(x[:, 2 * i + 1], x[:, 2 * i]),
                          2.0 * np.pi)
    return th


def analytic_spectrum(model, l_max, scale=1.0):
    """First l_max eigenpairs of scale*Delta_rho, ascending, canonical basis.

    Degenerate eigenspaces come in a fixed basis (sin before cos Fourier
    pairs; real spherical harmonics ordered by order -k..k; flat-torus
    product modes in (eigenvalue, frequency, trig-pattern) order) with a
    degeneracy label on each entry.
    """
    if l_max < 1:
        raise ValueError("l_max must be >= 1")
    spec = model.spec
    if isinstance(spec, Circle):
        entries = _circle_spectrum(model, scale, l_max)
    elif isinstance(spec, Ellipse):
        entries = _ellipse_spectrum(model, scale, l_max)
    elif isinstance(spec, Sphere):
        if spec.intrinsic_dim == 2:
            entries = _sphere2_spectrum(model, scale, l_max)
        else:
            entries = _sphere_m_spectrum(model, scale, l_max)
    elif isinstance(spec, FlatTorus):
        entries = _flat_torus_spectrum(model, scale, l_max)
    elif isinstance(spec, EmbeddedTorus):
        raise UnsupportedManifold(
            "the embedded torus has no closed-form limit spectrum")
    else:
        raise ValueError(f"unknown manifold spec: {spec!r}")
    return AnalyticSpectrum(entries=entries, operator_scale=scale,
                            model=model)


def rotate_eigenspace(entries, rotation):
    """New entries spanning the same eigenspace, basis rotated by ``rotation``.

    All entries must share one eigenvalue; rotation is an orthogonal matrix of
    matching size.
    """
    rotation = np.asarray(rotation, dtype=float)
    k = len(entries)
    if rotation.shape != (k, k):
        raise ValueError("rotation shape does not match eigenspace size")
    lam = entries[0].eigenvalue
    if any(abs(e.eigenvalue - lam) > 1e-12 * max(1.0, abs(lam))
           for e in entries):
        raise ValueError("entries do not share an eigenvalue")
    out = []
    for a in range(k):
        row = rotation[a]

        def u(x, row=row):
            return sum(c * e.u(x) for c, e in zip(row, entries))

        def grad(x, row=row):
            return sum(c * e.grad(x) for c, e in zip(row, entries))

        out.append(SpectrumEntry(
            index=entries[a].index, eigenvalue=lam, u=u, grad=grad,
            degeneracy=entries[a].degeneracy + ",rotated",
            operator_scale=entries[a].operator_scale))
    return out
