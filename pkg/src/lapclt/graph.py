"""Eps-proximity graphs and the associated unnormalized graph Laplacian.

The operator realized here acts on functions over the sample as

    (L u)(x_i) = 1/(n eps^{m+2}) * sum_j w(|x_i-x_j|/eps) (u(x_i)-u(x_j)),

stored as scale * (Degree - Weight) with scale = 1/(n eps^{m+2}).  Distances
are ambient Euclidean; the closed ball |x_i-x_j| <= eps is connected and
self-loops are excluded.
"""

import warnings
from dataclasses import dataclass
from enum import Enum
from math import gamma as _gamma

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from ._accel import neighbor_pairs

__all__ = [
    "KernelScaling", "Kernel", "EpsGraph", "LaplacianOperator",
    "build_eps_graph", "assemble_laplacian", "leave_one_out",
    "DisconnectedGraphWarning",
]


class DisconnectedGraphWarning(UserWarning):
    pass


class KernelScaling(Enum):
    RAW = "raw"
    NORMALIZED = "normalized"


def _unit_ball_volume(m):
    return np.pi ** (m / 2.0) / _gamma(m / 2.0 + 1.0)


@dataclass(frozen=True)
class Kernel:
    """Radial edge-weight profile on [0, 1] plus its scaling convention.

    ``sigma_eta`` is the second-moment constant int eta(|v|) v_1^2 dv over
    R^m; NORMALIZED scaling multiplies the profile by 2/sigma_eta so the
    half-second-moment equals 1.
    """

    profile_name: str
    scaling: KernelScaling
    sigma_eta: float
    table_t: np.ndarray = None
    table_eta: np.ndarray = None

    @staticmethod
    def indicator(m, scaling=KernelScaling.RAW):
        sigma_eta = _unit_ball_volume(m) / (m + 2.0)
        return Kernel(profile_name="indicator", scaling=scaling,
                      sigma_eta=sigma_eta)

    @staticmethod
    def from_profile(table_t, table_eta, m, scaling=KernelScaling.RAW):
        """Tabulated non-increasing Lipschitz profile on [0, 1]."""
        t = np.asarray(table_t, dtype=float)
        e = np.asarray(table_eta, dtype=float)
        if t.ndim != 1 or t.shape != e.shape or len(t) < 2:
            raise ValueError("profile table must be two equal 1-d arrays")
        if t[0] != 0.0 or t[-1] != 1.0 or np.any(np.diff(t) <= 0):
            raise ValueError("profile abscissae must increase from 0 to 1")
        if np.any(np.diff(e) > 1e-12) or np.any(e < 0):
            raise ValueError("profile must be non-increasing and >= 0")
        # sigma_eta = omega_m * int_0^1 eta(t) t^{m+1} dt (radial reduction)
        nodes, wts = np.polynomial.legendre.leggauss(64)
        tt = 0.5 * (nodes + 1.0)
        vals = np.interp(tt, t, e) * tt ** (m + 1)
        radial = 0.5 * np.sum(wts * vals)
        sigma_eta = _unit_ball_volume(m) * radial
        return Kernel(profile_name="table", scaling=scaling,
                      sigma_eta=float(sigma_eta), table_t=t, table_eta=e)

    @property
    def scale_factor(self):
        if self.scaling is KernelScaling.NORMALIZED:
            return 2.0 / self.sigma_eta
        return 1.0

    def weights(self, t):
        """Edge weights for normalized distances t = |x-y|/eps in [0, 1]."""
        t = np.asarray(t, dtype=float)
        if self.profile_name == "indicator":
            w = np.where(t <= 1.0, 1.0, 0.0)
        else:
            w = np.where(t <= 1.0, np.interp(t, self.table_t, self.table_eta),
                         0.0)
        return self.scale_factor * w


@dataclass(frozen=True)
class EpsGraph:
    cloud: object
    eps: float
    kernel: Kernel
    adjacency: sp.csr_matrix  # symmetric, zero diagonal
    connected: bool

    @property
    def n(self):
        return self.adjacency.shape[0]

    @property
    def degrees(self):
        return np.asarray(self.adjacency.sum(axis=1)).ravel()

    @property
    def n_edges(self):
        return self.adjacency.nnz // 2

    def edges_to_csv(self, path):
        """Coordinate-list export: one undirected edge (i<j) per row."""
        coo = sp.triu(self.adjacency, k=1).tocoo()
        order = np.lexsort((coo.col, coo.row))
        with open(path, "w") as fh:
            fh.write("i,j,weight\n")
            for i, j, w in zip(coo.row[order], coo.col[order],
                               coo.data[order]):
                fh.write(f"{i},{j},{repr(float(w))}\n")


def build_eps_graph(cloud, eps, kernel):
    """Connect all and only point pairs within (closed) distance eps.

    Neighbor search uses a uniform cell grid of side eps (numba) or a chunked
    pair scan (numpy fallback); either way edges come out sorted by (i, j).
    Warns with DisconnectedGraphWarning when the graph is disconnected.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    pts = cloud.points
    n = pts.shape[0]
    if n < 2:
        raise ValueError("need at least 2 points")
    ii, jj, dist = neighbor_pairs(pts, eps)
    # the search guarantees dist <= eps; clip pure sqrt roundoff above 1
    w = kernel.weights(np.minimum(dist / eps, 1.0))
    keep = w > 0.0
    ii, jj, w = ii[keep], jj[keep], w[keep]
    adj = sp.coo_matrix((np.concatenate([w, w]),
                         (np.concatenate([ii, jj]),
                          np.concatenate([jj, ii]))),
                        shape=(n, n)).tocsr()
    n_comp, _ = connected_components(adj, directed=False)
    connected = bool(n_comp == 1)
    if not connected:
        warnings.warn(f"eps-graph is disconnected ({n_comp} components)",
                      DisconnectedGraphWarning, stacklevel=2)
    return EpsGraph(cloud=cloud, eps=eps, kernel=kernel, adjacency=adj,
                    connected=connected)


@dataclass(frozen=True)
class LaplacianOperator:
    """scale * (Degree - Weight) with scale = 1/(n eps^{m+2})."""

    weights: sp.csr_matrix
    degrees: np.ndarray
    scale: float
    n: int
    eps: float
    m: int
    kernel: Kernel = None
    connected: bool = True

    @property
    def shape(self):
        return self.weights.shape

    def apply(self, u):
        u = np.asarray(u, dtype=float)
        return self.scale * (self.degrees * u - self.weights @ u)

    matvec = apply

    def to_sparse(self):
        n = self.weights.shape[0]
        return self.scale * (sp.diags(self.degrees) - self.weights)

    def to_dense(self):
        return self.to_sparse().toarray()

    def inner(self, f, g):
        """Empirical L2 inner product (1/n) sum f g on the support."""
        f = np.asarray(f, dtype=float)
        g = np.asarray(g, dtype=float)
        return float(f @ g) / len(f)

    def to_matrix_market(self, path):
        from scipy.io import mmwrite
        mmwrite(str(path), self.to_sparse().tocoo(), symmetry="symmetric")


def assemble_laplacian(graph, m):
    """Graph Laplacian of an eps-graph at operator scale 1/(n eps^{m+2})."""
    n = graph.n
    scale = 1.0 / (n * graph.eps ** (m + 2))
    return LaplacianOperator(weights=graph.adjacency,
                             degrees=graph.degrees, scale=scale, n=n,
                             eps=graph.eps, m=m, kernel=graph.kernel,
                             connected=graph.connected)


def leave_one_out(L, i):
    """Laplacian on the sample minus point i, keeping the 1/(n eps^{m+2})
    scale of the full operator."""
    n = L.weights.shape[0]
    if n < 3:
        raise ValueError("leave-one-out needs at least 3 points")
    if not 0 <= i < n:
        raise IndexError(f"point index {i} out of range for n={n}")
    keep = np.ones(n, dtype=bool)
    keep[i] = False
    W = L.weights[keep][:, keep].tocsr()
    deg = np.asarray(W.sum(axis=1)).ravel()
    return LaplacianOperator(weights=W, degrees=deg, scale=L.scale,
                             n=L.n, eps=L.eps, m=L.m, kernel=L.kernel,
                             connected=L.connected)
