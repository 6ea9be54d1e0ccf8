"""Smallest eigenpairs of the graph Laplacian in the empirical L2 geometry.

Eigenvectors are returned with unit empirical norm (1/n) sum v(x)^2 = 1,
i.e. rescaled by sqrt(n) from unit Euclidean length.  For near-degenerate
eigenvalue clusters, :func:`matched_eigenvalue` extracts the per-eigenfunction
statistic obtained by projecting a reference function onto the cluster's
eigenspace; this is the meaningful quantity to compare against the limit
variance when the limit eigenvalue is not simple.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

__all__ = [
    "EigenPairs", "EigengapReport", "NonConvergence", "ZeroInnerProduct",
    "smallest_eigenpairs", "align_sign", "h1_seminorm", "eigengap_report",
    "matched_eigenvalue", "MatchedValue",
]

DENSE_CUTOFF = 512
DEFAULT_TOL = 1e-10


class NonConvergence(RuntimeError):
    def __init__(self, msg, residuals=None):
        super().__init__(msg)
        self.residuals = residuals


class ZeroInnerProduct(ValueError):
    pass


@dataclass(frozen=True)
class EigenPairs:
    """Ascending eigenvalues with L2(X_n)-orthonormal eigenvectors."""

    values: np.ndarray
    vectors: np.ndarray  # column l-1 is the l-th eigenvector, unit L2(X_n)
    residuals: np.ndarray
    n: int

    def __len__(self):
        return len(self.values)

    def value(self, l):
        """1-based eigenvalue index."""
        return float(self.values[l - 1])

    def vector(self, l):
        return self.vectors[:, l - 1]

    def inner(self, f, g):
        return float(np.dot(f, g)) / self.n

    def to_csv(self, path, dump_vectors=False):
        with open(path, "w") as fh:
            if dump_vectors:
                fh.write("index,value,residual,vector\n")
            else:
                fh.write("index,value,residual\n")
            for k, (lam, res) in enumerate(zip(self.values, self.residuals)):
                row = f"{k + 1},{repr(float(lam))},{repr(float(res))}"
                if dump_vectors:
                    row += "," + " ".join(repr(float(v))
                                          for v in self.vectors[:, k])
                fh.write(row + "\n")


@dataclass(frozen=True)
class EigengapReport:
    gaps: np.ndarray
    simple: np.ndarray
    threshold: float

    def is_simple(self, l):
        return bool(self.simple[l - 1])


def _canonical_sign(v):
    # deterministic orientation: largest-magnitude entry made positive
    k = int(np.argmax(np.abs(v)))
    return v if v[k] >= 0 else -v


def smallest_eigenpairs(L, count, tol=DEFAULT_TOL):
    """First ``count`` eigenpairs of the Laplacian, ascending.

    Dense solve for n <= 512 (exact oracle regime), otherwise implicitly
    restarted Lanczos in shift-invert mode with a fixed start vector so
    results are reproducible.  Raises NonConvergence with the best residuals
    on iteration-cap failure.
    """
    n = L.shape[0]
    if not 1 <= count <= n:
        raise ValueError(f"count must be in [1, {n}], got {count}")
    if tol <= 0:
        raise ValueError("tol must be positive")
    A = L.to_sparse()
    if n <= DENSE_CUTOFF:
        vals, vecs = scipy.linalg.eigh(A.toarray())
        vals, vecs = vals[:count], vecs[:, :count]
    else:
        # shift slightly below 0: A is PSD so A - sigma I is SPD
        sigma = -1e-6 * max(L.scale, 1.0)
        maxiter = 50 * count * int(np.ceil(np.log(n)))
        v0 = np.full(n, 1.0 / np.sqrt(n))
        v0[::2] += 1e-3 / np.sqrt(n)
        try:
            vals, vecs = spla.eigsh(A, k=count, sigma=sigma, which="LM",
                                    tol=tol, v0=v0, maxiter=maxiter)
        except spla.ArpackNoConvergence as exc:
            got = exc.eigenvalues
            raise NonConvergence(
                f"eigensolver converged {len(got)}/{count} pairs "
                f"after {maxiter} iterations", residuals=got) from exc
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
    # unit Euclidean -> unit empirical L2(X_n) norm
    vecs = vecs * np.sqrt(n)
    vecs = np.column_stack([_canonical_sign(vecs[:, k])
                            for k in range(vecs.shape[1])])
    res = np.empty(count)
    for k in range(count):
        r = L.apply(vecs[:, k]) - vals[k] * vecs[:, k]
        res[k] = np.sqrt(np.mean(r * r))
    return EigenPairs(values=np.asarray(vals, dtype=float), vectors=vecs,
                      residuals=res, n=n)


def align_sign(v, reference, n=None):
    """v or -v, whichever has nonnegative L2(X_n) inner product with the
    reference; raises ZeroInnerProduct when the product vanishes."""
    v = np.asarray(v, dtype=float)
    reference = np.asarray(reference, dtype=float)
    if not np.any(v):
        raise ValueError("cannot align the zero vector")
    ip = float(np.dot(v, reference)) / (n or len(v))
    if ip == 0.0:
        raise ZeroInnerProduct("reference is orthogonal to the vector")
    return v if ip > 0 else -v


def h1_seminorm(f, L):
    """Squared discrete H1 seminorm, evaluated as 2 <L f, f>_{L2(X_n)}."""
    f = np.asarray(f, dtype=float)
    return 2.0 * float(np.dot(L.apply(f), f)) / len(f)


def eigengap_report(values, threshold=1e-8):
    values = np.asarray(values, dtype=float)
    k = len(values)
    gaps = np.empty(k)
    for l in range(k):
        others = np.delete(values, l)
        gaps[l] = np.min(np.abs(others - values[l])) if len(others) else np.inf
    return EigengapReport(gaps=gaps, simple=gaps > threshold,
                          threshold=threshold)


@dataclass(frozen=True)
class MatchedValue:
    """Eigenvalue statistic attached to a fixed reference eigenfunction."""

    value: float
    vector: np.ndarray
    cluster: tuple
    alignment: float  # |<v, ref>| / (|v| |ref|) in L2(X_n)


def _cluster_indices(values, l, rel_tol):
    lam = values[l - 1]
    tol = rel_tol * max(abs(lam), np.max(np.abs(values)) * 1e-12)
    cluster = [k for k in range(len(values))
               if k >= 1 and abs(values[k] - lam) <= tol]
    if lam == 0.0 or not cluster:
        cluster = [l - 1]
    return cluster


def matched_eigenvalue(pairs, l, reference, rel_tol=0.4):
    """Eigenvalue of the cluster-eigenspace direction best aligned with a
    reference function on the sample.

    The cluster is the set of computed eigenvalues within ``rel_tol``
    relative distance of the l-th one.  The returned value is the Rayleigh
    quotient of the normalized projection of ``reference`` onto the cluster
    eigenspace; for a simple well-separated eigenvalue it reduces to the
    ordered value.
    """
    reference = np.asarray(reference, dtype=float)
    cluster = _cluster_indices(pairs.values, l, rel_tol)
    V = pairs.vectors[:, cluster]  # columns unit L2(X_n), orthogonal
    coef = V.T @ reference / pairs.n
    nrm = np.linalg.norm(coef)
    if nrm == 0.0:
        raise ZeroInnerProduct(
            "reference is orthogonal to the eigenvalue cluster span")
    coef = coef / nrm
    value = float(coef @ (pairs.values[cluster] * coef))
    vector = V @ coef
    ref_l2 = np.sqrt(np.mean(reference ** 2))
    alignment = float(nrm / ref_l2) if ref_l2 > 0 else 0.0
    return MatchedValue(value=value, vector=align_sign(vector, reference),
                        cluster=tuple(int(c) for c in cluster),
                        alignment=min(alignment, 1.0))
