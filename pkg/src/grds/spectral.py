"""
Spectral analysis of graph Laplacians and regularized iteration matrices.

Every iteration matrix handled here has the form ``F_Q = Q + (I - Q) D^-1 A``
with a diagonal ``Q``. Such a matrix is diagonally similar to a symmetric
one, so all spectra are obtained from a symmetric eigensolver and are real
by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graph import Graph, GraphError, is_connected, matrices

UNIT_TOL = 1e-9
SYM_TOL = 1e-10
CHEEGER_MAX_N = 24


class SpectralError(ValueError):
    pass


@dataclass(frozen=True)
class Spectrum:
    """Real eigenvalues sorted ascending, tagged with the matrix they describe."""

    values: np.ndarray
    context: str = ""

    def __len__(self):
        return len(self.values)

    def __getitem__(self, k):
        return self.values[k]


@dataclass(frozen=True)
class SpectralSummary:
    lambda1_NL: float
    lambdaN1_NL: float
    varsigma_NL: float
    lambda1_L: float
    lambdaN1_L: float
    varsigma_L: float


def sym_eigen(S, context="", vectors=False):
    """Eigen-decomposition of a symmetric matrix.

    Returns a :class:`Spectrum` (ascending), plus the eigenvector matrix
    when ``vectors`` is true.
    """
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise SpectralError(f"expected a square matrix, got shape {S.shape}")
    asym = np.max(np.abs(S - S.T)) if S.size else 0.0
    if asym >= SYM_TOL:
        raise SpectralError(f"matrix is not symmetric (max |S - S^T| = {asym:.3e})")
    w, V = np.linalg.eigh(0.5 * (S + S.T))
    spec = Spectrum(values=w, context=context)
    return (spec, V) if vectors else spec


def laplacian_spectrum(g: Graph) -> Spectrum:
    return sym_eigen(matrices(g).L, context="L")


def normalized_laplacian_spectrum(g: Graph) -> Spectrum:
    return sym_eigen(matrices(g).NL, context="NL")


def spectral_summary(g: Graph) -> SpectralSummary:
    nl = normalized_laplacian_spectrum(g).values
    lap = laplacian_spectrum(g).values
    return SpectralSummary(
        lambda1_NL=float(nl[1]),
        lambdaN1_NL=float(nl[-1]),
        varsigma_NL=float(0.5 * (nl[1] + nl[-1])),
        lambda1_L=float(lap[1]),
        lambdaN1_L=float(lap[-1]),
        varsigma_L=float(0.5 * (lap[1] + lap[-1])),
    )


def symmetrizer(g: Graph, q) -> np.ndarray:
    """Diagonal of ``M = (I - Q)^-1 D``, the weight making ``M F_Q`` symmetric."""
    q = _check_q(g, q)
    return g.degrees / (1.0 - q)


def symmetrized_FQ(g: Graph, q) -> np.ndarray:
    """``M^(1/2) F_Q M^(-1/2)``, written entrywise so it is exactly symmetric."""
    q = _check_q(g, q)
    A = matrices(g).A.astype(float)
    w = np.sqrt((1.0 - q) / g.degrees)
    S = w[:, None] * A * w[None, :]
    S[np.diag_indices_from(S)] = q
    return S


def spectrum_FQ(g: Graph, q, context="F_Q") -> Spectrum:
    """Real spectrum of ``F_Q = Q + (I - Q) D^-1 A`` via diagonal similarity."""
    if not is_connected(g):
        raise SpectralError("graph is disconnected")
    return sym_eigen(symmetrized_FQ(g, q), context=context)


def _check_q(g, q):
    q = np.asarray(q, dtype=float)
    if q.shape != (g.n,):
        raise SpectralError(f"regularization vector must have length {g.n}, got shape {q.shape}")
    if not np.all(q < 1.0):
        bad = [int(k) + 1 for k in np.flatnonzero(q >= 1.0)]
        raise SpectralError(f"q_i must be < 1 (I - Q invertible); violated at nodes {bad}")
    return q


def cri(s: Spectrum) -> float:
    """Convergence rate index: largest modulus once the unit eigenvalue is removed."""
    vals = np.asarray(s.values if isinstance(s, Spectrum) else s, dtype=float)
    k = int(np.argmin(np.abs(vals - 1.0)))
    if abs(vals[k] - 1.0) > UNIT_TOL:
        raise SpectralError(f"no unit eigenvalue (closest is {vals[k]!r})")
    rest = np.delete(vals, k)
    if rest.size == 0:
        return 0.0
    if np.any(np.abs(rest - 1.0) <= UNIT_TOL):
        raise SpectralError("unit eigenvalue is repeated (graph disconnected?); CRI undefined")
    return float(np.max(np.abs(rest)))


# -- combinatorial bounds ----------------------------------------------------


def cheeger_constant(g: Graph, chunk: int = 1 << 18) -> float:
    """Exact Cheeger constant by enumerating every bipartition.

    Node 1 is pinned to the complement side, leaving ``2^(n-1) - 1``
    nonempty proper subsets.
    """
    if g.n > CHEEGER_MAX_N:
        raise SpectralError(
            f"exhaustive bound exceeded: exact Cheeger constant limited to n <= {CHEEGER_MAX_N}, got n = {g.n}"
        )
    if not is_connected(g):
        raise SpectralError("graph is disconnected")
    A = matrices(g).A.astype(np.float64)
    d = A.sum(axis=1)
    vol = d.sum()
    # subsets over nodes 2..n
    m = g.n - 1
    A_sub = A[1:, 1:]
    d_sub = d[1:]
    shifts = np.arange(m, dtype=np.int64)
    best = math.inf
    total = 1 << m
    for lo in range(1, total, chunk):
        masks = np.arange(lo, min(lo + chunk, total), dtype=np.int64)
        B = ((masks[:, None] >> shifts) & 1).astype(np.float64)
        vol0 = B @ d_sub
        inner = np.einsum("ij,ij->i", B @ A_sub, B)  # twice the internal edges
        cut = vol0 - inner
        ratio = cut / np.minimum(vol0, vol - vol0)
        best = min(best, float(ratio.min()))
    return best


def hg_coefficient(g: Graph) -> float:
    """Minimum over edges of shared neighbours over twice the larger degree."""
    if not is_connected(g):
        raise SpectralError("graph is disconnected")
    nb = {i: set(v) for i, v in g.neighbors.items()}
    return min(len(nb[i] & nb[j]) / (2 * max(len(nb[i]), len(nb[j]))) for i, j in g.edges)


@dataclass(frozen=True)
class BoundReport:
    lambda1_le_2Cheeger: bool | None
    lambdaN1_le_2_1mHG: bool
    varsigma_lt_1: bool
    varsigma_NL: float
    cheeger: float | None
    hg: float
    cheeger_lt_hg: bool | None

    @property
    def cheeger_skipped(self):
        return self.cheeger is None


def bound_report(g: Graph, tol=1e-9) -> BoundReport:
    """Check the Cheeger and common-neighbour eigenvalue bounds on ``g``.

    The Cheeger part is reported as ``None`` (skipped) when ``n`` exceeds
    the exhaustive enumeration limit.
    """
    s = spectral_summary(g)
    hg = hg_coefficient(g)
    if g.n <= CHEEGER_MAX_N:
        c = cheeger_constant(g)
        lam1_ok = s.lambda1_NL <= 2 * c + tol
        c_lt_h = c < hg
    else:
        c = lam1_ok = c_lt_h = None
    return BoundReport(
        lambda1_le_2Cheeger=lam1_ok,
        lambdaN1_le_2_1mHG=s.lambdaN1_NL <= 2 * (1 - hg) + tol,
        varsigma_lt_1=s.varsigma_NL < 1 - tol,
        varsigma_NL=s.varsigma_NL,
        cheeger=c,
        hg=hg,
        cheeger_lt_hg=c_lt_h,
    )


def ramanujan_check(g: Graph, tol=1e-9) -> bool:
    p = g.degree_profile()
    if p.d_m != p.d_M:
        raise GraphError(f"Ramanujan check needs a regular graph (degrees {p.d_m}..{p.d_M})")
    if not is_connected(g):
        raise SpectralError("graph is disconnected")
    c = p.d_m
    nl = normalized_laplacian_spectrum(g).values
    return bool(np.max(c * np.abs(1.0 - nl[1:])) <= 2 * math.sqrt(c - 1) + tol)
