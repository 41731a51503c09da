"""
Iterative estimation schemes ``x(k+1) = F x(k) + u`` and their parameters.

All schemes are realizations of the per-node regularized iteration
``F_Q = Q + (I - Q) F_0``, ``u_Q = (I - Q) u_0``; each one records the
equivalent regularization vector ``q`` so spectra can always be computed
through the symmetric similarity in :mod:`grds.spectral`.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .graph import Graph, is_connected, matrices
from .spectral import SpectralError, Spectrum, cri, spectral_summary, spectrum_FQ

DOMAIN_MARGIN = 1e-9
CONVERGENCE_MARGIN = 1e-12
INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0

LABELS = ("sigma0", "sigmaQ", "sigmaEta", "sigmaRho", "sigmaEps")


class SchemeError(ValueError):
    pass


class ExtendedDomainWarning(UserWarning):
    """Parameter is valid only in the extended (regularized) domain."""


@dataclass(frozen=True)
class ParameterDomain:
    lower: float
    upper: float
    label: str = ""

    def __post_init__(self):
        if not self.lower < self.upper:
            raise SchemeError(f"degenerate domain {self.label}: ({self.lower}, {self.upper})")

    def contains(self, x, margin=DOMAIN_MARGIN):
        """Open-interval membership, keeping ``margin`` clear of each finite end."""
        x = np.asarray(x, dtype=float)
        lo_ok = x > self.lower + margin
        hi_ok = x < self.upper - margin if math.isfinite(self.upper) else np.isfinite(x)
        return bool(np.all(lo_ok & hi_ok))

    def closure_contains(self, x, tol=1e-12):
        x = np.asarray(x, dtype=float)
        return bool(np.all((x >= self.lower - tol) & (x <= self.upper + tol)))

    def as_dict(self):
        return {"label": self.label, "lower": self.lower, "upper": self.upper}


@dataclass(frozen=True, eq=False)
class IterativeScheme:
    graph: Graph
    F: np.ndarray
    u: np.ndarray
    label: str
    q: np.ndarray
    params: dict = field(default_factory=dict)

    def step(self, x):
        return self.F @ x + self.u

    def spectrum(self) -> Spectrum:
        return spectrum_FQ(self.graph, self.q, context=f"F[{self.label}]")

    def cri(self) -> float:
        return cri(self.spectrum())


# -- q mappings ---------------------------------------------------------------


def q_from_eta(g: Graph, eta):
    return np.full(g.n, float(eta))


def q_from_rho(g: Graph, rho):
    half = 0.5 * float(rho)
    return half / (g.degrees + half)


def q_from_eps(g: Graph, eps):
    return 1.0 - float(eps) * g.degrees


# -- builders -------------------------------------------------------------------


def _base(g: Graph, xt):
    if not is_connected(g):
        raise SchemeError("graph is disconnected")
    xt = np.asarray(xt, dtype=float)
    if xt.shape != (g.n,):
        raise SchemeError(f"aggregated measurement must have length {g.n}, got shape {xt.shape}")
    b = matrices(g)
    d = g.degrees.astype(float)
    F0 = b.A / d[:, None]
    u0 = 0.5 * xt / d
    return b, d, F0, u0


def build_sigma0(g: Graph, xt) -> IterativeScheme:
    _, _, F0, u0 = _base(g, xt)
    return IterativeScheme(g, F0, u0, "sigma0", np.zeros(g.n), {})


def build_sigmaQ(g: Graph, xt, q) -> IterativeScheme:
    q = np.asarray(q, dtype=float)
    if q.shape != (g.n,):
        raise SchemeError(f"regularization vector must have length {g.n}, got shape {q.shape}")
    if not np.all(q < 1.0):
        raise SchemeError("every q_i must be < 1")
    _, _, F0, u0 = _base(g, xt)
    omq = 1.0 - q
    F = omq[:, None] * F0
    F[np.diag_indices_from(F)] += q
    return IterativeScheme(g, F, omq * u0, "sigmaQ", q.copy(), {"q": q.copy()})


def _check_param(name, value, ext: ParameterDomain, classic: ParameterDomain, check):
    if not check:
        return
    if not math.isfinite(value) or not ext.contains(value):
        raise SchemeError(f"{name} = {value!r} outside extended domain ({ext.lower}, {ext.upper})")
    if not classic.closure_contains(value):
        warnings.warn(
            f"{name} = {value:.6g} lies only in the extended domain ({ext.lower:.6g}, {ext.upper:.6g})",
            ExtendedDomainWarning,
            stacklevel=3,
        )


def build_sigma_eta(g: Graph, xt, eta, check=True) -> IterativeScheme:
    eta = float(eta)
    if check:
        _check_param("eta", eta, extended_domains(g)["eta"], classic_domains(g)["eta"], check)
    _, _, F0, u0 = _base(g, xt)
    F = eta * np.eye(g.n) + (1.0 - eta) * F0
    return IterativeScheme(g, F, (1.0 - eta) * u0, "sigmaEta", q_from_eta(g, eta), {"eta": eta})


def build_sigma_rho(g: Graph, xt, rho, check=True) -> IterativeScheme:
    rho = float(rho)
    p = g.degree_profile()
    if rho <= -2 * p.d_m:
        raise SchemeError(f"rho = {rho} makes D + rho/2 I singular or indefinite (needs rho > {-2 * p.d_m})")
    if check:
        _check_param("rho", rho, extended_domains(g)["rho"], classic_domains(g)["rho"], check)
    b, d, _, u0 = _base(g, xt)
    inv = 1.0 / (d + 0.5 * rho)
    F = inv[:, None] * (b.A + 0.5 * rho * np.eye(g.n))
    u = inv * d * u0
    return IterativeScheme(g, F, u, "sigmaRho", q_from_rho(g, rho), {"rho": rho})


def build_sigma_eps(g: Graph, xt, eps, check=True) -> IterativeScheme:
    eps = float(eps)
    if eps <= 0:
        raise SchemeError(f"eps must be positive, got {eps}")
    if check:
        _check_param("eps", eps, extended_domains(g)["eps"], classic_domains(g)["eps"], check)
    b, d, _, u0 = _base(g, xt)
    F = np.eye(g.n) - eps * b.L
    return IterativeScheme(g, F, eps * d * u0, "sigmaEps", q_from_eps(g, eps), {"eps": eps})


def build(g: Graph, xt, label, param=None, check=True) -> IterativeScheme:
    if label == "sigma0":
        return build_sigma0(g, xt)
    if label == "sigmaQ":
        return build_sigmaQ(g, xt, param)
    builders = {"sigmaEta": build_sigma_eta, "sigmaRho": build_sigma_rho, "sigmaEps": build_sigma_eps}
    try:
        return builders[label](g, xt, param, check=check)
    except KeyError:
        raise SchemeError(f"unknown scheme {label!r}; expected one of {LABELS}") from None


# -- domains ------------------------------------------------------------------


def theorem2_domain(g: Graph) -> ParameterDomain:
    """Sufficient per-node domain ``(mu, 1)`` with ``mu = 1 - 2 / lambda_max(NL)``."""
    s = spectral_summary(g)
    mu = 1.0 - 2.0 / s.lambdaN1_NL
    lo = -1.0 + 2.0 / g.n
    if not (lo - 1e-9 <= mu <= 1e-9):
        raise SchemeError(f"mu = {mu} outside [{lo}, 0]; spectrum inconsistent")
    return ParameterDomain(min(mu, 0.0), 1.0, "Q_check")


def extended_domains(g: Graph) -> dict[str, ParameterDomain]:
    s = spectral_summary(g)
    mu = theorem2_domain(g).lower
    d_m = g.degree_profile().d_m
    return {
        "eta": ParameterDomain(mu, 1.0, "Q_check_eta"),
        "rho": ParameterDomain(d_m * (s.lambdaN1_NL - 2.0), math.inf, "Q_check_rho"),
        "eps": ParameterDomain(0.0, 2.0 / s.lambdaN1_L, "Q_bar_eps"),
    }


def classic_domains(g: Graph) -> dict[str, ParameterDomain]:
    d_M = g.degree_profile().d_M
    return {
        "eta": ParameterDomain(0.0, 1.0, "Q_eta"),
        "rho": ParameterDomain(0.0, math.inf, "Q_rho"),
        "eps": ParameterDomain(0.0, 1.0 / d_M, "Q_eps"),
    }


# -- optimal parameters -----------------------------------------------------------


def optimal_eta(g: Graph) -> float:
    return 1.0 - 1.0 / spectral_summary(g).varsigma_NL


def optimal_eps(g: Graph) -> float:
    return 1.0 / spectral_summary(g).varsigma_L


def rho_interval(g: Graph) -> tuple[float, float]:
    """Search interval ``2 (varsigma - 1) [s_m, s_M]`` for the optimal rho."""
    sigma = spectral_summary(g).varsigma_NL
    p = g.degree_profile()
    s_m, s_M = (p.d_m, p.d_M) if sigma >= 1 else (p.d_M, p.d_m)
    return 2 * (sigma - 1) * s_m, 2 * (sigma - 1) * s_M


def rho_cri(g: Graph, rho) -> float:
    return cri(spectrum_FQ(g, q_from_rho(g, rho)))


def optimal_rho(g: Graph, tol=1e-7, prescan=64) -> float:
    """Minimize the convergence rate index of the rho-scheme on its interval.

    Golden-section search when a ``prescan``-point profile is unimodal;
    otherwise the best point of a dense grid is refined locally. Ties go to
    the smaller rho.
    """
    if tol <= 0:
        raise SchemeError("tol must be positive")
    lo, hi = rho_interval(g)
    if g.is_regular() or hi - lo <= tol:
        return 0.5 * (lo + hi) if hi > lo else lo
    # keep clear of the extended-domain floor
    floor = extended_domains(g)["rho"].lower
    floor += 2 * DOMAIN_MARGIN * max(1.0, abs(floor))
    lo = max(lo, floor)

    def f(r):
        return rho_cri(g, r)

    grid = np.linspace(lo, hi, prescan)
    vals = np.array([f(r) for r in grid])
    if _unimodal(vals):
        a, b = lo, hi
    else:
        grid = np.linspace(lo, hi, 16 * prescan)
        vals = np.array([f(r) for r in grid])
        k = int(np.argmin(vals))
        a, b = grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]
    x = golden_section(f, a, b, tol)
    cands = sorted({a, x, b})
    best = min(cands, key=lambda r: (f(r), r))
    return float(best)


def golden_section(f, a, b, tol):
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    return c if fc <= fd else d


def _unimodal(vals, rtol=1e-12):
    diffs = np.diff(vals)
    eps = rtol * max(1.0, float(np.max(np.abs(vals))))
    signs = np.where(diffs > eps, 1, np.where(diffs < -eps, -1, 0))
    signs = signs[signs != 0]
    # non-increasing then non-decreasing: at most one sign change, from - to +
    changes = np.count_nonzero(np.diff(signs) != 0)
    return changes == 0 or (changes == 1 and signs[0] < 0)


def optimal_parameters(g: Graph, domain="extended", tol=1e-7) -> dict[str, float]:
    """Optimal eta, rho and eps on the classic or extended domains.

    On the classic domains a midpoint below one forces the trivial choice
    ``eta = rho = 0``; eps has the same optimum on both.
    """
    if domain not in ("extended", "classic"):
        raise SchemeError(f"domain must be 'extended' or 'classic', got {domain!r}")
    sigma = spectral_summary(g).varsigma_NL
    eps = optimal_eps(g)
    if domain == "classic" and sigma < 1:
        return {"eta": 0.0, "rho": 0.0, "eps": eps}
    opt = {"eta": optimal_eta(g), "rho": optimal_rho(g, tol), "eps": eps}
    # midpoint exactly one up to round-off (friendship graphs): report the exact zero
    return {k: 0.0 if abs(v) < 1e-12 else v for k, v in opt.items()}


# -- convergence ---------------------------------------------------------------------


def converges(s: IterativeScheme) -> bool:
    """True iff every non-unit eigenvalue of ``F`` lies strictly inside the unit disc."""
    try:
        r = s.cri()
    except SpectralError:
        return False
    return r < 1.0 - CONVERGENCE_MARGIN


def scheme_record(s: IterativeScheme, domain: ParameterDomain | None = None) -> dict:
    try:
        r = s.cri()
    except SpectralError:
        r = None
    rec = {"label": s.label, "parameters": {k: _jsonable(v) for k, v in s.params.items()}, "cri": r, "converges": converges(s)}
    if domain is not None:
        rec["domain"] = domain.as_dict()
    return rec


def dumps_scheme(s: IterativeScheme, domain: ParameterDomain | None = None) -> str:
    return json.dumps(scheme_record(s, domain), indent=2, default=_jsonable)


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    return v
