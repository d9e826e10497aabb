"""Spectral decompositions of Laplace-Beltrami type operators.

Builtin manifolds (circle, flat 2-torus, round sphere) carry their exact
analytic spectra sampled at quadrature nodes; custom manifolds are given as a
stiffness matrix S and a diagonal mass matrix M and solved densely as the
generalized problem S phi = lambda M phi.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg
import scipy.sparse
from scipy.integrate import quad

from .report import InequalityReport
from .torus import check_order

DENSE_LIMIT = 4096
ZERO_EIG = 1e-10


@dataclass(frozen=True)
class ManifoldSpec:
    """Which manifold to discretize.

    Use the ``circle``, ``torus``, ``sphere`` and ``custom`` constructors
    rather than filling the fields directly.
    """

    kind: str
    N: int = 0
    L: int = 0
    stiffness: object = None
    mass: object = None

    @classmethod
    def circle(cls, N: int) -> "ManifoldSpec":
        if N < 2 or N > DENSE_LIMIT:
            raise ValueError(f"circle node count must be in [2, {DENSE_LIMIT}]")
        return cls("circle", N=N)

    @classmethod
    def torus(cls, N: int) -> "ManifoldSpec":
        if N < 2 or N * N > DENSE_LIMIT:
            raise ValueError(f"torus needs N >= 2 and N^2 <= {DENSE_LIMIT}")
        return cls("torus", N=N)

    @classmethod
    def sphere(cls, L: int) -> "ManifoldSpec":
        if L < 0 or 2 * (L + 1) ** 2 > DENSE_LIMIT:
            raise ValueError("sphere band limit out of range")
        return cls("sphere", L=L)

    @classmethod
    def custom(cls, stiffness, mass=None) -> "ManifoldSpec":
        S = stiffness.toarray() if scipy.sparse.issparse(stiffness) else np.asarray(stiffness, float)
        n = S.shape[0]
        if S.ndim != 2 or S.shape != (n, n):
            raise ValueError("stiffness matrix must be square")
        if n > DENSE_LIMIT:
            raise ValueError(f"custom matrices limited to {DENSE_LIMIT} nodes")
        if not np.allclose(S, S.T, rtol=0, atol=1e-12 * max(1.0, np.abs(S).max())):
            raise ValueError("stiffness matrix must be symmetric")
        if mass is None:
            m = np.ones(n)
        else:
            M = mass.toarray() if scipy.sparse.issparse(mass) else np.asarray(mass, float)
            if M.ndim == 2:
                if M.shape != (n, n):
                    raise ValueError("mass matrix shape does not match stiffness")
                if np.any(M - np.diag(np.diag(M))):
                    raise ValueError("mass matrix must be diagonal")
                m = np.diag(M).copy()
            else:
                m = M.reshape(-1)
                if m.size != n:
                    raise ValueError("mass diagonal length does not match stiffness")
        if np.any(m <= 0) or not np.all(np.isfinite(m)):
            raise ValueError("mass matrix must be positive definite")
        return cls("custom", N=n, stiffness=S, mass=m)

    @property
    def dimension(self) -> int | None:
        return {"circle": 1, "torus": 2, "sphere": 2}.get(self.kind)


@dataclass(frozen=True, eq=False)
class SpectrumDecomposition:
    """Ascending eigenpairs, M-orthonormal, sampled at the nodes."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # (nodes, K)
    weights: np.ndarray  # mass diagonal / quadrature weights
    spec: ManifoldSpec
    tail_bound: Callable[[float, float], float] | None = field(default=None, repr=False)
    gradients: Callable[[int], np.ndarray] | None = field(default=None, repr=False)
    nodes: tuple = field(default=(), repr=False)

    def __post_init__(self):
        for name in ("eigenvalues", "eigenvectors", "weights"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def K(self) -> int:
        return self.eigenvalues.size

    @property
    def node_count(self) -> int:
        return self.weights.size

    @property
    def volume(self) -> float:
        return float(self.weights.sum())

    def check_field(self, f) -> np.ndarray:
        f = np.asarray(getattr(f, "values", f), dtype=float).reshape(-1)
        if f.size != self.node_count:
            raise ValueError(f"field has {f.size} values, decomposition has {self.node_count} nodes")
        return f

    def coefficients(self, f) -> np.ndarray:
        """<f, phi_k>_M for every resolved mode."""
        f = self.check_field(f)
        return self.eigenvectors.T @ (self.weights * f)

    def synthesize(self, coef) -> np.ndarray:
        return self.eigenvectors @ np.asarray(coef, dtype=float)

    def project(self, f) -> np.ndarray:
        return self.synthesize(self.coefficients(f))

    def multiplier(self, func) -> Callable:
        """Functional calculus: f -> sum_k func(lambda_k) <f, phi_k> phi_k."""
        values = func(self.eigenvalues)
        return lambda f: self.synthesize(values * self.coefficients(f))

    def inner(self, f, g) -> float:
        return float(np.sum(self.weights * self.check_field(f) * self.check_field(g)))

    def gram_error(self) -> float:
        Phi = self.eigenvectors
        G = Phi.T @ (self.weights[:, None] * Phi)
        return float(np.abs(G - np.eye(self.K)).max())


def _series_tail(term, start: int, chunk: int = 20000) -> float:
    """sum_{k >= start} term(k) for a decreasing term: explicit sum over one
    chunk plus an integral bound for the remainder."""
    k = np.arange(start, start + chunk, dtype=float)
    return float(np.sum(term(k)) + quad(term, start + chunk - 1, np.inf)[0])


def _fourier_pairs(N: int, K: int):
    """Real Fourier basis on N circle nodes, ordered 1, cos x, sin x, cos 2x, ..."""
    modes = [(0, "c")]
    for k in range(1, N // 2 + 1):
        modes.append((k, "c"))
        if 2 * k != N:
            modes.append((k, "s"))
    return modes[:K]


def _circle(spec: ManifoldSpec, K: int) -> SpectrumDecomposition:
    N = spec.N
    x = 2 * np.pi * np.arange(N) / N
    w = np.full(N, 2 * np.pi / N)
    modes = _fourier_pairs(N, K)
    cols = [np.cos(k * x) if kind == "c" else np.sin(k * x) for k, kind in modes]
    norms = [np.sqrt(np.sum(w * c**2)) for c in cols]
    Phi = np.column_stack([c / s for c, s in zip(cols, norms)])
    lam = [float(k * k) for k, _ in modes]

    def grad(j):
        k, kind = modes[j]
        g = -k * np.sin(k * x) if kind == "c" else k * np.cos(k * x)
        return (g / norms[j])[:, None]

    def tail(alpha, t):
        # each unresolved real mode contributes at most sup|phi|^2 = 1/pi
        kmax = modes[-1][0] if modes else 0
        missing_partner = 1.0 if modes and modes[-1][1] == "c" and modes[-1][0] > 0 else 0.0
        total = missing_partner * np.exp(-(kmax**alpha) * t) / np.pi
        total += _series_tail(lambda k: 2 * np.exp(-(k**alpha) * t) / np.pi, kmax + 1)
        return float(total)

    return SpectrumDecomposition(np.array(lam), Phi, w, spec, tail, grad, (x,))


def _torus(spec: ManifoldSpec, K: int) -> SpectrumDecomposition:
    N = spec.N
    ax = 2 * np.pi * np.arange(N) / N
    x1, x2 = (a.reshape(-1) for a in np.meshgrid(ax, ax, indexing="ij"))
    w = np.full(N * N, (2 * np.pi / N) ** 2)
    ks = np.arange(-(N // 2), N - N // 2)
    reps = []
    seen = set()
    for k1 in ks:
        for k2 in ks:
            key = (k1 % N, k2 % N)
            neg = ((-k1) % N, (-k2) % N)
            if key in seen:
                continue
            seen.add(key)
            seen.add(neg)
            self_conj = key == neg
            reps.append((k1 * k1 + k2 * k2, abs(k1) + abs(k2), k1, k2, self_conj))
    # canonical order: |k|^2, then a deterministic tie break
    reps.sort(key=lambda r: (r[0], -r[2], -r[3]))
    cols, lam, meta = [], [], []
    for k2sum, _, k1, k2, self_conj in reps:
        phase = k1 * x1 + k2 * x2
        cols.append(np.cos(phase)); lam.append(float(k2sum)); meta.append((k1, k2, "c"))
        if not self_conj:
            cols.append(np.sin(phase)); lam.append(float(k2sum)); meta.append((k1, k2, "s"))
        if len(cols) >= K:
            break
    cols, lam, meta = cols[:K], lam[:K], meta[:K]
    norms = [np.sqrt(np.sum(w * c**2)) for c in cols]
    Phi = np.column_stack([c / s for c, s in zip(cols, norms)])

    def grad(j):
        k1, k2, kind = meta[j]
        phase = k1 * x1 + k2 * x2
        d = -np.sin(phase) if kind == "c" else np.cos(phase)
        return np.column_stack([k1 * d, k2 * d]) / norms[j]

    def tail(alpha, t):
        # modes e^{ik.(x-y)}/(4 pi^2) with |k| beyond the resolved radius
        rmax = np.sqrt(lam[-1])
        cut = 400
        r = np.arange(-cut, cut + 1)
        R1, R2 = np.meshgrid(r, r, indexing="ij")
        kk = np.sqrt(R1**2 + R2**2)
        sel = (kk >= rmax) & (kk < cut)
        total = np.sum(np.exp(-(kk[sel] ** alpha) * t))
        total += quad(lambda q: 2 * np.pi * q * np.exp(-(q**alpha) * t), cut - 1, np.inf)[0]
        return float(total / (4 * np.pi**2))

    return SpectrumDecomposition(np.array(lam), Phi, w, spec, tail, grad, (x1, x2))


def sphere_nodes(L: int):
    """Gauss-Legendre in cos(colatitude) times 2L+2 uniform longitudes."""
    mu, wmu = np.polynomial.legendre.leggauss(L + 1)
    nlon = 2 * L + 2
    lon = 2 * np.pi * np.arange(nlon) / nlon
    MU, LON = np.meshgrid(mu, lon, indexing="ij")
    W = np.outer(wmu, np.full(nlon, 2 * np.pi / nlon))
    return MU.reshape(-1), LON.reshape(-1), W.reshape(-1)


def normalized_legendre(L: int, mu: np.ndarray) -> dict:
    """Orthonormal associated Legendre functions P~_l^m(mu), m >= 0, via the
    standard three-term recurrences; normalized so that
    int_{-1}^{1} P~_l^m(mu)^2 dmu = 1 (no Condon-Shortley phase)."""
    P = {}
    s = np.sqrt(np.maximum(0.0, 1 - mu**2))
    pmm = np.full_like(mu, np.sqrt(0.5))
    for m in range(L + 1):
        if m > 0:
            pmm = pmm * s * np.sqrt((2 * m + 1) / (2 * m))
        P[m, m] = pmm
        if m + 1 <= L:
            P[m + 1, m] = np.sqrt(2 * m + 3) * mu * pmm
        for l in range(m + 2, L + 1):
            a = np.sqrt((4 * l * l - 1) / (l * l - m * m))
            b = np.sqrt(((l - 1) ** 2 - m * m) / (4 * (l - 1) ** 2 - 1))
            P[l, m] = a * (mu * P[l - 1, m] - b * P[l - 2, m])
    return P


def _sphere(spec: ManifoldSpec, K: int) -> SpectrumDecomposition:
    L = spec.L
    mu, lon, w = sphere_nodes(L)
    P = normalized_legendre(L, mu)
    cols, lam = [], []
    for l in range(L + 1):
        cols.append(P[l, 0] / np.sqrt(2 * np.pi)); lam.append(l * (l + 1.0))
        for m in range(1, l + 1):
            cols.append(P[l, m] * np.cos(m * lon) / np.sqrt(np.pi)); lam.append(l * (l + 1.0))
            cols.append(P[l, m] * np.sin(m * lon) / np.sqrt(np.pi)); lam.append(l * (l + 1.0))
    if K > len(cols):
        raise ValueError(f"sphere with band limit {L} resolves only {len(cols)} modes")
    Phi = np.column_stack(cols[:K])
    lam = np.array(lam[:K])

    def tail(alpha, t):
        # addition theorem: sum_m Y_lm(x)Y_lm(y) <= (2l+1)/(4 pi)
        lmax = int(round((np.sqrt(1 + 4 * lam[-1]) - 1) / 2))
        done = np.sum(lam == lam[-1])
        total = (2 * lmax + 1 - done) / (4 * np.pi) * np.exp(-(lam[-1] ** (alpha / 2)) * t)
        total += _series_tail(
            lambda l: (2 * l + 1) / (4 * np.pi) * np.exp(-((l * (l + 1)) ** (alpha / 2)) * t),
            lmax + 1)
        return float(total)

    return SpectrumDecomposition(lam, Phi, w, spec, tail, None, (mu, lon))


def _custom(spec: ManifoldSpec, K: int) -> SpectrumDecomposition:
    S, m = spec.stiffness, spec.mass
    r = 1.0 / np.sqrt(m)
    A = r[:, None] * S * r[None, :]
    try:
        lam, Q = scipy.linalg.eigh(A, subset_by_index=[0, K - 1])
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise RuntimeError(f"eigensolver failed: {exc}") from exc
    if lam[0] < -ZERO_EIG * max(1.0, abs(lam).max()):
        raise ValueError("stiffness matrix is not positive semidefinite")
    Phi = r[:, None] * Q
    return SpectrumDecomposition(lam, Phi, m.copy(), spec)


def build_spectrum(spec: ManifoldSpec, K: int) -> SpectrumDecomposition:
    """First K eigenpairs of the manifold's (minus) Laplacian, ascending."""
    nodes = {"circle": spec.N, "torus": spec.N**2, "sphere": 2 * (spec.L + 1) ** 2,
             "custom": spec.N}[spec.kind]
    if not 1 <= K <= nodes:
        raise ValueError(f"mode count K={K} must be in [1, {nodes}]")
    builder = {"circle": _circle, "torus": _torus, "sphere": _sphere, "custom": _custom}[spec.kind]
    return builder(spec, K)


def apply_fractional_power(dec: SpectrumDecomposition, alpha: float, f) -> np.ndarray:
    """sum_k lambda_k^{alpha/2} <f, phi_k>_M phi_k; zero eigenvalues contribute 0."""
    alpha = check_order(alpha)
    lam = dec.eigenvalues
    power = np.where(lam > ZERO_EIG, np.abs(lam) ** (alpha / 2), 0.0)
    return dec.synthesize(power * dec.coefficients(f))


def bochner_square_check(dec: SpectrumDecomposition, k: int, tolerance: float = 1e-8,
                         alias_tol: float = 1e-9) -> InequalityReport:
    """Check (-Delta)(phi_k^2) <= 2 lambda_k phi_k^2 at every node.

    phi_k^2 is projected onto the resolved modes before (-Delta) is applied;
    if the projection loses more than ``alias_tol`` (sup norm) the report is
    flagged ``aliased`` rather than silently trusted.
    """
    if not 0 <= k < dec.K:
        raise ValueError(f"mode index {k} out of range [0, {dec.K})")
    phi = dec.eigenvectors[:, k]
    sq = phi**2
    proj = dec.project(sq)
    alias = float(np.abs(sq - proj).max())
    lhs = dec.synthesize(dec.eigenvalues * dec.coefficients(sq))
    rhs = 2 * dec.eigenvalues[k] * sq
    aliased = alias > alias_tol * max(1.0, np.abs(sq).max())
    return InequalityReport.from_slack(
        rhs - lhs, tolerance, check="bochner_square_check", mode=k,
        eigenvalue=float(dec.eigenvalues[k]), alias_error=alias, aliased=aliased)


def bochner_identity_residual(dec: SpectrumDecomposition, k: int) -> float:
    """sup |(-Delta)(phi^2) - 2 lambda phi^2 + 2 |grad phi|^2| for builtins
    that expose analytic gradients."""
    if dec.gradients is None:
        raise ValueError("decomposition has no analytic gradients")
    phi = dec.eigenvectors[:, k]
    sq = phi**2
    lhs = dec.synthesize(dec.eigenvalues * dec.coefficients(sq))
    g2 = np.sum(dec.gradients(k) ** 2, axis=1)
    return float(np.abs(lhs - 2 * dec.eigenvalues[k] * sq + 2 * g2).max())


@dataclass(frozen=True)
class SupnormRow:
    eigenvalue: float
    supnorm: float
    ratio: float | None  # None where lambda = 0


def supnorm_growth_report(dec: SpectrumDecomposition, n: int) -> list[SupnormRow]:
    """Rows (lambda_k, ||phi_k||_inf, ||phi_k||_inf / lambda_k^{n/2}) sorted by lambda."""
    rows = []
    for j in np.argsort(dec.eigenvalues, kind="stable"):
        lam = float(dec.eigenvalues[j])
        sup = float(np.abs(dec.eigenvectors[:, j]).max())
        ratio = sup / lam ** (n / 2) if lam > ZERO_EIG else None
        rows.append(SupnormRow(lam, sup, ratio))
    return rows


def supnorm_growth_check(rows: list[SupnormRow], factor: float = 10.0,
                         reference: int = 3) -> InequalityReport:
    """Boundedness verdict: the largest ratio may exceed the largest ratio among
    the first ``reference`` nonzero modes by at most ``factor``."""
    ratios = [r.ratio for r in rows if r.ratio is not None]
    if not ratios:
        return InequalityReport(-np.inf, None, 0.0, {"check": "supnorm_growth_report",
                                                      "note": "no nonzero eigenvalues"})
    bound = factor * max(ratios[:reference])
    worst = int(np.argmax(ratios))
    return InequalityReport(float(ratios[worst] - bound), worst, 0.0,
                            {"check": "supnorm_growth_report", "bound": bound})
