"""Pointwise convexity inequality Lambda^a(phi(f)) <= phi'(f) Lambda^a f as an
executable check, with a library of numerically certified convex functions.

Slack is always reported as phi'(f) Lambda f - Lambda phi(f), which must be
nonnegative.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import heat
from .manifold import SpectrumDecomposition, apply_fractional_power
from .report import InequalityReport
from .torus import ScalarField, TorusGrid, apply_fractional_laplacian, check_order, irfftn

MATRIX_TOL = 1e-10
SPECTRAL_TOL = 1e-8


@dataclass(frozen=True)
class ConvexFunction:
    """A C^1 convex function with its derivative and a sampled certificate.

    Construction fails unless second differences on ``cert_range`` are
    nonnegative (to 1e-12 relative to the function's size) and ``deriv``
    agrees with a centered difference of ``func`` to 1e-6.
    """

    name: str
    func: Callable = field(repr=False)
    deriv: Callable = field(repr=False)
    cert_range: tuple = (-4.0, 4.0)
    degree: int | None = None  # polynomial degree, None otherwise

    def __post_init__(self):
        lo, hi = self.cert_range
        if not hi > lo:
            raise ValueError("empty certificate range")
        x = np.linspace(lo, hi, 2001)
        y = self.func(x)
        d2 = y[2:] - 2 * y[1:-1] + y[:-2]
        scale = max(1.0, float(np.abs(y).max()))
        if d2.min() < -1e-12 * scale:
            raise ValueError(f"{self.name}: second differences negative on {self.cert_range}")
        # a short centered step tolerates C^1 functions with curvature jumps
        hstep = 1e-7
        xi = x[1:-1]
        fd = (self.func(xi + hstep) - self.func(xi - hstep)) / (2 * hstep)
        dv = self.deriv(xi)
        if np.any(np.abs(fd - dv) > 1e-6 * np.maximum(1.0, np.abs(dv))):
            raise ValueError(f"{self.name}: derivative does not match the function")

    def __call__(self, x):
        return self.func(x)

    def covers(self, values) -> bool:
        lo, hi = self.cert_range
        v = np.asarray(values)
        return bool(v.min() >= lo and v.max() <= hi)

    def lipschitz(self, lo: float, hi: float) -> float:
        x = np.linspace(lo, hi, 257)
        return float(np.abs(self.deriv(x)).max())


def power(p: int, cert_range=(-4.0, 4.0)) -> ConvexFunction:
    if p < 2 or p % 2:
        raise ValueError("power must be an even integer >= 2")
    return ConvexFunction(f"x^{p}", lambda x: x**p, lambda x: p * x ** (p - 1),
                          cert_range, degree=p)


def exponential(cert_range=(-4.0, 4.0)) -> ConvexFunction:
    return ConvexFunction("exp", np.exp, np.exp, cert_range)


def smooth_abs(eps: float = 1e-3, cert_range=(-4.0, 4.0)) -> ConvexFunction:
    return ConvexFunction("smooth_abs", lambda x: np.sqrt(x * x + eps * eps),
                          lambda x: x / np.sqrt(x * x + eps * eps), cert_range)


def smooth_hinge(eps: float = 0.1, cert_range=(-4.0, 4.0)) -> ConvexFunction:
    """max(0, x) with the kink replaced by a parabola on [0, eps]; C^1 only."""
    def func(x):
        x = np.asarray(x, dtype=float)
        return np.where(x <= 0, 0.0, np.where(x < eps, x * x / (2 * eps), x - eps / 2))

    def deriv(x):
        return np.clip(np.asarray(x, dtype=float) / eps, 0.0, 1.0)

    return ConvexFunction("smooth_hinge", func, deriv, cert_range)


def linear(a: float = 1.0, b: float = 0.0, cert_range=(-4.0, 4.0)) -> ConvexFunction:
    return ConvexFunction(f"linear({a:g},{b:g})", lambda x: a * x + b,
                          lambda x: np.full_like(np.asarray(x, dtype=float), a),
                          cert_range, degree=1)


def library() -> dict[str, ConvexFunction]:
    """The shipped convex functions, keyed by config name."""
    lib = {"x2": power(2), "x4": power(4), "exp": exponential(),
           "smooth_abs": smooth_abs(), "smooth_hinge": smooth_hinge()}
    for m in range(3, 9):
        lib[f"x{2 * m}"] = power(2 * m, cert_range=(-2.0, 2.0))
    return lib


# ------------------------------------------------------------------ operators


class TorusOperator:
    """Lambda^alpha on a periodic grid by its Fourier multiplier."""

    kind = "torus"

    def __init__(self, grid: TorusGrid, alpha: float, sign: float = 1.0):
        self.grid = grid
        self.alpha = check_order(alpha)
        self.sign = sign  # -1 gives a deliberately corrupted operator for negative controls

    def __call__(self, values) -> np.ndarray:
        return self.sign * apply_fractional_laplacian(self.grid.field(values), self.alpha).values

    def on_grid(self, grid: TorusGrid) -> "TorusOperator":
        return TorusOperator(grid, self.alpha, self.sign)

    def band(self, values) -> int:
        """Largest |k| (sup over axes) with a non-negligible coefficient."""
        coef = np.abs(np.fft.rfftn(np.asarray(values).reshape(self.grid.shape)))
        if coef.max() == 0:
            return 0
        ks = self.grid.wavenumbers()
        kinf = np.max(np.abs(np.stack(ks)), axis=0)
        return int(kinf[coef > 1e-12 * coef.max()].max())


class ManifoldOperator:
    """Lambda_g^alpha on a SpectrumDecomposition by functional calculus."""

    kind = "manifold"

    def __init__(self, dec: SpectrumDecomposition, alpha: float):
        self.dec = dec
        self.alpha = check_order(alpha)

    def __call__(self, values) -> np.ndarray:
        return apply_fractional_power(self.dec, self.alpha, values)


class MatrixOperator:
    """(L)^{alpha/2} for a symmetric generator L by dense eigendecomposition."""

    kind = "matrix"

    def __init__(self, generator, alpha: float):
        L = np.asarray(generator, dtype=float)
        if L.ndim != 2 or L.shape[0] != L.shape[1]:
            raise ValueError("generator must be a square matrix")
        if not np.allclose(L, L.T, atol=1e-12):
            raise ValueError("generator must be symmetric")
        self.alpha = check_order(alpha)
        lam, Q = np.linalg.eigh(L)
        lam = np.clip(lam, 0.0, None)
        self.matrix = (Q * lam ** (self.alpha / 2)) @ Q.T
        self.generator = L

    def __call__(self, values) -> np.ndarray:
        return self.matrix @ np.asarray(values, dtype=float).reshape(-1)

    @property
    def is_m_matrix(self) -> bool:
        L = self.generator
        off = L - np.diag(np.diag(L))
        return bool(off.max() <= 0 and np.abs(L.sum(axis=1)).max() < 1e-12 * max(1, np.abs(L).max()))


def path_laplacian(n: int, periodic: bool = False) -> np.ndarray:
    """Graph Laplacian of the path (or cycle) on n nodes."""
    L = 2 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1)
    L[0, 0] = L[-1, -1] = 1.0
    if periodic:
        L[0, 0] = L[-1, -1] = 2.0
        L[0, -1] = L[-1, 0] = -1.0
    return L


def slack_field(op, f, phi: ConvexFunction) -> np.ndarray:
    f = np.asarray(getattr(f, "values", f), dtype=float)
    shape = f.shape
    return (phi.deriv(f) * op(f).reshape(shape) - op(phi(f)).reshape(shape))


def interpolate(grid: TorusGrid, values, factor: int) -> tuple[TorusGrid, np.ndarray]:
    """Spectral (zero-padding) interpolation onto a grid ``factor`` times finer."""
    fine = TorusGrid(grid.n, factor * grid.N)
    coef = np.fft.rfftn(np.asarray(values).reshape(grid.shape))
    fine_coef = np.zeros(fine.shape[:-1] + (fine.N // 2 + 1,), dtype=complex)
    if grid.n == 1:
        fine_coef[: coef.shape[0]] = coef
    else:
        h = grid.N // 2
        fine_coef[:h, : coef.shape[1]] = coef[:h]
        fine_coef[-h:, : coef.shape[1]] = coef[-h:]
    return fine, irfftn(fine_coef * (fine.size / grid.size), fine.shape)


def _restrict(fine_values, factor: int, n: int) -> np.ndarray:
    return fine_values[::factor] if n == 1 else fine_values[::factor, ::factor]


def padded_slack(op: TorusOperator, f, phi: ConvexFunction, factor: int) -> np.ndarray:
    """Slack evaluated on a ``factor``-times finer grid and sampled back."""
    fine, ff = interpolate(op.grid, f, factor)
    return _restrict(slack_field(op.on_grid(fine), ff, phi), factor, op.grid.n)


def padding_factor(op: TorusOperator, f, phi: ConvexFunction) -> int:
    """Smallest power of two that lets the grid resolve deg(phi) x band(f)."""
    need = phi.degree * op.band(f)
    factor = 1
    while need >= factor * op.grid.N / 2:
        factor *= 2
    return factor


def verify_pointwise_inequality(op, f, phi: ConvexFunction, tolerance: float | None = None,
                                dealias: bool = True, **metadata) -> InequalityReport:
    """Check Lambda(phi(f)) <= phi'(f) Lambda f at every node.

    Without an explicit ``tolerance`` the model is: 1e-10 for a matrix
    generator; 1e-8 on spectral paths when phi is a polynomial whose
    composition with f is resolved (on the torus, with ``dealias``, the
    composition is formed on a zero-padded grid so this always holds);
    otherwise 1e-8 plus a measured aliasing error, and the report's
    ``degraded`` flag is set.
    """
    vals = np.asarray(getattr(f, "values", f), dtype=float)
    if not phi.covers(vals):
        raise ValueError(f"field range [{vals.min():.3g}, {vals.max():.3g}] exceeds "
                         f"certificate range {phi.cert_range} of {phi.name}")
    degraded = False
    alias = 0.0
    factor = 1
    if op.kind == "torus" and phi.degree is not None and dealias:
        factor = padding_factor(op, vals, phi)
    slack = padded_slack(op, vals, phi, factor) if factor > 1 else slack_field(op, vals, phi)
    if tolerance is None:
        if op.kind == "matrix":
            tolerance = MATRIX_TOL
        elif op.kind == "torus":
            tolerance = SPECTRAL_TOL
            if phi.degree is None or padding_factor(op, vals, phi) > factor:
                alias = float(np.abs(padded_slack(op, vals, phi, 2 * factor) - slack).max())
                tolerance += alias
                degraded = True
        else:
            tolerance = SPECTRAL_TOL
            target = phi(vals)
            alias = float(np.abs(target - op.dec.project(target)).max())
            if alias > 1e-10 * max(1.0, np.abs(target).max()):
                lam_top = float(op.dec.eigenvalues.max())
                tolerance += alias * lam_top ** (op.alpha / 2)
                degraded = True
    meta = {"check": "verify_pointwise_inequality", "operator": op.kind, "alpha": op.alpha,
            "phi": phi.name, "degraded": degraded, "alias_error": alias,
            "padding": factor, "min_slack": float(slack.min())}
    meta.update(metadata)
    return InequalityReport.from_slack(slack, tolerance, **meta)


# ------------------------------------------------------- heat-flow mechanism


def jensen_gap(dec: SpectrumDecomposition, alpha: float, f, phi: ConvexFunction, t: float,
               certificate: InequalityReport | None = None) -> np.ndarray:
    """v - phi(u) with u = e^{-t Lambda} f and v = e^{-t Lambda} phi(f).

    Requires a positivity certificate for the kernel at (alpha, t); one is
    computed over every source node when not supplied, and a failing or
    mismatched certificate raises.
    """
    if t < 0:
        raise ValueError("time must be nonnegative")
    f = dec.check_field(f)
    if t > 0:
        if certificate is None:
            certificate = kernel_certificate(dec, alpha, t)
        meta = certificate.metadata
        if meta.get("alpha") != alpha or meta.get("t") != t:
            raise ValueError("positivity certificate was issued for a different (alpha, t)")
        if not certificate.passed:
            raise ValueError(f"kernel positivity not certified at alpha={alpha}, t={t}")
    u = heat.evolve(dec, alpha, f, t)
    v = heat.evolve(dec, alpha, phi(f), t)
    return v - phi(u)


def kernel_certificate(dec: SpectrumDecomposition, alpha: float, t: float) -> InequalityReport:
    """Positivity and unit mass of G_alpha(x, ., t) for every source x."""
    G = heat.kernel_matrix(dec, alpha, t)
    tol = heat.positivity_tolerance(dec, alpha, t)
    masses = G @ dec.weights
    idx = np.unravel_index(int(np.argmin(G)), G.shape)
    gmin = float(G[idx])
    mass_err = float(np.abs(masses - 1).max())
    viol = -gmin if mass_err <= 1e-10 else np.inf
    return InequalityReport(viol, tuple(int(i) for i in idx), tol, {
        "check": "kernel_positivity_mass_check", "alpha": alpha, "t": t,
        "min": gmin, "mass_error": mass_err})


def jensen_gap_floor(dec: SpectrumDecomposition, alpha: float, f, phi: ConvexFunction,
                     t: float) -> float:
    """Lower bound the gap may reach: positivity tolerance x Lipschitz budget of phi
    on the range of f (times the volume, the kernel's integration domain)."""
    f = dec.check_field(f)
    tol = heat.positivity_tolerance(dec, alpha, t) if t > 0 else 0.0
    lip = phi.lipschitz(f.min(), f.max())
    spread = float(f.max() - f.min())
    return -tol * lip * spread * dec.volume - 1e-12


@dataclass(frozen=True)
class DerivativeReport:
    report: InequalityReport
    limit: np.ndarray = field(repr=False)
    ratio: float | None
    converged: bool


def derivative_at_zero_check(dec: SpectrumDecomposition, alpha: float, f,
                             phi: ConvexFunction, h: float = 1e-3,
                             tolerance: float = 1e-6) -> DerivativeReport:
    """Forward difference of the Jensen gap at t = 0 against the direct slack.

    The difference quotient at h must be >= -tolerance, and the errors at h
    and h/2 must shrink by a factor in [1.8, 2.2] (first-order convergence),
    unless both are already at round-off level.
    """
    if not 1e-6 <= h <= 1e-2:
        raise ValueError("h must lie in [1e-6, 1e-2]")
    f = dec.check_field(f)
    op = ManifoldOperator(dec, alpha)
    limit = phi.deriv(f) * op(f) - op(phi(f))

    def quotient(step):
        u = heat.evolve(dec, alpha, f, step)
        v = heat.evolve(dec, alpha, phi(f), step)
        # gap(0) vanishes on resolved data; subtract its discrete value anyway
        g0 = dec.project(phi(f)) - phi(dec.project(f))
        return (v - phi(u) - g0) / step

    q1, q2 = quotient(h), quotient(h / 2)
    e1 = float(np.abs(q1 - limit).max())
    e2 = float(np.abs(q2 - limit).max())
    noise = 1e-9 * max(1.0, float(np.abs(limit).max()))
    if e1 <= noise and e2 <= noise:
        ratio, converged = None, True
    else:
        ratio = e1 / e2 if e2 > 0 else np.inf
        converged = 1.8 <= ratio <= 2.2
    rep = InequalityReport.from_slack(q1, tolerance, check="derivative_at_zero_check",
                                      alpha=alpha, phi=phi.name, h=h, ratio=ratio,
                                      converged=converged, limit_min=float(limit.min()))
    return DerivativeReport(rep, limit, ratio, converged)


def random_band_limited(grid_or_n, band: int, rng: np.random.Generator,
                        amplitude: float = 1.0, mean_zero: bool = True) -> np.ndarray:
    """Seeded trig polynomial with |k|^{-2} coefficient decay, |k| <= band.

    ``grid_or_n`` is a TorusGrid or a circle node count. Scaled so the sup norm
    equals ``amplitude``.
    """
    grid = grid_or_n if isinstance(grid_or_n, TorusGrid) else TorusGrid(1, int(grid_or_n))
    if band >= grid.N // 2:
        raise ValueError("band must stay below the Nyquist mode")
    ks = grid.wavenumbers()
    kinf = np.max(np.abs(np.stack(ks)), axis=0)
    kabs = grid.kabs()
    shape = kabs.shape
    coef = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    with np.errstate(divide="ignore"):
        decay = np.where(kabs > 0, kabs ** -2.0, 0.0 if mean_zero else 1.0)
    coef = coef * decay * (kinf <= band)
    vals = irfftn(coef, grid.shape)
    peak = np.abs(vals).max()
    return vals * (amplitude / peak) if peak > 0 else vals
