"""Dirichlet-Neumann operators on planar domains.

The disk and the periodic half-plane are treated spectrally (harmonic
extension is explicit mode by mode, so D is the multiplier |k|). The
rectangle uses a direct 5-point Laplace solve and a second-order one-sided
normal difference; its corners are outside the smooth-boundary setting and
are excluded from every verdict.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .report import InequalityReport

SPECTRAL_TOL = 1e-8


@dataclass(frozen=True)
class PlanarDomain:
    """Disk, periodic half-plane, or rectangle; see the classmethods."""

    kind: str
    n_boundary: int
    Nx: int = 0
    Ny: int = 0
    h: float = 0.0
    radial_levels: int = 32
    depth: float = 2.0

    @classmethod
    def disk(cls, n_boundary: int, radial_levels: int = 32) -> "PlanarDomain":
        """Unit disk sampled at ``n_boundary`` equispaced boundary angles."""
        if n_boundary < 8 or n_boundary % 2:
            raise ValueError("disk needs an even boundary node count >= 8")
        return cls("disk", n_boundary, radial_levels=radial_levels)

    @classmethod
    def halfplane(cls, n_boundary: int, radial_levels: int = 32,
                  depth: float = 2.0) -> "PlanarDomain":
        """{y > 0} with 2 pi periodic boundary line; interior sampled to ``depth``."""
        if n_boundary < 8 or n_boundary % 2:
            raise ValueError("half-plane needs an even boundary node count >= 8")
        return cls("halfplane", n_boundary, radial_levels=radial_levels, depth=depth)

    @classmethod
    def rectangle(cls, Nx: int, Ny: int | None = None, h: float | None = None) -> "PlanarDomain":
        """[0, (Nx-1)h] x [0, (Ny-1)h]; Nx, Ny count grid points including the
        boundary. The default h makes the x side unit length."""
        Ny = Nx if Ny is None else Ny
        if Nx < 5 or Ny < 5:
            raise ValueError("rectangle needs at least 5 points per side")
        if Nx * Ny > 513 * 513:
            raise ValueError("rectangle grids are limited to 513^2 points")
        h = 1.0 / (Nx - 1) if h is None else float(h)
        return cls("rectangle", 2 * (Nx - 1) + 2 * (Ny - 1), Nx=Nx, Ny=Ny, h=h)

    # -------------------------------------------------------------- geometry

    def boundary_points(self) -> np.ndarray:
        if self.kind == "disk":
            th = self.angles()
            return np.column_stack([np.cos(th), np.sin(th)])
        if self.kind == "halfplane":
            return np.column_stack([self.angles(), np.zeros(self.n_boundary)])
        idx = self.boundary_indices()
        return idx * self.h

    def angles(self) -> np.ndarray:
        return 2 * np.pi * np.arange(self.n_boundary) / self.n_boundary

    def boundary_indices(self) -> np.ndarray:
        """Rectangle boundary nodes as (i, j), counterclockwise from (0, 0)."""
        Nx, Ny = self.Nx, self.Ny
        bottom = [(i, 0) for i in range(Nx - 1)]
        right = [(Nx - 1, j) for j in range(Ny - 1)]
        top = [(i, Ny - 1) for i in range(Nx - 1, 0, -1)]
        left = [(0, j) for j in range(Ny - 1, 0, -1)]
        return np.array(bottom + right + top + left)

    def corner_positions(self) -> list[int]:
        if self.kind != "rectangle":
            return []
        a, b = self.Nx - 1, self.Ny - 1
        return [0, a, a + b, 2 * a + b]

    def verdict_mask(self) -> np.ndarray:
        """False at rectangle corners and at their two boundary neighbours."""
        mask = np.ones(self.n_boundary, dtype=bool)
        for c in self.corner_positions():
            for d in (-1, 0, 1):
                mask[(c + d) % self.n_boundary] = False
        return mask

    def normals(self) -> np.ndarray:
        """Outward unit normals; NaN rows at rectangle corners."""
        if self.kind == "disk":
            return self.boundary_points()
        if self.kind == "halfplane":
            return np.tile([0.0, -1.0], (self.n_boundary, 1))
        Nx, Ny = self.Nx, self.Ny
        out = []
        for i, j in self.boundary_indices():
            if (i in (0, Nx - 1)) and (j in (0, Ny - 1)):
                out.append((np.nan, np.nan))
            elif j == 0:
                out.append((0.0, -1.0))
            elif i == Nx - 1:
                out.append((1.0, 0.0))
            elif j == Ny - 1:
                out.append((0.0, 1.0))
            else:
                out.append((-1.0, 0.0))
        return np.array(out)

    def boundary_field(self, values) -> "BoundaryField":
        return BoundaryField(self, values)

    def sample(self, func) -> "BoundaryField":
        """Boundary trace of a function of the planar coordinates (x, y)."""
        pts = self.boundary_points()
        return BoundaryField(self, func(pts[:, 0], pts[:, 1]))

    def refined(self) -> "PlanarDomain":
        """Rectangle with h halved (2N - 1 points per side)."""
        if self.kind != "rectangle":
            raise ValueError("only rectangles refine")
        return PlanarDomain.rectangle(2 * self.Nx - 1, 2 * self.Ny - 1, self.h / 2)


@dataclass(frozen=True, eq=False)
class BoundaryField:
    domain: PlanarDomain
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float).reshape(-1).copy()
        if vals.size != self.domain.n_boundary:
            raise ValueError(f"boundary data has {vals.size} values, domain has "
                             f"{self.domain.n_boundary} boundary nodes")
        if not np.all(np.isfinite(vals)):
            raise ValueError("boundary data contains non-finite values")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)


@dataclass(frozen=True, eq=False)
class HarmonicExtension:
    """Interior samples of the harmonic extension.

    For the disk, ``values[i, j]`` sits at radius ``coords[0][i]`` and angle
    ``coords[1][j]``; the last radial row is the boundary. For the half-plane
    rows are heights y (the first row y = 0). For the rectangle ``values`` is
    the full (Nx, Ny) grid including the boundary.
    """

    domain: PlanarDomain
    values: np.ndarray
    coords: tuple
    residual: float
    coefficients: np.ndarray | None = field(default=None, repr=False)

    def interior(self) -> np.ndarray:
        if self.domain.kind == "rectangle":
            return self.values[1:-1, 1:-1]
        if self.domain.kind == "disk":
            return self.values[:-1]
        return self.values[1:]


def _check(domain: PlanarDomain, f) -> np.ndarray:
    if isinstance(f, BoundaryField):
        if f.domain != domain:
            raise ValueError("boundary data belongs to a different domain")
        return f.values
    return BoundaryField(domain, f).values


def _wavenumbers(n: int) -> np.ndarray:
    return np.fft.rfftfreq(n, 1.0 / n)


@lru_cache(maxsize=8)
def _rectangle_solver(Nx: int, Ny: int):
    nx, ny = Nx - 2, Ny - 2
    T = lambda n: sp.diags([np.ones(n - 1), -2 * np.ones(n), np.ones(n - 1)], [-1, 0, 1])
    A = sp.kronsum(T(ny), T(nx), format="csc")  # x index slow, y index fast
    return A, spla.splu(A)


def harmonic_extend(domain: PlanarDomain, f) -> HarmonicExtension:
    """Solve Delta u = 0 with u = f on the boundary."""
    vals = _check(domain, f)
    if domain.kind in ("disk", "halfplane"):
        n = domain.n_boundary
        coef = np.fft.rfft(vals)
        k = _wavenumbers(n)
        if domain.kind == "disk":
            levels = np.linspace(0.0, 1.0, domain.radial_levels + 1)
            decay = levels[:, None] ** k[None, :]
            decay[0, 0] = 1.0  # 0^0
        else:
            levels = np.linspace(0.0, domain.depth, domain.radial_levels + 1)
            decay = np.exp(-np.outer(levels, k))
        u = np.fft.irfft(coef[None, :] * decay, n=n, axis=1)
        res = _spectral_laplacian_residual(domain, coef)
        return HarmonicExtension(domain, u, (levels, domain.angles()), res, coef)
    Nx, Ny = domain.Nx, domain.Ny
    U = np.zeros((Nx, Ny))
    idx = domain.boundary_indices()
    U[idx[:, 0], idx[:, 1]] = vals
    A, lu = _rectangle_solver(Nx, Ny)
    rhs = np.zeros((Nx - 2, Ny - 2))
    rhs[0, :] -= U[0, 1:-1]
    rhs[-1, :] -= U[-1, 1:-1]
    rhs[:, 0] -= U[1:-1, 0]
    rhs[:, -1] -= U[1:-1, -1]
    sol = lu.solve(rhs.reshape(-1))
    U[1:-1, 1:-1] = sol.reshape(Nx - 2, Ny - 2)
    lap = five_point_laplacian(U, 1.0)
    res = float(np.abs(lap).max()) if lap.size else 0.0
    x = domain.h * np.arange(Nx)
    y = domain.h * np.arange(Ny)
    return HarmonicExtension(domain, U, (x, y), res)


def _spectral_laplacian_residual(domain: PlanarDomain, coef) -> float:
    """Size of Delta applied to the spectral extension, mode by mode.

    Each mode r^k e^{ik theta} (or e^{-ky} e^{ikx}) is harmonic identically,
    so this checks only that no mode is left with a non-harmonic profile."""
    k = _wavenumbers(domain.n_boundary)
    if domain.kind == "disk":
        # (r^k)'' + (r^k)'/r - k^2 r^{k-2} = (k(k-1) + k - k^2) r^{k-2}
        resid = (k * (k - 1) + k - k * k) * np.abs(coef)
    else:
        resid = (k * k - k * k) * np.abs(coef)
    return float(np.abs(resid).max())


def five_point_laplacian(U: np.ndarray, h: float) -> np.ndarray:
    return (U[2:, 1:-1] + U[:-2, 1:-1] + U[1:-1, 2:] + U[1:-1, :-2] - 4 * U[1:-1, 1:-1]) / h**2


def rectangle_normal_derivative(domain: PlanarDomain, U: np.ndarray) -> np.ndarray:
    """Outward (3 u_0 - 4 u_1 + u_2)/(2h) along the boundary; NaN at corners."""
    h = domain.h
    out = np.full(domain.n_boundary, np.nan)
    normals = domain.normals()
    for b, (i, j) in enumerate(domain.boundary_indices()):
        nx, ny = normals[b]
        if np.isnan(nx):
            continue
        di, dj = -int(nx), -int(ny)  # inward step
        out[b] = (3 * U[i, j] - 4 * U[i + di, j + dj] + U[i + 2 * di, j + 2 * dj]) / (2 * h)
    return out


def dn_apply(domain: PlanarDomain, f) -> BoundaryField | np.ndarray:
    """Normal derivative of the harmonic extension of f.

    Disk and half-plane: exact multiplier |k|. Rectangle: one-sided second
    order difference, returned as an array with NaN at the four corners
    (corner values are not defined on a non-C^2 boundary).
    """
    vals = _check(domain, f)
    if domain.kind in ("disk", "halfplane"):
        n = domain.n_boundary
        out = np.fft.irfft(np.fft.rfft(vals) * _wavenumbers(n), n=n)
        return BoundaryField(domain, out)
    ext = harmonic_extend(domain, vals)
    return rectangle_normal_derivative(domain, ext.values)


def _dn_values(domain, vals) -> np.ndarray:
    out = dn_apply(domain, vals)
    return out.values if isinstance(out, BoundaryField) else out


def band(vals) -> int:
    coef = np.abs(np.fft.rfft(vals))
    if coef.max() == 0:
        return 0
    return int(np.nonzero(coef > 1e-12 * coef.max())[0].max())


def power_slack(domain: PlanarDomain, f, m: int) -> np.ndarray:
    """f^{2m-1} D f - D(f^{2m}) / (2m); NaN where D is undefined."""
    vals = _check(domain, f)
    return vals ** (2 * m - 1) * _dn_values(domain, vals) - _dn_values(domain, vals ** (2 * m)) / (2 * m)


def _padded_power_slack(domain: PlanarDomain, vals, m: int, factor: int) -> np.ndarray:
    n = domain.n_boundary
    coef = np.fft.rfft(vals)
    fine_coef = np.zeros(factor * n // 2 + 1, dtype=complex)
    fine_coef[: coef.size] = coef
    fine_vals = np.fft.irfft(fine_coef * factor, n=factor * n)
    fine = PlanarDomain(domain.kind, factor * n, radial_levels=domain.radial_levels,
                        depth=domain.depth)
    return power_slack(fine, fine_vals, m)[::factor]


def verify_power_inequality(domain: PlanarDomain, f, m: int,
                            tolerance: float | None = None) -> InequalityReport:
    """Check (1/2m) D(f^{2m}) <= f^{2m-1} D f at every boundary node.

    Disk and half-plane: tolerance 1e-8 when 2m x band(f) stays below the
    boundary Nyquist mode, otherwise 1e-8 plus the change observed on a
    doubled boundary grid (flagged ``degraded``). Rectangle: 10 h, with
    corners and their neighbours excluded from the verdict.
    """
    if m < 1 or int(m) != m:
        raise ValueError("m must be a positive integer")
    vals = _check(domain, f)
    slack = power_slack(domain, vals, m)
    degraded = False
    mask = domain.verdict_mask()
    if domain.kind == "rectangle":
        tol = 10 * domain.h if tolerance is None else tolerance
    else:
        tol = SPECTRAL_TOL if tolerance is None else tolerance
        if 2 * m * band(vals) >= domain.n_boundary / 2:
            alias = float(np.abs(_padded_power_slack(domain, vals, m, 2) - slack).max())
            if tolerance is None:
                tol += alias
            degraded = True
    return InequalityReport.from_slack(
        np.where(mask, slack, np.inf), tol, mask=mask, check="verify_power_inequality",
        domain=domain.kind, m=m, degraded=degraded,
        excluded=[int(i) for i in np.nonzero(~mask)[0]])


@dataclass(frozen=True)
class HopfReport:
    max_w: float
    min_normal_derivative: float
    min_laplacian: float
    tolerances: tuple
    excluded: tuple = ()

    @property
    def passed(self) -> bool:
        t_lap, t_max, t_nd = self.tolerances
        return (self.min_laplacian >= -t_lap and self.max_w <= t_max
                and self.min_normal_derivative >= -t_nd)

    def as_report(self) -> InequalityReport:
        t_lap, t_max, t_nd = self.tolerances
        # worst of the three defects, each measured against its own tolerance
        defects = [(-self.min_laplacian - t_lap, "laplacian"), (self.max_w - t_max, "max_w"),
                   (-self.min_normal_derivative - t_nd, "normal_derivative")]
        worst, where = max(defects)
        return InequalityReport(worst, where, 0.0, {
            "check": "hopf_mechanism_diagnostic", "max_w": self.max_w,
            "min_normal_derivative": self.min_normal_derivative,
            "min_laplacian": self.min_laplacian, "excluded": list(self.excluded)})


def _spectral_fields(domain: PlanarDomain, vals, levels):
    """u, grad-squared and Laplacian of the spectral extension on a level grid."""
    n = domain.n_boundary
    coef = np.fft.rfft(vals)
    k = _wavenumbers(n)
    irfft = lambda c: np.fft.irfft(c, n=n, axis=1)
    if domain.kind == "disk":
        r = levels[:, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            prof = np.where((k == 0) & (r == 0), 1.0, r**k)
            d1 = np.where(k == 0, 0.0, k * r ** (k - 1))
            d2 = np.where(k <= 1, 0.0, k * (k - 1) * r ** (k - 2))
        u = irfft(coef * prof)
        ur = irfft(coef * d1)
        urr = irfft(coef * d2)
        ut = irfft(1j * k * coef * prof)
        utt = irfft(-(k**2) * coef * prof)
        safe = np.where(r > 0, r, np.inf)
        grad2 = ur**2 + (ut / safe) ** 2
        lap = urr + ur / safe + utt / safe**2
        return u, grad2, lap
    y = levels[:, None]
    prof = np.exp(-k * y)
    u = irfft(coef * prof)
    uy = irfft(-k * coef * prof)
    uyy = irfft(k**2 * coef * prof)
    ux = irfft(1j * k * coef * prof)
    uxx = irfft(-(k**2) * coef * prof)
    return u, ux**2 + uy**2, uxx + uyy


def hopf_mechanism_diagnostic(domain: PlanarDomain, f, m: int,
                              tolerances: tuple | None = None) -> HopfReport:
    """The three ingredients behind the power inequality for w = u^{2m} - v.

    (i) min over interior nodes of Delta w (should be >= 0),
    (ii) max over interior nodes of w (should be <= 0),
    (iii) min over boundary nodes of the outward derivative of w (should be >= 0).

    Rectangle: 5-point Delta_h and the one-sided normal stencil, corners
    excluded, default tolerances (0, 10 h^2, 10 h). Disk and half-plane: exact
    spectral derivatives, tolerances 1e-8.
    """
    if m < 1 or int(m) != m:
        raise ValueError("m must be a positive integer")
    vals = _check(domain, f)
    mask = domain.verdict_mask()
    if domain.kind == "rectangle":
        h = domain.h
        U = harmonic_extend(domain, vals).values
        V = harmonic_extend(domain, vals ** (2 * m)).values
        W = U ** (2 * m) - V
        lap = five_point_laplacian(W, h)
        dn_w = rectangle_normal_derivative(domain, W)
        scale = max(1.0, float(np.abs(vals).max()) ** (2 * m))
        tol = tolerances or (1e-10 * scale / h**2, 10 * h**2, 10 * h)
        return HopfReport(float(W[1:-1, 1:-1].max()), float(np.nanmin(dn_w[mask])),
                          float(lap.min()), tol, tuple(int(i) for i in np.nonzero(~mask)[0]))
    levels = harmonic_extend(domain, vals).coords[0]
    u, grad2, lap_u = _spectral_fields(domain, vals, levels)
    v, _, lap_v = _spectral_fields(domain, vals ** (2 * m), levels)
    w = u ** (2 * m) - v
    lap_w = 2 * m * (2 * m - 1) * u ** (2 * m - 2) * grad2 + 2 * m * u ** (2 * m - 1) * lap_u - lap_v
    if domain.kind == "disk":
        interior = slice(1, -1)  # r = 0 row has no polar Laplacian; boundary is the last row
        w_int = w[:-1]
    else:
        interior = slice(1, None)
        w_int = w[1:]
    dn_w = 2 * m * power_slack(domain, vals, m)
    tol = tolerances or (SPECTRAL_TOL, SPECTRAL_TOL, SPECTRAL_TOL)
    return HopfReport(float(w_int.max()), float(dn_w.min()), float(lap_w[interior].min()), tol)


def rectangle_refinement_study(func, m: int, N: int = 129) -> dict:
    """Max power-inequality violation (corners excluded) on N^2 and (2N-1)^2
    grids for the boundary trace of ``func(x, y)`` on the unit square."""
    coarse = PlanarDomain.rectangle(N)
    fine = coarse.refined()
    out = {}
    for label, dom in (("coarse", coarse), ("fine", fine)):
        rep = verify_power_inequality(dom, dom.sample(func), m)
        out[label] = rep.max_violation
        out[f"{label}_h"] = dom.h
    out["ratio"] = abs(out["coarse"]) / abs(out["fine"]) if out["fine"] else np.inf
    return out
