"""Pseudo-spectral transport with fractional dissipation on T^1 and T^2.

    theta_t + u . grad theta = -kappa Lambda^alpha theta

Velocity is zero, a prescribed divergence-free field from a streamfunction,
or the SQG law u = (-R_2 theta, R_1 theta). Time stepping is Lawson
(integrating-factor) RK4 by default, with IMEX Euler as an alternative.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .report import InequalityReport
from .torus import (ScalarField, TorusGrid, apply_fractional_laplacian, check_order,
                    fractional_symbol, irfftn, riesz_transform)

VELOCITY_MODES = ("none", "prescribed", "sqg")
SCHEMES = ("ifrk4", "imex")


class CFLViolation(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class TransportConfig:
    grid: TorusGrid
    kappa: float
    alpha: float
    dt: float
    T: float
    velocity: str = "none"
    scheme: str = "ifrk4"
    dealias: bool = True
    streamfunction: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        check_order(self.alpha)
        if self.kappa < 0 or not math.isfinite(self.kappa):
            raise ValueError("kappa must be finite and >= 0")
        if not self.dt > 0 or not self.T > 0:
            raise ValueError("dt and T must be positive")
        if self.velocity not in VELOCITY_MODES:
            raise ValueError(f"velocity must be one of {VELOCITY_MODES}")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        if self.velocity != "none" and self.grid.n != 2:
            raise ValueError("advection needs a 2D grid")
        if self.velocity == "prescribed":
            psi = self.streamfunction
            if psi is None:
                x, y = self.grid.coords()
                psi = np.sin(x) * np.sin(y)  # cellular flow
            psi = np.asarray(psi, dtype=float)
            if psi.shape != self.grid.shape:
                raise ValueError("streamfunction shape does not match grid")
            object.__setattr__(self, "streamfunction", psi)

    @property
    def steps(self) -> int:
        n = round(self.T / self.dt)
        if abs(n * self.dt - self.T) > 1e-9 * self.T:
            raise ValueError("T must be an integer multiple of dt")
        return int(n)

    @property
    def snapshot_every(self) -> int:
        return max(1, math.floor(self.T / (100 * self.dt)))


def _spectral_derivative(values: np.ndarray, grid: TorusGrid, axis: int) -> np.ndarray:
    k = grid.wavenumbers()[axis]
    return irfftn(1j * k * np.fft.rfftn(values), grid.shape)


def sqg_velocity(theta: ScalarField) -> tuple[ScalarField, ScalarField]:
    """u = (-R_2 theta, R_1 theta); both components are mean-zero."""
    if theta.grid.n != 2:
        raise ValueError("SQG velocity is defined on 2D grids only")
    u1 = riesz_transform(theta, 2)
    return u1.with_values(-u1.values), riesz_transform(theta, 1)


def prescribed_velocity(grid: TorusGrid, psi: np.ndarray) -> tuple[ScalarField, ScalarField]:
    """u = (d_2 psi, -d_1 psi)."""
    return (grid.field(_spectral_derivative(psi, grid, 1)),
            grid.field(-_spectral_derivative(psi, grid, 0)))


def spectral_divergence(u1: ScalarField, u2: ScalarField) -> float:
    grid = u1.grid
    k1, k2 = grid.wavenumbers()
    div = 1j * k1 * np.fft.rfftn(u1.values) + 1j * k2 * np.fft.rfftn(u2.values)
    return float(np.abs(irfftn(div, grid.shape)).max())


def dealias_mask(grid: TorusGrid) -> np.ndarray:
    """2/3 rule: keep modes with |k_j| < N/3 on every axis."""
    cut = grid.N / 3
    keep = np.ones(grid.kabs().shape, dtype=bool)
    for k in grid.wavenumbers():
        keep &= np.abs(k) < cut
    return keep


class _Rhs:
    """-u . grad theta evaluated pseudo-spectrally, returned in rfft layout."""

    def __init__(self, cfg: TransportConfig):
        self.cfg = cfg
        grid = cfg.grid
        self.mask = dealias_mask(grid) if cfg.dealias else np.ones(grid.kabs().shape, bool)
        self.ks = grid.wavenumbers()
        self.max_speed = 0.0
        if cfg.velocity == "prescribed":
            u1, u2 = prescribed_velocity(grid, cfg.streamfunction)
            self.fixed = (u1.values, u2.values)
            self.max_speed = float(np.sqrt(u1.values**2 + u2.values**2).max())

    def velocity(self, hat):
        cfg = self.cfg
        shape = cfg.grid.shape
        if cfg.velocity == "prescribed":
            return self.fixed
        k1, k2 = self.ks
        kabs = cfg.grid.kabs()
        inv = np.where(kabs > 0, 1.0 / np.where(kabs > 0, kabs, 1.0), 0.0)
        # -R_2 theta has symbol i k_2/|k|, R_1 theta has -i k_1/|k|
        u1 = irfftn(1j * k2 * inv * hat, shape)
        u2 = irfftn(-1j * k1 * inv * hat, shape)
        return u1, u2

    def __call__(self, hat: np.ndarray) -> np.ndarray:
        cfg = self.cfg
        if cfg.velocity == "none":
            return np.zeros_like(hat)
        shape = cfg.grid.shape
        hat = hat * self.mask
        u1, u2 = self.velocity(hat)
        speed = float(np.sqrt(u1**2 + u2**2).max())
        self.max_speed = max(self.max_speed, speed) if cfg.velocity == "prescribed" else speed
        tx = irfftn(1j * self.ks[0] * hat, shape)
        ty = irfftn(1j * self.ks[1] * hat, shape)
        return -np.fft.rfftn(u1 * tx + u2 * ty) * self.mask


def _check_cfl(rhs: _Rhs, cfg: TransportConfig):
    if rhs.max_speed > 0 and cfg.dt > cfg.grid.h / (2 * rhs.max_speed):
        raise CFLViolation(f"dt={cfg.dt} exceeds CFL bound h/(2 max|u|) with "
                           f"max|u|={rhs.max_speed:.6g}")


def _advance(hat: np.ndarray, cfg: TransportConfig, rhs: _Rhs) -> np.ndarray:
    dt = cfg.dt
    L = cfg.kappa * fractional_symbol(cfg.grid, cfg.alpha)
    if cfg.scheme == "imex":
        a = rhs(hat)
        _check_cfl(rhs, cfg)
        return (hat + dt * a) / (1 + dt * L)
    E = np.exp(-L * dt)
    E2 = np.exp(-L * dt / 2)
    a = rhs(hat)
    _check_cfl(rhs, cfg)
    b = rhs(E2 * (hat + dt / 2 * a))
    c = rhs(E2 * hat + dt / 2 * b)
    d = rhs(E * hat + dt * E2 * c)
    return E * hat + dt / 6 * (E * a + 2 * E2 * (b + c) + d)


def step(state: ScalarField, config: TransportConfig) -> ScalarField:
    """One time step; raises CFLViolation or FloatingPointError."""
    if state.grid != config.grid:
        raise ValueError("state and config grids differ")
    out = irfftn(_advance(np.fft.rfftn(state.values), config, _Rhs(config)), config.grid.shape)
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("non-finite values after step")
    return state.with_values(out)


@dataclass(frozen=True, eq=False)
class Trajectory:
    grid: TorusGrid
    times: np.ndarray
    snapshots: np.ndarray  # (n_snap, *grid.shape)

    def __len__(self):
        return len(self.times)


def simulate(theta0: ScalarField, config: TransportConfig) -> Trajectory:
    """Run to T, keeping a snapshot every ``config.snapshot_every`` steps
    (and always the initial and final states)."""
    if theta0.grid != config.grid:
        raise ValueError("initial datum and config grids differ")
    rhs = _Rhs(config)
    hat = np.fft.rfftn(theta0.values)
    every, n = config.snapshot_every, config.steps
    times, snaps = [0.0], [theta0.values.copy()]
    for i in range(1, n + 1):
        hat = _advance(hat, config, rhs)
        if i % every == 0 or i == n:
            vals = irfftn(hat, config.grid.shape)
            if not np.all(np.isfinite(vals)):
                raise FloatingPointError(f"non-finite values at step {i}")
            times.append(i * config.dt)
            snaps.append(vals)
    return Trajectory(config.grid, np.array(times), np.array(snaps))


def lp_norm(values: np.ndarray, grid: TorusGrid, p: float) -> float:
    if math.isinf(p):
        return float(np.abs(values).max())
    return float((np.sum(np.abs(values) ** p) * grid.cell_volume) ** (1.0 / p))


@dataclass(frozen=True)
class DecayMonitor:
    p: float
    times: np.ndarray
    norms: np.ndarray
    delta: float
    fitted_exponent: float
    reference_exponent: float
    tolerance: float

    @property
    def max_increase(self) -> float:
        return float(np.diff(self.norms).max()) if len(self.norms) > 1 else 0.0

    @property
    def passed(self) -> bool:
        return self.max_increase <= self.tolerance

    def as_report(self) -> InequalityReport:
        inc = np.diff(self.norms)
        i = int(np.argmax(inc))
        return InequalityReport(float(inc[i]), i + 1, self.tolerance, {
            "check": "lp_decay_report", "p": self.p, "delta": self.delta,
            "fitted_exponent": self.fitted_exponent,
            "reference_exponent": self.reference_exponent})


def lp_decay_report(trajectory: Trajectory, p: float, alpha: float | None = None,
                    slack: float = 1e-10) -> DecayMonitor:
    """Lp norms per snapshot; pass iff nonincreasing within slack * ||theta_0||_p.

    Also fits the log-log slope of the last half of the snapshots and, given
    alpha, records next to it the algebraic rate -1/(p delta) with
    delta = alpha/(2(p-1)) that the bound
    (1 + C delta t ||theta_0||^{p delta})^{-1/(p delta)} would give.
    The two are only compared, never asserted.
    """
    if len(trajectory) < 3:
        raise ValueError("decay report needs at least 3 snapshots")
    norms = np.array([lp_norm(s, trajectory.grid, p) for s in trajectory.snapshots])
    t = trajectory.times
    tail = slice(len(t) // 2, None)
    tt, nn = t[tail], norms[tail]
    ok = (tt > 0) & (nn > 0)
    fitted = float(np.polyfit(np.log(tt[ok]), np.log(nn[ok]), 1)[0]) if ok.sum() >= 2 else float("nan")
    delta = ref = float("nan")
    if alpha is not None:
        if math.isinf(p):
            delta, ref = 0.0, 0.0
        else:
            delta = alpha / (2 * (p - 1))
            ref = -1.0 / (p * delta)
    return DecayMonitor(p, t, norms, delta, fitted, ref, slack * norms[0])


def band_of(values: np.ndarray, grid: TorusGrid, rel: float = 1e-12) -> int:
    """Largest |k_j| carried by the field (max-norm over axes)."""
    coef = np.abs(np.fft.rfftn(values))
    if coef.max() == 0:
        return 0
    live = coef > rel * coef.max()
    return int(max(np.abs(k)[live].max() for k in grid.wavenumbers()))


def dissipation_sign_check(theta: ScalarField, alpha: float, p: int,
                           tolerance: float = 1e-8) -> InequalityReport:
    """int theta^{p-1} Lambda^alpha theta dx >= -tolerance for even p.

    Computed by quadrature and by Parseval; the metadata also carries
    int slack / p with slack = p theta^{p-1} Lambda theta - Lambda(theta^p),
    which equals the same integral because Lambda(theta^p) has zero mean.
    """
    if p < 2 or p % 2:
        raise ValueError("p must be an even integer >= 2")
    alpha = check_order(alpha)
    grid = theta.grid
    B = band_of(theta.values, grid)
    if (p - 1) * B > grid.N // 2:
        raise ValueError(f"grid does not resolve (p-1) x band = {(p - 1) * B}")
    f = theta.values
    lam = apply_fractional_laplacian(theta, alpha).values
    g = f ** (p - 1)
    quad = float(np.sum(g * lam) * grid.cell_volume)
    G = np.fft.fftn(g)
    F = np.fft.fftn(f)
    kabs = np.sqrt(sum(k**2 for k in np.meshgrid(*([np.fft.fftfreq(grid.N, 1 / grid.N)] * grid.n),
                                                  indexing="ij")))
    spectral = float(np.real(np.sum(np.conj(G) * kabs**alpha * F))
                     * (2 * np.pi) ** grid.n / grid.size**2)
    slack = p * g * lam - apply_fractional_laplacian(theta.with_values(f**p), alpha).values
    slack_integral = float(np.sum(slack) * grid.cell_volume / p)
    return InequalityReport(-quad, None, tolerance, {
        "check": "dissipation_sign_check", "p": p, "alpha": alpha, "quadrature": quad,
        "spectral": spectral, "slack_integral": slack_integral})
