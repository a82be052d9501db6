"""Integrating-factor RK2 solver for the damped vorticity equation.

The state is the zero-mean vorticity ``omega`` plus the box-mean velocity, which
the vorticity cannot see on the torus.  One step solves

    d_t omega + (u . grad) omega + alpha omega - Laplacian omega = rot g,
    d_t mean(u) = -alpha mean(u) + mean(g),

with the linear part integrated exactly by ``exp(-(|k|^2 + alpha) dt)`` and the
dealiased transport term advanced by Heun's method inside the integrating
factor.  ``alpha = 0`` is the classical equation.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable

import numpy as np

from . import _fft
from .errors import NotDivergenceFreeError, SolverBlowupError
from .fields import (
    Grid,
    ScalarField,
    VectorField,
    _check_mean_zero,
    biot_savart,
    box_norm,
    div,
    rot,
    write_snapshot,
)
from .weights import ul_norm, z_functional

DIV_TOL = 1e-8
MAX_HALVINGS = 20
COLUMNS = ("t", "omega_inf", "u_ulR", "Z", "energy", "enstrophy", "div_res", "mean_u1", "mean_u2")


class _Spectral:
    """rfft layout wavenumbers and masks for one grid."""

    def __init__(self, grid):
        n = grid.n
        k1 = grid.k1d.copy()
        k2 = 2 * np.pi / grid.L * np.arange(n // 2 + 1)
        self.ksq = k1[:, None] ** 2 + k2[None, :] ** 2
        # Nyquist zeroed for first derivatives, as in the complex-FFT operators
        k1[n // 2] = 0.0
        k2[n // 2] = 0.0
        self.k1 = np.broadcast_to(k1[:, None], self.ksq.shape)
        self.k2 = np.broadcast_to(k2[None, :], self.ksq.shape)
        inv = np.where(self.ksq > 0, 1.0 / np.where(self.ksq > 0, self.ksq, 1.0), 0.0)
        self.inv_ksq = inv
        keep1 = np.abs(grid.index_freq) <= n / 3
        keep2 = np.arange(n // 2 + 1) <= n / 3
        self.mask = keep1[:, None] & keep2[None, :]
        self.n = n
        self._factors = {}

    def factor(self, alpha, dt):
        """``exp(-(|k|^2 + alpha) dt)``, cached per step size."""
        key = (float(alpha), float(dt))
        E = self._factors.get(key)
        if E is None:
            if len(self._factors) > 16:
                self._factors.clear()
            E = self._factors[key] = np.exp(-(self.ksq + alpha) * dt)
        return E


@dataclass(frozen=True)
class SolverConfig:
    grid: Grid
    dt: float
    t_end: float
    alpha: float = 0.0
    forcing: VectorField | None = None
    diag_every: int = 10
    diag_R: float = 1.0
    diag_center: tuple = (0.0, 0.0)
    snapshot_times: tuple = ()
    adaptive: bool = True

    def __post_init__(self):
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not (np.isfinite(self.t_end) and self.t_end >= 0):
            raise ValueError(f"t_end must be >= 0, got {self.t_end}")
        if not self.alpha >= 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if int(self.diag_every) != self.diag_every or self.diag_every < 1:
            raise ValueError(f"diag_every must be a positive integer, got {self.diag_every}")
        steps = self.t_end / self.dt
        if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
            raise ValueError(f"t_end={self.t_end} is not a whole number of steps dt={self.dt}")
        if self.forcing is not None:
            if self.forcing.grid != self.grid:
                raise ValueError("forcing lives on a different grid")
            res = float(np.abs(div(self.forcing).values).max())
            if res > DIV_TOL:
                raise NotDivergenceFreeError(f"forcing divergence {res:.3e} exceeds {DIV_TOL}")

    @property
    def n_steps(self):
        return int(round(self.t_end / self.dt))

    def cfl_bound(self, umax):
        """Largest admissible step ``h / (2 max|u|)``."""
        return math.inf if umax == 0 else self.grid.h / (2 * umax)

    @cached_property
    def forcing_mean(self):
        if self.forcing is None:
            return np.zeros(2)
        return np.array(self.forcing.mean(), dtype=float)

    @cached_property
    def forcing_rot_hat(self):
        if self.forcing is None:
            return None
        sp = _spectral(self.grid)
        g1 = _fft.rfft2(self.forcing.u1.values)
        g2 = _fft.rfft2(self.forcing.u2.values)
        r = 1j * sp.k1 * g2 - 1j * sp.k2 * g1
        r[0, 0] = 0.0
        return r

    @cached_property
    def rot_forcing_inf(self):
        if self.forcing is None:
            return 0.0
        return float(np.abs(rot(self.forcing).values).max())

    def mean_after(self, mean0, s):
        """Exact ``mean(u)`` after time ``s`` from ``mean0`` (forcing constant in time)."""
        a = self.alpha
        growth = s if a == 0 else -math.expm1(-a * s) / a
        return np.exp(-a * s) * np.asarray(mean0, dtype=float) + self.forcing_mean * growth


_SPECTRAL_CACHE: dict = {}


def _spectral(grid):
    sp = _SPECTRAL_CACHE.get(grid)
    if sp is None:
        if len(_SPECTRAL_CACHE) > 8:
            _SPECTRAL_CACHE.clear()
        sp = _SPECTRAL_CACHE[grid] = _Spectral(grid)
    return sp


@dataclass(frozen=True)
class SolverState:
    """Vorticity, time and box-mean velocity; ``u`` is recovered on demand."""

    omega: ScalarField
    t: float = 0.0
    mean: tuple = (0.0, 0.0)

    @cached_property
    def u(self):
        return biot_savart(self.omega, mean=self.mean)

    @cached_property
    def omega_hat(self):
        return _fft.rfft2(self.omega.values)

    @property
    def grid(self):
        return self.omega.grid


def init_state(u0=None, omega0=None, mean=None, t=0.0):
    """Build a state from a divergence-free velocity or a zero-mean vorticity."""
    if (u0 is None) == (omega0 is None):
        raise ValueError("give exactly one of u0 and omega0")
    if u0 is not None:
        res = float(np.abs(div(u0).values).max())
        if res > DIV_TOL:
            raise NotDivergenceFreeError(f"initial velocity divergence {res:.3e} exceeds {DIV_TOL}")
        omega = rot(u0)
        m = u0.mean() if mean is None else mean
    else:
        _check_mean_zero(omega0, "initial vorticity")
        omega = ScalarField(omega0.grid, omega0.values - omega0.mean())
        m = (0.0, 0.0) if mean is None else mean
    return SolverState(omega, float(t), (float(m[0]), float(m[1])))


def _transport(w_hat, mean, sp, forcing_hat):
    """``-(u . grad omega)`` dealiased, plus ``rot g``, in rfft layout; also ``max|u|``."""
    w = np.where(sp.mask, w_hat, 0.0)
    psi = w * sp.inv_ksq
    stack = np.stack([1j * sp.k2 * psi, -1j * sp.k1 * psi, 1j * sp.k1 * w, 1j * sp.k2 * w])
    u1, u2, w1, w2 = _fft.irfft2(stack, sp.n)
    u1 += mean[0]
    u2 += mean[1]
    out = -_fft.rfft2(u1 * w1 + u2 * w2)
    out[~sp.mask] = 0.0
    if forcing_hat is not None:
        out = out + forcing_hat
    return out, float(np.sqrt((u1 * u1 + u2 * u2).max()))


def _heun(w_hat, mean0, mean1, dt, cfg, sp, n0=None):
    # overflow is reported by the caller's finiteness check, not as a warning
    with np.errstate(over="ignore", invalid="ignore"):
        return _heun_stages(w_hat, mean0, mean1, dt, cfg, sp, n0)


def _heun_stages(w_hat, mean0, mean1, dt, cfg, sp, n0):
    E = sp.factor(cfg.alpha, dt)
    g = cfg.forcing_rot_hat
    if n0 is None:
        n0, _ = _transport(w_hat, mean0, sp, g)
    pred = E * (w_hat + dt * n0)
    n1, _ = _transport(pred, mean1, sp, g)
    out = E * (w_hat + 0.5 * dt * n0) + 0.5 * dt * n1
    out[0, 0] = 0.0
    return out


def _state(grid, w_hat, t, mean):
    values = _fft.irfft2(w_hat, grid.n)
    st = SolverState(ScalarField(grid, values), float(t), (float(mean[0]), float(mean[1])))
    st.__dict__["omega_hat"] = w_hat
    return st


def step(s, cfg, dt=None):
    """Advance one step of size ``dt`` (default ``cfg.dt``); no CFL adaptation."""
    dt = cfg.dt if dt is None else float(dt)
    sp = _spectral(cfg.grid)
    mean1 = cfg.mean_after(s.mean, dt)
    w = _heun(s.omega_hat, np.asarray(s.mean), mean1, dt, cfg, sp)
    if not np.all(np.isfinite(w)):
        raise SolverBlowupError(1, s.t + dt, _transport(s.omega_hat, s.mean, sp, None)[1])
    return _state(cfg.grid, w, s.t + dt, mean1)


@dataclass
class Trajectory:
    """Diagnostic rows in time order, optional extra columns and snapshots."""

    columns: tuple = COLUMNS
    rows: list = field(default_factory=list)
    snapshots: dict = field(default_factory=dict)
    substeps: list = field(default_factory=list)

    def append(self, row):
        if self.rows and not row[0] > self.rows[-1][0]:
            raise ValueError(f"time must increase strictly: {row[0]} after {self.rows[-1][0]}")
        if len(row) != len(self.columns):
            raise ValueError(f"expected {len(self.columns)} values, got {len(row)}")
        self.rows.append(tuple(float(v) for v in row))

    def column(self, name):
        i = self.columns.index(name)
        return np.array([r[i] for r in self.rows])

    @property
    def t(self):
        return self.column("t")

    def __len__(self):
        return len(self.rows)

    def to_csv(self, path=None):
        """CSV text with ``repr`` floats (round-trip exact, byte-stable)."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for r in self.rows:
            w.writerow([repr(v) for v in r])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = tuple(next(reader))
            traj = cls(columns=header)
            for r in reader:
                traj.rows.append(tuple(float(v) for v in r))
        return traj

    def write_snapshots(self, directory, prefix="omega"):
        directory = Path(directory)
        out = []
        for t, st in sorted(self.snapshots.items()):
            path = directory / f"{prefix}_t{t:.6g}.bin"
            write_snapshot(path, st.omega)
            out.append(path)
        return out


def diagnostics(state, cfg):
    """The standard row for ``state``, in :data:`COLUMNS` order."""
    u = state.u
    grid = cfg.grid
    return (
        state.t,
        state.omega.max_abs(),
        ul_norm(u, 2, cfg.diag_R),
        z_functional(u, cfg.diag_R, cfg.diag_center),
        box_norm(u, 2) ** 2,
        box_norm(state.omega, 2) ** 2,
        float(np.abs(div(u).values).max()),
        state.mean[0],
        state.mean[1],
    )


def run(cfg: SolverConfig, s0: SolverState, observer: Callable | None = None,
        extra_columns: tuple = ()):
    """Integrate to ``cfg.t_end`` recording diagnostics every ``cfg.diag_every`` steps.

    Time and mean velocity are computed in closed form from the step count, so the
    mean-mode record carries no accumulated rounding.  With ``cfg.adaptive`` each
    step whose ``dt`` exceeds the CFL bound is split into ``2^m`` equal substeps.
    ``observer(state)`` may return extra values appended after the standard
    columns.  On failure the exception carries the partial trajectory as
    ``.trajectory``.
    """
    if s0.grid != cfg.grid:
        raise ValueError("initial state lives on a different grid")
    sp = _spectral(cfg.grid)
    traj = Trajectory(columns=COLUMNS + tuple(extra_columns))
    t0, mean0 = s0.t, np.asarray(s0.mean, dtype=float)
    snap_steps = {int(round(ts / cfg.dt)): ts for ts in cfg.snapshot_times}

    def record(st):
        row = diagnostics(st, cfg)
        if observer is not None:
            row = row + tuple(observer(st))
        traj.append(row)

    record(s0)
    if 0 in snap_steps:
        traj.snapshots[s0.t] = s0
    w = s0.omega_hat
    state = s0
    try:
        for k in range(cfg.n_steps):
            mean_k = cfg.mean_after(mean0, k * cfg.dt)
            # the first Heun stage at the current state also yields max|u|
            n0, umax = _transport(w, mean_k, sp, cfg.forcing_rot_hat)
            m = 0
            if cfg.adaptive:
                while cfg.dt / 2**m > cfg.cfl_bound(umax):
                    m += 1
                    if m > MAX_HALVINGS:
                        raise SolverBlowupError(k + 1, t0 + k * cfg.dt, umax)
            if m:
                traj.substeps.append((t0 + k * cfg.dt, 2**m))
            sub = cfg.dt / 2**m
            for j in range(2**m):
                s_a = (k + j / 2**m) * cfg.dt
                s_b = (k + (j + 1) / 2**m) * cfg.dt
                w = _heun(w, cfg.mean_after(mean0, s_a), cfg.mean_after(mean0, s_b), sub, cfg, sp,
                          n0=n0 if j == 0 else None)
                if not np.all(np.isfinite(w)):
                    raise SolverBlowupError(k + 1, t0 + s_b, umax)
            due = (k + 1) % cfg.diag_every == 0 or k + 1 == cfg.n_steps
            if due or k + 1 in snap_steps:
                state = _state(cfg.grid, w, t0 + (k + 1) * cfg.dt,
                               cfg.mean_after(mean0, (k + 1) * cfg.dt))
                if due:
                    record(state)
                if k + 1 in snap_steps:
                    traj.snapshots[state.t] = state
    except Exception as err:
        err.trajectory = traj
        raise
    traj.final = state
    return traj


def max_principle_envelope(omega0, cfg, t):
    """Lower and upper vorticity bounds at time ``t`` (without tolerance)."""
    a = cfg.alpha
    decay = math.exp(-a * t)
    growth = t if a == 0 else -math.expm1(-a * t) / a
    f = growth * cfg.rot_forcing_inf
    return float(omega0.values.min()) * decay - f, float(omega0.values.max()) * decay + f


def max_principle_tolerance(cfg):
    return 10 * cfg.dt**2 + 10 * cfg.grid.h**2
