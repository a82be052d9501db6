"""Stream functions by averaged path integrals and compact divergence-free truncation.

For ``u = perp grad Theta = (d2 Theta, -d1 Theta)`` the stream function is the
line integral of ``(-u2, u1)``.  :func:`stream_function` integrates along the
two-leg path (horizontal, then vertical) from a base point ``(a, b)`` and
averages over base points in the unit disk.  The integral runs inside the box
and does not wrap, so a nonzero mean velocity yields a linearly growing
``Theta``, as in the plane.
"""

from __future__ import annotations

import numpy as np
from scipy.stats import qmc

from .errors import NotDivergenceFreeError, SupportError
from .fields import ScalarField, VectorField, ball_norm, div, inv_laplacian_meanzero, rot
from .weights import cutoff, weight_field, weight_gradient

DIV_TOL = 1e-8
BASE_POINTS = 16


def base_points(count=BASE_POINTS):
    """Fixed low-discrepancy points in the unit disk (unscrambled Halton, area-uniform map)."""
    h = qmc.Halton(d=2, scramble=False).random(count + 1)[1:]
    r = np.sqrt(h[:, 0])
    ang = 2 * np.pi * h[:, 1]
    return np.stack([r * np.cos(ang), r * np.sin(ang)], axis=1)


def divfree_check(u):
    """Grid maximum of the spectral divergence."""
    return float(np.abs(div(u).values).max())


def _require_divfree(u):
    res = divfree_check(u)
    if res > DIV_TOL:
        raise NotDivergenceFreeError(f"divergence residual {res:.3e} exceeds {DIV_TOL}")


def _phase(grid, coord):
    n = grid.n
    k = 2 * np.pi * np.fft.fftfreq(n, d=grid.L / n)
    d = coord - grid.x[0]
    phase = np.exp(1j * k * d)
    # the Nyquist mode is split symmetrically so the interpolant is real
    phase[n // 2] = np.cos(k[n // 2] * d)
    return phase


def _cumtrapz(values, h, axis):
    """Cumulative trapezoid from index 0 along ``axis`` (value 0 at index 0)."""
    v = np.moveaxis(values, axis, 0)
    out = np.zeros_like(v)
    out[1:] = np.cumsum(0.5 * h * (v[1:] + v[:-1]), axis=0)
    return np.moveaxis(out, 0, axis)


def _partial(cum, line, at_value, coord, grid):
    """Trapezoid integral from ``x[0]`` to the off-grid ``coord`` given the cumulative sums."""
    i = int(np.clip(np.floor((coord - grid.x[0]) / grid.h), 0, grid.n - 1))
    dx = coord - grid.x[i]
    return cum[..., i] + 0.5 * dx * (line[..., i] + at_value)


class _PathData:
    """Base-point independent pieces: row spectra of ``u1, u2`` and the vertical sums."""

    def __init__(self, u):
        self.grid = u.grid
        self.u1 = u.u1.values
        self.c1 = np.fft.fft(self.u1, axis=1)
        self.c2 = np.fft.fft(u.u2.values, axis=1)
        self.C = _cumtrapz(self.u1, self.grid.h, axis=1)

    def integral(self, base):
        grid, n, h = self.grid, self.grid.n, self.grid.h
        a, b = float(base[0]), float(base[1])
        pb = _phase(grid, b)
        # horizontal leg at x2 = b: d1 Theta = -u2 (trigonometric interpolation in x2)
        g = -(self.c2 @ pb).real / n
        G = _cumtrapz(g, h, axis=0)
        g_a = float((_phase(grid, a) @ np.fft.fft(g)).real / n)
        horiz = G - _partial(G, g, g_a, a, grid)
        # vertical leg from b to x2 at fixed x1: d2 Theta = u1
        u1_b = (self.c1 @ pb).real / n
        C_b = _partial(self.C, self.u1, u1_b, b, grid)
        return horiz[:, None] + self.C - C_b[:, None]


def path_integral(u, base):
    """``Theta`` with ``Theta(base) = 0`` along the horizontal-then-vertical path."""
    return _PathData(u).integral(base)


def stream_function(u, points=None):
    """Averaged two-leg path integral (trapezoid legs), normalized to zero box mean."""
    _require_divfree(u)
    pts = base_points() if points is None else np.asarray(points, dtype=float)
    data = _PathData(u)
    theta = np.zeros((u.grid.n, u.grid.n))
    for p in pts:
        theta += data.integral(p)
    theta /= len(pts)
    return ScalarField(u.grid, theta - theta.mean())


def spectral_stream(u):
    """``Theta`` from ``-Laplacian Theta = rot u`` plus the linear part carrying the mean."""
    grid = u.grid
    theta = -inv_laplacian_meanzero(rot(u)).values
    m1, m2 = u.mean()
    X1, X2 = grid.mesh
    return ScalarField(grid, theta + m1 * X2 - m2 * X1)


def truncate_divfree(u, N, profile="erf", theta=None):
    """``u^N = perp grad(Theta phi_N) = phi_N u + Theta perp grad phi_N``.

    ``Theta`` defaults to the spectral stream function, shifted to zero mean on
    the annulus ``N <= |x| <= 2N`` where ``grad phi_N`` lives.  ``u^N`` equals ``u``
    on ``B^N`` and vanishes outside ``B^{2N}`` pointwise.
    """
    grid = u.grid
    if not 2 * N <= grid.L / 2 - grid.h:
        raise SupportError(f"B^(2N) with N={N} does not fit in the box of side {grid.L}")
    _require_divfree(u)
    th = spectral_stream(u) if theta is None else theta
    r = grid.distance((0.0, 0.0))
    ring = (r >= N) & (r <= 2 * N)
    t = th.values - th.values[ring].mean()
    w = cutoff(N, (0.0, 0.0), profile)
    phi = weight_field(w, grid).values
    g1, g2 = weight_gradient(w, grid)
    return VectorField.from_arrays(grid, phi * u.u1.values + t * g2, phi * u.u2.values - t * g1)


def linear_growth_profile(theta, centers):
    """``(|x0| + 1)^{-1} ||Theta||_{L^2(B^1_{x0})}`` for each centre."""
    out = []
    for c in centers:
        out.append(ball_norm(theta, 2, 1.0, tuple(c)) / (np.hypot(*c) + 1.0))
    return np.array(out)
