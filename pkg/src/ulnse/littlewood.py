"""Paley-Littlewood blocks, Besov norms, Riesz operators and the interpolation checks.

Frequencies are physical (radians per unit length): the grid wavenumber ``k`` is
fed to the multipliers as ``xi = k``.  The representable band is

* ``j_min = ceil(log2(2 pi / L))``: the lowest nonzero grid frequency is ``2 pi / L``;
* ``j_max = floor(log2(2 pi n / (3 L)))``: ``2^j_max`` stays below the dealias cap.

On the torus ``S_{j_min - 1} f`` is the box mean, so the homogeneous norms include
the block ``Delta_{j_min - 1} f = S_{j_min} f - mean(f)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import IllPosedInversionError, SupportError
from .fields import (
    ScalarField,
    VectorField,
    _from_hat,
    ball_norm,
    box_norm,
    disk_mask,
    div,
    field_grid,
    grad,
    grad_l2_norm_ball,
    rot,
)
from .weights import EstimateReport, step_profile

SUPPORT_TOL = 1e-12


@dataclass(frozen=True)
class DyadicSpec:
    """Block range and the low-pass profile ``phi0`` (1 on ``|xi| <= 1/2``, 0 on ``|xi| >= 1``)."""

    j_min: int
    j_max: int
    profile: str = "quintic"

    def __post_init__(self):
        if self.j_max < self.j_min:
            raise ValueError(f"empty block range [{self.j_min}, {self.j_max}]")
        step_profile(self.profile)

    @classmethod
    def for_grid(cls, grid, profile="quintic"):
        j_min = int(np.ceil(np.log2(2 * np.pi / grid.L) - 1e-12))
        j_max = int(np.floor(np.log2(2 * np.pi * grid.n / (3 * grid.L)) + 1e-12))
        return cls(j_min, j_max, profile)

    @property
    def blocks(self):
        return range(self.j_min, self.j_max + 1)

    def phi0(self, xi):
        step, _ = step_profile(self.profile)
        return 1.0 - step(2.0 * np.abs(np.asarray(xi, dtype=float)) - 1.0)

    def psi(self, xi):
        xi = np.asarray(xi, dtype=float)
        return self.phi0(xi / 2) - self.phi0(xi)

    def check(self, j):
        if not self.j_min - 1 <= j <= self.j_max:
            raise ValueError(f"block index {j} outside [{self.j_min - 1}, {self.j_max}]")


def partition_residual(grid, spec):
    """``max |S_{j_min} + sum_j Delta_j - 1|`` over grid frequencies ``|xi| <= 2^j_max``."""
    xi = grid.kmag
    total = spec.phi0(xi / 2.0**spec.j_min)
    for j in spec.blocks:
        total = total + spec.psi(xi / 2.0**j)
    inside = xi <= 2.0**spec.j_max
    return float(np.abs(total[inside] - 1.0).max())


def _apply(f, mult):
    if isinstance(f, VectorField):
        return VectorField(_apply(f.u1, mult), _apply(f.u2, mult))
    return _from_hat(f.grid, f.hat * mult)


def dyadic_block(f, j, spec):
    """``Delta_j f``: multiplier ``psi(xi / 2^j)``.  ``j = j_min - 1`` is the mean-free low block."""
    spec.check(j)
    grid = field_grid(f)
    if j == spec.j_min - 1:
        mult = spec.phi0(grid.kmag / 2.0**spec.j_min)
        mult[0, 0] = 0.0
    else:
        mult = spec.psi(grid.kmag / 2.0**j)
    return _apply(f, mult)


def low_pass(f, j, spec):
    """``S_j f``: multiplier ``phi0(xi / 2^j)``."""
    grid = field_grid(f)
    return _apply(f, spec.phi0(grid.kmag / 2.0**j))


def reconstruct(f, spec):
    """``S_{j_min} f + sum_j Delta_j f``; equals ``f`` for data below ``2^j_max``."""
    out = low_pass(f, spec.j_min, spec)
    for j in spec.blocks:
        out = out + dyadic_block(f, j, spec)
    return out


def _lq_sum(terms, q):
    terms = np.asarray(terms, dtype=float)
    if np.isinf(q):
        return float(terms.max()) if terms.size else 0.0
    return float(np.sum(terms**q) ** (1.0 / q))


def besov_norm(f, sigma, p, q, homogeneous=True, spec=None, j_low=1):
    """Finite-band Besov norm of a scalar or vector field.

    Homogeneous: ``l^q`` over ``j_min - 1 .. j_max`` of ``2^{sigma j} ||Delta_j f||_p``.
    Inhomogeneous: ``||S_{j0} f||_p + (sum_{j >= j0} (2^{sigma j} ||Delta_j f||_p)^q)^{1/q}``
    with ``j0 = max(j_low, j_min)``.
    """
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    for e in (p, q):
        if not e >= 1:
            raise ValueError(f"exponents must lie in [1, inf], got {e}")
    spec = spec or DyadicSpec.for_grid(field_grid(f))
    if homogeneous:
        js = range(spec.j_min - 1, spec.j_max + 1)
        terms = [2.0 ** (sigma * j) * box_norm(dyadic_block(f, j, spec), p) for j in js]
        return _lq_sum(terms, q)
    j0 = max(j_low, spec.j_min)
    terms = [2.0 ** (sigma * j) * box_norm(dyadic_block(f, j, spec), p) for j in range(j0, spec.j_max + 1)]
    return box_norm(low_pass(f, j0, spec), p) + _lq_sum(terms, q)


def riesz_compose(f, i, j):
    """``R_i R_j f`` with multiplier ``-xi_i xi_j / |xi|^2`` (zero at ``xi = 0``)."""
    if i not in (0, 1) or j not in (0, 1):
        raise ValueError("axis indices must be 0 or 1")
    grid = f.grid
    ks = grid.wavenumbers
    ksq = grid.ksq.copy()
    ksq[0, 0] = 1.0
    mult = -ks[i] * ks[j] / ksq
    mult[0, 0] = 0.0
    return _from_hat(grid, f.hat * mult)


def _check_zero_mean(f, name):
    tol = 1e-10 * max(1.0, f.max_abs())
    if abs(f.mean()) > tol:
        raise IllPosedInversionError(f"{name} has mean {f.mean():.3e}; recovery needs zero mean")


def helmholtz_recover(h1, h2):
    """Zero-mean ``u`` with ``div u = h1`` and ``rot u = h2``.

    ``u = grad phi + perp grad psi`` with ``Laplacian phi = h1`` and ``-Laplacian psi = h2``:
    ``u1_hat = -i (xi1 h1_hat - xi2 h2_hat) / |xi|^2``, ``u2_hat = -i (xi2 h1_hat + xi1 h2_hat) / |xi|^2``.
    """
    _check_zero_mean(h1, "divergence")
    _check_zero_mean(h2, "vorticity")
    grid = h1.grid
    k1, k2 = grid.deriv_wavenumbers
    ksq = grid.ksq.copy()
    ksq[0, 0] = 1.0
    a, b = h1.hat, h2.hat
    u1 = -1j * (k1 * a - k2 * b) / ksq
    u2 = -1j * (k2 * a + k1 * b) / ksq
    u1[0, 0] = u2[0, 0] = 0.0
    return VectorField(_from_hat(grid, u1), _from_hat(grid, u2))


# --- inequality checks ------------------------------------------------------------


def _check_support(u, radius, x0):
    grid = u.grid
    outside = ~disk_mask(grid, radius, x0)
    mag = u.magnitude()
    spill = float(mag[outside].max()) if outside.any() else 0.0
    if spill > SUPPORT_TOL * max(float(mag.max()), 1e-300):
        raise SupportError(f"field is not supported in B({x0}, {radius}): max |u| outside is {spill:.3e}")


def interpolation_check(u, R, x0=(0.0, 0.0), variant="L3", p=4.0):
    """Local interpolation for ``u`` supported in ``B^{2R}_{x0}``.

    ``L3``: ``||u||_3`` against ``||u||_2^{5/6} (||rot u||_inf + ||div u||_inf)^{1/6}``.
    ``Linf``: ``||u||_inf`` against ``||u||_2^t (||rot u||_p + ||div u||_p)^{1-t}``,
    ``t = 1/2 - 1/(2(p - 1))``, for ``2 < p < inf``.  Both are scale invariant.
    """
    _check_support(u, 2 * R, x0)
    h = rot(u)
    d = div(u)
    l2 = box_norm(u, 2)
    if variant == "L3":
        lhs = box_norm(u, 3)
        rhs = l2 ** (5 / 6) * (h.max_abs() + d.max_abs()) ** (1 / 6)
        params = {"R": float(R), "x0": tuple(map(float, x0))}
    elif variant == "Linf":
        if not 2 < p < np.inf:
            raise ValueError(f"Linf variant needs 2 < p < inf, got {p}")
        t = 0.5 - 1.0 / (2 * (p - 1))
        lhs = box_norm(u, np.inf)
        rhs = l2**t * (box_norm(h, p) + box_norm(d, p)) ** (1 - t)
        params = {"R": float(R), "x0": tuple(map(float, x0)), "p": float(p), "theta": t}
    else:
        raise ValueError(f"unknown variant {variant!r}; use 'L3' or 'Linf'")
    return EstimateReport(f"interp_{variant}", lhs, rhs, params=params)


def _grad_magnitude(f):
    if isinstance(f, VectorField):
        gs = [grad(c) for c in f.components]
        return np.sqrt(sum(g.u1.values**2 + g.u2.values**2 for g in gs))
    g = grad(f)
    return np.sqrt(g.u1.values**2 + g.u2.values**2)


def bernstein_check(f, j, p=2.0, q=np.inf, spec=None):
    """Both Bernstein ratios at block ``j``; degenerate (0/0) reports are skipped.

    1) ``||Delta_j f||_p / (2^{-j} ||grad Delta_j f||_p)``
    2) ``||S_j f||_q / (2^{j (2/p - 2/q)} ||S_j f||_p)``
    """
    if not 1 <= p <= q:
        raise ValueError(f"need 1 <= p <= q, got p={p}, q={q}")
    grid = field_grid(f)
    spec = spec or DyadicSpec.for_grid(grid)
    spec.check(j)
    reports = []
    block = dyadic_block(f, j, spec)
    lhs1 = box_norm(block, p)
    rhs1 = 2.0**-j * box_norm(ScalarField(grid, _grad_magnitude(block)), p)
    if lhs1 > 0 or rhs1 > 0:
        reports.append(EstimateReport("bernstein1", lhs1, rhs1, params={"j": j, "p": float(p)}))
    low = low_pass(f, j, spec)
    lhs2 = box_norm(low, q)
    rhs2 = 2.0 ** (j * (2 / p - 2 / q)) * box_norm(low, p)
    if lhs2 > 0 or rhs2 > 0:
        reports.append(EstimateReport("bernstein2", lhs2, rhs2, params={"j": j, "p": float(p), "q": float(q)}))
    return reports


def ladyzhenskaya_check(U):
    """``||U||_4^2`` against ``||U||_2 ||grad U||_2``.

    Slicing along each axis gives ``||f||_4^4 <= ||f||_2^2 ||d1 f||_2 ||d2 f||_2`` for
    compactly supported scalars, hence the constant 1 for vector fields.
    """
    grid = field_grid(U)
    lhs = box_norm(U, 4) ** 2
    rhs = box_norm(U, 2) * box_norm(ScalarField(grid, _grad_magnitude(U)), 2)
    return EstimateReport("ladyzhenskaya", lhs, rhs)


def ball_interpolation_check(u, R, x0=(0.0, 0.0)):
    """``||u||^3_{L^3(B)}`` against ``||u||^2_{L^2(B)} ||u||_{W^{1,2}(B)}`` on ``B = B^R_{x0}``."""
    l2 = ball_norm(u, 2, R, x0)
    g2 = grad_l2_norm_ball(u, R, x0)
    lhs = ball_norm(u, 3, R, x0) ** 3
    rhs = l2**2 * np.sqrt(l2**2 + g2**2)
    return EstimateReport("interp_ball", lhs, rhs, params={"R": float(R), "x0": tuple(map(float, x0))})


TRIEBEL_SIGMA, TRIEBEL_P, TRIEBEL_Q = 1 / 6, 12 / 5, 3.0


def triebel_check(u, spec=None):
    """``||u||_3`` against the inhomogeneous ``B^{1/6}_{12/5, 3}`` norm (``s - 2/p = -2/q``)."""
    lhs = box_norm(u, TRIEBEL_Q)
    rhs = besov_norm(u, TRIEBEL_SIGMA, TRIEBEL_P, TRIEBEL_Q, homogeneous=False, spec=spec)
    return EstimateReport("triebel", lhs, rhs)


def almost_orthogonality(f, spec=None):
    """``(||S_{j_min} f||^2 + sum_j ||Delta_j f||^2) / ||f||^2``; lies in ``[1/2, 1]`` on the band."""
    spec = spec or DyadicSpec.for_grid(field_grid(f))
    total = box_norm(low_pass(f, spec.j_min, spec), 2) ** 2
    total += sum(box_norm(dyadic_block(f, j, spec), 2) ** 2 for j in spec.blocks)
    return total / box_norm(f, 2) ** 2
