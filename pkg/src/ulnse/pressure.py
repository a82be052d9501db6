"""Whole-space pressure gradient: spectral reference, kernel splitting, local bound.

Sign convention: the momentum equation carries ``+grad p`` on the right-hand
side, so ``Laplacian p = sum_ij d_i d_j w_ij`` and on the torus
``p_hat = sum_ij k_i k_j w_hat_ij / |k|^2``.

``K_ij(x) = (|x|^2 delta_ij - 2 x_i x_j) / (2 pi |x|^4)`` is the principal-value
part of ``d_i d_j G`` with ``G = log|x| / (2 pi)``; the distributional second
derivative also carries ``(delta_ij / 2) delta_0``.  The near-field multiplier
below includes that point mass so that ``div grad P(w) = sum d_i d_j w_ij``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import special

from . import _fft
from .errors import NotDivergenceFreeError, SupportError
from .fields import Grid, ScalarField, TensorField, VectorField, div
from .weights import (
    EstimateReport,
    cutoff,
    step_profile,
    theta_ball_integral,
    weight_field,
    weight_gradient,
)

DIV_TOL = 1e-8


def kernel_eval(x):
    """``K(x)`` as a 2x2 array (symmetric, trace-free)."""
    x = np.asarray(x, dtype=float)
    r2 = float(x @ x)
    if r2 == 0.0:
        raise ValueError("the pressure kernel is singular at the origin")
    c = 1.0 / (2 * np.pi * r2 * r2)
    # K_22 = -K_11 by construction so the trace vanishes in floating point too
    k11 = (x[1] * x[1] - x[0] * x[0]) * c
    k12 = -2.0 * x[0] * x[1] * c
    return np.array([[k11, k12], [k12, -k11]])


def _kernel_components(z1, z2):
    r2 = z1 * z1 + z2 * z2
    with np.errstate(divide="ignore", invalid="ignore"):
        c = 1.0 / (2 * np.pi * r2 * r2)
        k11 = (z2 * z2 - z1 * z1) * c
        k22 = -k11
        k12 = -2 * z1 * z2 * c
    return k11, k12, k22


def _kernel_gradient_components(z1, z2):
    """``d_l K_ij`` for (ij) in (11, 12, 22) and l in (1, 2)."""
    r2 = z1 * z1 + z2 * z2
    with np.errstate(divide="ignore", invalid="ignore"):
        a = 1.0 / (2 * np.pi * r2 * r2)
        b = 4.0 / (2 * np.pi * r2**3)
        k11, k12, k22 = (r2 - 2 * z1 * z1), -2 * z1 * z2, (r2 - 2 * z2 * z2)
        # d_l of the numerators
        d1 = {"11": 2 * z1 - 4 * z1, "12": -2 * z2, "22": 2 * z1}
        d2 = {"11": 2 * z2, "12": -2 * z1, "22": 2 * z2 - 4 * z2}
        nums = {"11": k11, "12": k12, "22": k22}
        out = {}
        for key in ("11", "12", "22"):
            out[key] = (d1[key] * a - z1 * b * nums[key], d2[key] * a - z2 * b * nums[key])
    return out


@dataclass(frozen=True)
class SplitSpec:
    """Near/far splitting of the kernel at scale ``R``: ``psi_R(x) = psi(|x|/R)``.

    ``psi`` is 1 for ``|x| <= R/4`` and 0 for ``|x| >= R/2``; the transition uses
    the named step profile.  The quintic default keeps the differentiated tail
    kernel C^1, which the grid quadrature needs at small ``R``.
    """

    R: float
    profile: str = "quintic"

    def __post_init__(self):
        if not self.R > 0:
            raise ValueError("splitting scale must be positive")
        step_profile(self.profile)

    def psi(self, r):
        step, _ = step_profile(self.profile)
        s = np.asarray(r, dtype=float) / self.R
        return 1.0 - step(4.0 * s - 1.0)

    def dpsi(self, r):
        _, dstep = step_profile(self.profile)
        s = np.asarray(r, dtype=float) / self.R
        return -4.0 * dstep(4.0 * s - 1.0) / self.R


def tail_kernel_gradient(z, spec):
    """``grad [(1 - psi_R) K](z)``: array of shape (2, 2, 2, ...) indexed ``[l, i, j]``."""
    z = np.asarray(z, dtype=float)
    z1, z2 = z[..., 0], z[..., 1]
    r = np.hypot(z1, z2)
    g = _kernel_gradient_components(z1, z2)
    k11, k12, k22 = _kernel_components(z1, z2)
    one_minus = 1.0 - spec.psi(r)
    dpsi = spec.dpsi(r)
    with np.errstate(divide="ignore", invalid="ignore"):
        e1 = np.where(r > 0, z1 / r, 0.0)
        e2 = np.where(r > 0, z2 / r, 0.0)
    out = np.zeros((2, 2, 2) + z1.shape)
    for (i, j), key, kv in (((0, 0), "11", k11), ((0, 1), "12", k12), ((1, 1), "22", k22)):
        for l, e in ((0, e1), (1, e2)):
            val = one_minus * g[key][l] - dpsi * e * kv
            val = np.where(one_minus > 0, val, 0.0)
            out[l, i, j] = val
            out[l, j, i] = val
    return out


def tail_kernel(z, spec):
    """``[(1 - psi_R) K](z)`` as shape (2, 2, ...)."""
    z = np.asarray(z, dtype=float)
    z1, z2 = z[..., 0], z[..., 1]
    one_minus = 1.0 - spec.psi(np.hypot(z1, z2))
    k11, k12, k22 = _kernel_components(z1, z2)
    out = np.zeros((2, 2) + z1.shape)
    for (i, j), kv in (((0, 0), k11), ((0, 1), k12), ((1, 1), k22)):
        val = np.where(one_minus > 0, one_minus * kv, 0.0)
        out[i, j] = val
        out[j, i] = val
    return out


def subtracted_kernel(x, y, x0, spec):
    """``Kbar(x, y) = F(x - y) - F(x - x0)`` with ``F = (1 - psi_R) K``."""
    x = np.asarray(x, dtype=float)
    return tail_kernel(x - np.asarray(y, dtype=float), spec) - tail_kernel(x - np.asarray(x0, dtype=float), spec)


# --- spectral reference ---------------------------------------------------------


def _symmetric(w):
    return w.symmetrized()


def pressure_spectral(w):
    """Zero-mean torus pressure ``p`` with ``Laplacian p = sum d_i d_j w_ij``."""
    w = _symmetric(w)
    grid = w.grid
    k1, k2 = grid.wavenumbers
    ksq = grid.ksq.copy()
    ksq[0, 0] = 1.0
    ph = (k1 * k1 * w.w11.hat + 2 * k1 * k2 * w.w12.hat + k2 * k2 * w.w22.hat) / ksq
    ph[0, 0] = 0.0
    return ScalarField(grid, _fft.ifft2(ph).real, spectral=ph)


def grad_p_spectral(w):
    """``grad p`` on the torus for the (symmetrized) tensor ``w``."""
    p = pressure_spectral(w)
    d1, d2 = p.grid.deriv_wavenumbers
    ph = p.spectral
    return VectorField(
        ScalarField(p.grid, _fft.ifft2(1j * d1 * ph).real),
        ScalarField(p.grid, _fft.ifft2(1j * d2 * ph).real),
    )


def double_divergence(w):
    """``sum_ij d_i d_j w_ij`` with the same derivative multipliers as ``grad``."""
    w = _symmetric(w)
    k1, k2 = w.grid.deriv_wavenumbers
    hat = -(k1 * k1 * w.w11.hat + 2 * k1 * k2 * w.w12.hat + k2 * k2 * w.w22.hat)
    return ScalarField(w.grid, _fft.ifft2(hat).real)


# --- kernel splitting -----------------------------------------------------------


def _near_integral(z, spec, panels=None):
    """``I(z) = int_0^{1/2} psi(s) J_2(z s) / s ds`` for an array of ``z >= 0``."""
    z = np.asarray(z, dtype=float)
    out = np.zeros_like(z)
    pos = z > 0
    zp = z[pos]
    quarter = zp / 4
    # int_0^{1/4} J_2(z s)/s ds = 1/2 - J_1(z/4)/(z/4)
    inner = 0.5 - special.j1(quarter) / quarter
    # transition [1/4, 1/2]: Gauss-Legendre on panels fine enough for the oscillation
    zmax = float(zp.max()) if zp.size else 0.0
    if panels is None:
        panels = int(max(8, np.ceil(zmax / (4 * np.pi)) * 4))
    nodes, wts = np.polynomial.legendre.leggauss(12)
    edges = np.linspace(0.25, 0.5, panels + 1)
    mids = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    s = (mids[:, None] + half[:, None] * nodes[None, :]).ravel()
    ws = (half[:, None] * wts[None, :]).ravel()
    spec_unit = SplitSpec(1.0, spec.profile)
    psi_s = spec_unit.psi(s)
    trans = np.empty_like(zp)
    for start in range(0, zp.size, 4096):
        zz = zp[start:start + 4096, None]
        trans[start:start + 4096] = np.sum(ws * psi_s * special.jv(2, zz * s) / s, axis=1)
    out[pos] = inner + trans
    return out


@lru_cache(maxsize=16)
def _near_multiplier(n, L, R, profile):
    grid = Grid(n, L)
    spec = SplitSpec(R, profile)
    kmag = grid.kmag
    uniq, inv = np.unique(np.round(kmag, 12), return_inverse=True)
    I = _near_integral(uniq * R, spec)[inv].reshape(n, n)
    k1, k2 = grid.wavenumbers
    ksq = grid.ksq.copy()
    ksq[0, 0] = 1.0
    m11 = 0.5 + (2 * k1 * k1 / ksq - 1.0) * I
    m22 = 0.5 + (2 * k2 * k2 / ksq - 1.0) * I
    m12 = (2 * k1 * k2 / ksq) * I
    m11[0, 0] = m22[0, 0] = 0.5
    m12[0, 0] = 0.0
    for m in (m11, m12, m22):
        m.setflags(write=False)
    return m11, m12, m22


def near_multiplier(grid, spec):
    """Fourier multiplier of ``psi_R (K + delta_ij delta_0 / 2)`` on the grid wavenumbers."""
    return _near_multiplier(grid.n, grid.L, float(spec.R), spec.profile)


def support_mask(w):
    return w.magnitude() > 0


def _check_support(w, margin):
    grid = w.grid
    mask = support_mask(w)
    if not mask.any():
        return
    X1, X2 = grid.mesh
    edge = grid.L / 2 - np.maximum(np.abs(X1[mask]), np.abs(X2[mask]))
    # grid points sit in [-L/2, L/2 - h]; the last column is adjacent to the seam
    if edge.min() - grid.h < margin:
        raise SupportError(
            f"support of w comes within {edge.min() - grid.h:.3g} of the box boundary; "
            f"the splitting at R={margin} needs at least R"
        )


def _tail_kernel_grid(grid, spec):
    """``grad F`` sampled at displacements ``m h``, ``m`` in ``[-n, n)``, FFT layout on 2n."""
    n2 = 2 * grid.n
    m = np.fft.fftfreq(n2, d=1.0 / n2)
    d = grid.h * m
    Z = np.stack(np.meshgrid(d, d, indexing="ij"), axis=-1)
    return tail_kernel_gradient(Z, spec)


def grad_p_near(w, spec):
    w = _symmetric(w)
    m11, m12, m22 = near_multiplier(w.grid, spec)
    ph = m11 * w.w11.hat + 2 * m12 * w.w12.hat + m22 * w.w22.hat
    d1, d2 = w.grid.deriv_wavenumbers
    return VectorField(
        ScalarField(w.grid, _fft.ifft2(1j * d1 * ph).real),
        ScalarField(w.grid, _fft.ifft2(1j * d2 * ph).real),
    )


def grad_p_tail(w, spec):
    """Exact quadrature sum of ``grad F * w`` (linear convolution via zero padding)."""
    w = _symmetric(w)
    grid = w.grid
    n, n2 = grid.n, 2 * grid.n
    G = _tail_kernel_grid(grid, spec)

    def pad(a):
        out = np.zeros((n2, n2))
        out[:n, :n] = a
        return _fft.rfft2(out)

    w11, w12, w22 = pad(w.w11.values), pad(w.w12.values), pad(w.w22.values)
    comps = []
    for l in range(2):
        acc = (_fft.rfft2(G[l, 0, 0]) * w11 + 2 * _fft.rfft2(G[l, 0, 1]) * w12
               + _fft.rfft2(G[l, 1, 1]) * w22)
        comps.append(_fft.irfft2(acc, n2)[:n, :n] * grid.cell_area)
    return VectorField.from_arrays(grid, comps[0], comps[1])


def grad_p_kernel_split(w, spec):
    """``grad P(w) = K1 w + K2 w`` for compactly supported ``w``.

    The near part uses the exact multiplier of the localized kernel; the tail
    part is the direct quadrature sum of the differentiated smooth kernel.
    """
    _check_support(w, spec.R)
    return grad_p_near(w, spec) + grad_p_tail(w, spec)


def pad_tensor(w, factor=2):
    """Embed ``w`` (centred) in a box ``factor`` times larger with the same spacing."""
    grid = w.grid
    big = Grid(grid.n * factor, grid.L * factor)
    off = (big.n - grid.n) // 2

    def emb(f):
        a = np.zeros((big.n, big.n))
        a[off:off + grid.n, off:off + grid.n] = f.values
        return ScalarField(big, a)

    return TensorField(emb(w.w11), emb(w.w12), emb(w.w21), emb(w.w22)), off


def padded_spectral_reference(w, factor=2):
    """``grad_p_spectral`` on the padded box, restricted back to the original grid."""
    big, off = pad_tensor(w, factor)
    g = grad_p_spectral(big)
    sl = slice(off, off + w.grid.n)
    return VectorField.from_arrays(w.grid, g.u1.values[sl, sl], g.u2.values[sl, sl])


def inner_half_mask(grid):
    X1, X2 = grid.mesh
    return (np.abs(X1) <= grid.L / 4) & (np.abs(X2) <= grid.L / 4)


def relative_l2(a, b, mask):
    num = np.sum(((a.u1.values - b.u1.values) ** 2 + (a.u2.values - b.u2.values) ** 2)[mask])
    den = np.sum((b.u1.values**2 + b.u2.values**2)[mask])
    return float(np.sqrt(num / den)) if den > 0 else float(np.sqrt(num))


# --- Lemma: local pairing bound -------------------------------------------------


def subtraction_constant(w, x0, spec):
    """``p_{x0} = sum_ij int (1 - psi_R(x - x0)) K_ij(x - x0) w_ij(x) dx``."""
    w = _symmetric(w)
    grid = w.grid
    d1, d2 = grid.displacement(x0)
    F = tail_kernel(np.stack([d1, d2], axis=-1), spec)
    total = F[0, 0] * w.w11.values + 2 * F[0, 1] * w.w12.values + F[1, 1] * w.w22.values
    return float(total.sum() * grid.cell_area)


def lemma02_bound(w, v, R, x0=(0.0, 0.0), p=1.5, q=3.0, profile="cubic"):
    """Measure ``|(grad P(w), phi_{R,x0} v)|`` against the weighted local bound.

    rhs = ``[int theta_{R,x0}(x) ||w||_{L^p(B^R_x)} dx] * ||phi^{1/2} v||_{L^q}``.
    """
    if not (1 < p < np.inf and 1 < q < np.inf) or abs(1 / p + 1 / q - 1) > 1e-12:
        raise ValueError(f"exponents must be conjugate with 1 < p, q < inf; got p={p}, q={q}")
    res = float(np.abs(div(v).values).max())
    if res > DIV_TOL:
        raise NotDivergenceFreeError(f"test field has divergence residual {res:.3e} > {DIV_TOL}")
    grid = w.grid
    w = _symmetric(w)
    phi_w = cutoff(R, x0, profile)
    phi = weight_field(phi_w, grid).values
    gp = grad_p_spectral(w)
    pairing = np.sum((gp.u1.values * v.u1.values + gp.u2.values * v.u2.values) * phi) * grid.cell_area
    lhs = abs(float(pairing))

    # integration by parts against the cut-off gradient, with the constant subtracted
    spec = SplitSpec(R)
    px0 = subtraction_constant(w, x0, spec) if 2 * R <= grid.L / 2 else float("nan")
    pres = pressure_spectral(w).values
    g1, g2 = weight_gradient(phi_w, grid)
    ibp = -np.sum(pres * (g1 * v.u1.values + g2 * v.u2.values)) * grid.cell_area

    rhs_w = theta_ball_integral(w, p, R, x0)
    vq = (np.sum(phi ** (q / 2) * v.magnitude() ** q) * grid.cell_area) ** (1.0 / q)
    rhs = rhs_w * vq
    return EstimateReport(
        "lemma02", lhs, rhs,
        params={
            "R": float(R), "x0": tuple(float(c) for c in x0), "p": float(p), "q": float(q),
            "p_x0": px0, "ibp_residual": abs(float(ibp) - float(pairing)),
        },
    )
