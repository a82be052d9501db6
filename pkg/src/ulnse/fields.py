"""Periodic grid fields, spectral operators and local norms.

The whole plane is replaced by the periodic box ``[-L/2, L/2)^2`` sampled on an
``n x n`` grid (axis 0 is ``x1``, axis 1 is ``x2``).  Forward transforms are
unnormalized; the inverse carries the ``1/n^2`` factor, so a constant field
``c`` has the single coefficient ``c * n**2`` at wavenumber zero.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from . import _fft
from .errors import IllPosedInversionError, SupportError

SNAPSHOT_MAGIC = b"ULNSE1"
MEAN_TOL = 1e-10


@dataclass(frozen=True)
class Grid:
    n: int
    L: float

    def __post_init__(self):
        n = self.n
        if not isinstance(n, (int, np.integer)) or n < 8 or n & (n - 1):
            raise ValueError(f"grid size must be a power of two >= 8, got {n!r}")
        if not np.isfinite(self.L) or self.L <= 0:
            raise ValueError(f"box length must be positive, got {self.L!r}")
        object.__setattr__(self, "n", int(n))
        object.__setattr__(self, "L", float(self.L))

    @property
    def h(self):
        return self.L / self.n

    @property
    def cell_area(self):
        return self.h * self.h

    @cached_property
    def x(self):
        return -self.L / 2 + self.h * np.arange(self.n)

    @cached_property
    def mesh(self):
        return np.meshgrid(self.x, self.x, indexing="ij")

    @cached_property
    def index_freq(self):
        """Integer wavenumber index per axis in FFT order."""
        return np.fft.fftfreq(self.n, d=1.0 / self.n).astype(int)

    @cached_property
    def k1d(self):
        return 2 * np.pi / self.L * self.index_freq

    @cached_property
    def wavenumbers(self):
        return np.meshgrid(self.k1d, self.k1d, indexing="ij")

    @cached_property
    def deriv_wavenumbers(self):
        # Nyquist row/column zeroed so odd derivatives of real fields stay real.
        k = self.k1d.copy()
        k[self.n // 2] = 0.0
        return np.meshgrid(k, k, indexing="ij")

    @cached_property
    def ksq(self):
        k1, k2 = self.wavenumbers
        return k1 * k1 + k2 * k2

    @cached_property
    def kmag(self):
        return np.sqrt(self.ksq)

    @cached_property
    def dealias_mask(self):
        m = np.abs(self.index_freq)
        keep = m <= self.n / 3
        return keep[:, None] & keep[None, :]

    def displacement(self, x0):
        """Minimum-image displacement ``x - x0`` at every grid point."""
        x0 = np.asarray(x0, dtype=float)
        X1, X2 = self.mesh
        d1 = np.mod(X1 - x0[0] + self.L / 2, self.L) - self.L / 2
        d2 = np.mod(X2 - x0[1] + self.L / 2, self.L) - self.L / 2
        return d1, d2

    def distance(self, x0):
        d1, d2 = self.displacement(x0)
        return np.hypot(d1, d2)

    @cached_property
    def origin_distance(self):
        """Periodic distance of every grid point from grid index (0, 0), FFT layout."""
        d = self.h * self.index_freq.astype(float)
        return np.hypot(d[:, None], d[None, :])

    def point(self, index):
        i, j = index
        return np.array([self.x[i], self.x[j]])


def _as_array(grid, values):
    arr = np.array(values, dtype=float, copy=True)
    if arr.shape != (grid.n, grid.n):
        raise ValueError(f"expected shape {(grid.n, grid.n)}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("field values must be finite")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: Grid
    values: np.ndarray
    spectral: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "values", _as_array(self.grid, self.values))
        if self.spectral is not None:
            spec = np.array(self.spectral, dtype=complex, copy=True)
            if spec.shape != (self.grid.n, self.grid.n):
                raise ValueError("spectral cache has the wrong shape")
            spec.setflags(write=False)
            object.__setattr__(self, "spectral", spec)

    @classmethod
    def from_function(cls, grid, func):
        X1, X2 = grid.mesh
        return cls(grid, np.broadcast_to(func(X1, X2), (grid.n, grid.n)))

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros((grid.n, grid.n)))

    @classmethod
    def from_spectral(cls, grid, coeffs):
        coeffs = np.asarray(coeffs, dtype=complex)
        return cls(grid, _fft.ifft2(coeffs).real, spectral=coeffs)

    @property
    def hat(self):
        if self.spectral is not None:
            return self.spectral
        return self._hat

    @cached_property
    def _hat(self):
        out = _fft.fft2(self.values)
        out.setflags(write=False)
        return out

    def mean(self):
        return float(self.values.mean())

    def max_abs(self):
        return float(np.abs(self.values).max())

    def integral(self):
        return float(self.values.sum() * self.grid.cell_area)

    def _coerce(self, other):
        if isinstance(other, ScalarField):
            if other.grid != self.grid:
                raise ValueError("fields live on different grids")
            return other.values
        return other

    def __add__(self, other):
        return ScalarField(self.grid, self.values + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return ScalarField(self.grid, self.values - self._coerce(other))

    def __mul__(self, other):
        return ScalarField(self.grid, self.values * self._coerce(other))

    __rmul__ = __mul__

    def __neg__(self):
        return ScalarField(self.grid, -self.values)


@dataclass(frozen=True, eq=False)
class VectorField:
    u1: ScalarField
    u2: ScalarField

    def __post_init__(self):
        if self.u1.grid != self.u2.grid:
            raise ValueError("vector components must share a grid")

    @classmethod
    def from_arrays(cls, grid, a1, a2):
        return cls(ScalarField(grid, a1), ScalarField(grid, a2))

    @classmethod
    def zeros(cls, grid):
        return cls(ScalarField.zeros(grid), ScalarField.zeros(grid))

    @classmethod
    def constant(cls, grid, c):
        ones = np.ones((grid.n, grid.n))
        return cls.from_arrays(grid, c[0] * ones, c[1] * ones)

    @property
    def grid(self):
        return self.u1.grid

    @property
    def components(self):
        return (self.u1, self.u2)

    def magnitude(self):
        return np.hypot(self.u1.values, self.u2.values)

    def mean(self):
        return np.array([self.u1.mean(), self.u2.mean()])

    def max_abs(self):
        return float(self.magnitude().max())

    def dot(self, other):
        return ScalarField(
            self.grid, self.u1.values * other.u1.values + self.u2.values * other.u2.values
        )

    def __add__(self, other):
        return VectorField(self.u1 + other.u1, self.u2 + other.u2)

    def __sub__(self, other):
        return VectorField(self.u1 - other.u1, self.u2 - other.u2)

    def __mul__(self, other):
        if isinstance(other, VectorField):
            raise TypeError("use dot() or outer() for vector products")
        return VectorField(self.u1 * other, self.u2 * other)

    __rmul__ = __mul__

    def __neg__(self):
        return VectorField(-self.u1, -self.u2)


@dataclass(frozen=True, eq=False)
class TensorField:
    """Rank-two tensor field stored component-wise (``w[i][j]``)."""

    w11: ScalarField
    w12: ScalarField
    w21: ScalarField
    w22: ScalarField

    @classmethod
    def outer(cls, u, v=None):
        v = u if v is None else v
        return cls(u.u1 * v.u1, u.u1 * v.u2, u.u2 * v.u1, u.u2 * v.u2)

    @classmethod
    def zeros(cls, grid):
        z = ScalarField.zeros(grid)
        return cls(z, z, z, z)

    @property
    def grid(self):
        return self.w11.grid

    def component(self, i, j):
        return ((self.w11, self.w12), (self.w21, self.w22))[i][j]

    def symmetrized(self):
        off = ScalarField(self.grid, 0.5 * (self.w12.values + self.w21.values))
        return TensorField(self.w11, off, off, self.w22)

    def magnitude(self):
        return np.sqrt(
            self.w11.values**2 + self.w12.values**2 + self.w21.values**2 + self.w22.values**2
        )

    def __add__(self, other):
        return TensorField(
            self.w11 + other.w11, self.w12 + other.w12, self.w21 + other.w21, self.w22 + other.w22
        )

    def __sub__(self, other):
        return TensorField(
            self.w11 - other.w11, self.w12 - other.w12, self.w21 - other.w21, self.w22 - other.w22
        )

    def __mul__(self, c):
        return TensorField(self.w11 * c, self.w12 * c, self.w21 * c, self.w22 * c)

    __rmul__ = __mul__


def pointwise_abs(f):
    """Pointwise Euclidean magnitude of a scalar, vector or tensor field (or raw array)."""
    if isinstance(f, ScalarField):
        return np.abs(f.values)
    if isinstance(f, (VectorField, TensorField)):
        return f.magnitude()
    return np.abs(np.asarray(f, dtype=float))


def field_grid(f):
    if isinstance(f, (ScalarField, VectorField, TensorField)):
        return f.grid
    raise TypeError(f"expected a field, got {type(f).__name__}")


# --- spectral machinery -------------------------------------------------------


def spectral_transform(f, direction="forward"):
    """Fill (forward) or consume (inverse) the spectral cache of ``f``."""
    if direction == "forward":
        return ScalarField(f.grid, f.values, spectral=_fft.fft2(f.values))
    if direction == "inverse":
        if f.spectral is None:
            raise ValueError("inverse transform needs a spectral cache")
        if not np.all(np.isfinite(f.spectral)):
            raise ValueError("spectral coefficients must be finite")
        return ScalarField.from_spectral(f.grid, f.spectral)
    raise ValueError(f"unknown direction {direction!r}")


def _from_hat(grid, coeffs):
    return ScalarField(grid, _fft.ifft2(coeffs).real)


def _check_mean_zero(f, what):
    scale = max(1.0, f.max_abs())
    if abs(f.mean()) > MEAN_TOL * scale:
        raise IllPosedInversionError(
            f"{what} requires a zero-mean field; mean is {f.mean():.3e}"
        )


def grad(f):
    k1, k2 = f.grid.deriv_wavenumbers
    fh = f.hat
    return VectorField(_from_hat(f.grid, 1j * k1 * fh), _from_hat(f.grid, 1j * k2 * fh))


def partial(f, axis):
    k = f.grid.deriv_wavenumbers[axis]
    return _from_hat(f.grid, 1j * k * f.hat)


def div(u):
    k1, k2 = u.grid.deriv_wavenumbers
    return _from_hat(u.grid, 1j * k1 * u.u1.hat + 1j * k2 * u.u2.hat)


def rot(u):
    k1, k2 = u.grid.deriv_wavenumbers
    return _from_hat(u.grid, 1j * k1 * u.u2.hat - 1j * k2 * u.u1.hat)


def perp_grad(f):
    """``(d2 f, -d1 f)``."""
    k1, k2 = f.grid.deriv_wavenumbers
    fh = f.hat
    return VectorField(_from_hat(f.grid, 1j * k2 * fh), _from_hat(f.grid, -1j * k1 * fh))


def laplacian(f):
    if isinstance(f, VectorField):
        return VectorField(laplacian(f.u1), laplacian(f.u2))
    return _from_hat(f.grid, -f.grid.ksq * f.hat)


def inv_laplacian_meanzero(f):
    if isinstance(f, VectorField):
        return VectorField(inv_laplacian_meanzero(f.u1), inv_laplacian_meanzero(f.u2))
    _check_mean_zero(f, "inverse Laplacian")
    ksq = f.grid.ksq.copy()
    ksq[0, 0] = 1.0
    coeffs = -f.hat / ksq
    coeffs[0, 0] = 0.0
    return _from_hat(f.grid, coeffs)


_OPERATORS = {
    "grad": grad,
    "div": div,
    "rot": rot,
    "laplacian": laplacian,
    "inv_laplacian_meanzero": inv_laplacian_meanzero,
}


def apply_operator(f, op):
    try:
        func = _OPERATORS[op]
    except KeyError:
        raise ValueError(f"unknown operator {op!r}; choose from {sorted(_OPERATORS)}") from None
    return func(f)


def stream_from_vorticity(omega):
    """Periodic stream function ``Theta = -Laplacian^{-1} omega``."""
    _check_mean_zero(omega, "Biot-Savart")
    return -inv_laplacian_meanzero(omega)


def biot_savart(omega, mean=None):
    """Divergence-free velocity with curl ``omega``; optional box-mean velocity added."""
    u = perp_grad(stream_from_vorticity(omega))
    if mean is not None:
        u = VectorField(u.u1 + float(mean[0]), u.u2 + float(mean[1]))
    return u


def dealias(f):
    """Zero every coefficient with ``max(|m1|, |m2|) > n/3`` (2/3 rule)."""
    coeffs = np.where(f.grid.dealias_mask, f.hat, 0.0)
    return ScalarField(f.grid, _fft.ifft2(coeffs).real, spectral=coeffs)


def dealiased_product(a, b):
    return dealias(ScalarField(a.grid, a.values * b.values))


# --- local norms ----------------------------------------------------------------


def _check_radius(grid, R):
    if not R > 0:
        raise SupportError(f"ball radius must be positive, got {R}")
    if R > grid.L / 2:
        raise SupportError(
            f"ball radius {R} exceeds half the box ({grid.L / 2}); the periodic mask would overlap itself"
        )


def disk_mask(grid, R, x0=(0.0, 0.0)):
    return grid.distance(x0) <= R


def _lp_from_sum(total, p):
    return float(max(total, 0.0) ** (1.0 / p))


def ball_norm(f, p, R, x0=(0.0, 0.0)):
    """``||f||_{L^p(B^R_{x0})}`` with a sharp periodic disk mask and midpoint rule."""
    grid = field_grid(f)
    _check_radius(grid, R)
    mask = disk_mask(grid, R, x0)
    a = pointwise_abs(f)[mask]
    if np.isinf(p):
        return float(a.max()) if a.size else 0.0
    if p < 1:
        raise ValueError(f"exponent must be >= 1, got {p}")
    return _lp_from_sum(np.sum(a**p) * grid.cell_area, p)


def _disk_kernel_hat(grid, R):
    kernel = (grid.origin_distance <= R).astype(float)
    return _fft.rfft2(kernel)


def convolve_radial(grid, density, kernel):
    """Periodic convolution of ``density`` with a kernel laid out in FFT order."""
    out = _fft.irfft2(_fft.rfft2(density) * _fft.rfft2(kernel), grid.n)
    return out * grid.cell_area


def ball_integrals(f, p, R):
    """``int_{B^R_x} |f|^p`` for every grid centre ``x`` (FFT convolution)."""
    grid = field_grid(f)
    _check_radius(grid, R)
    density = pointwise_abs(f) ** p
    out = _fft.irfft2(_fft.rfft2(density) * _disk_kernel_hat(grid, R), grid.n) * grid.cell_area
    return np.maximum(out, 0.0)


def ball_sup_norms(f, R):
    """``max_{B^R_x} |f|`` for every grid centre, by brute-force shifted maxima."""
    grid = field_grid(f)
    _check_radius(grid, R)
    a = pointwise_abs(f)
    r = int(np.floor(R / grid.h))
    out = np.zeros_like(a)
    for di in range(-r, r + 1):
        for dj in range(-r, r + 1):
            if np.hypot(di, dj) * grid.h <= R:
                np.maximum(out, np.roll(a, (di, dj), axis=(0, 1)), out=out)
    return out


def box_norm(f, p):
    a = pointwise_abs(f)
    if np.isinf(p):
        return float(a.max())
    grid = field_grid(f)
    return _lp_from_sum(np.sum(a**p) * grid.cell_area, p)


def grad_l2_norm_ball(u, R, x0=(0.0, 0.0)):
    """``||grad u||_{L^2(B^R_{x0})}`` for a vector field (Frobenius norm of the Jacobian)."""
    comps = [grad(c) for c in u.components]
    dens = sum(g.u1.values**2 + g.u2.values**2 for g in comps)
    return ball_norm(ScalarField(u.grid, np.sqrt(dens)), 2, R, x0)


# --- snapshots ------------------------------------------------------------------


def write_snapshot(path, f):
    """Write ``f`` as ``ULNSE1 | u32 n | f64 L | n*n f64`` (little-endian, row-major)."""
    grid = f.grid
    payload = SNAPSHOT_MAGIC + struct.pack("<Id", grid.n, grid.L)
    payload += np.ascontiguousarray(f.values, dtype="<f8").tobytes(order="C")
    Path(path).write_bytes(payload)


def read_snapshot(path):
    data = Path(path).read_bytes()
    if data[: len(SNAPSHOT_MAGIC)] != SNAPSHOT_MAGIC:
        raise ValueError(f"{path}: not a ULNSE1 snapshot")
    off = len(SNAPSHOT_MAGIC)
    n, L = struct.unpack_from("<Id", data, off)
    off += struct.calcsize("<Id")
    expected = off + 8 * n * n
    if len(data) != expected:
        raise ValueError(f"{path}: expected {expected} bytes, found {len(data)}")
    values = np.frombuffer(data, dtype="<f8", offset=off).reshape(n, n)
    return ScalarField(Grid(n, L), values)
