"""Named initial-data and forcing generators.

Every generator returns a divergence-free :class:`VectorField`.  Randomness is
drawn from a ``numpy.random.Generator`` supplied by the caller so runs are
reproducible from a seed.
"""

import numpy as np

from .fields import ScalarField, VectorField, biot_savart, perp_grad
from .weights import smooth_step, smooth_step_deriv


def _mode_wavenumber(grid, m):
    return 2 * np.pi * m / grid.L


def taylor_green(grid, amplitude=1.0, m=1):
    """``A (sin kx cos ky, -cos kx sin ky)`` with ``k = 2 pi m / L``; vorticity ``2 A k sin kx sin ky``."""
    k = _mode_wavenumber(grid, m)
    X1, X2 = grid.mesh
    return VectorField.from_arrays(
        grid,
        amplitude * np.sin(k * X1) * np.cos(k * X2),
        -amplitude * np.cos(k * X1) * np.sin(k * X2),
    )


def band_limited_scalar(grid, rng, kmax, spectrum_slope=0.0, zero_mean=True):
    """Random real field with integer modes ``0 < |m|_inf <= kmax``, Nyquist-free.

    Mode amplitudes scale like ``|m|^spectrum_slope`` with uniform random phases.
    The result is normalized to unit grid maximum.
    """
    n = grid.n
    if not 1 <= kmax < n // 2:
        raise ValueError(f"kmax must lie in [1, {n // 2 - 1}], got {kmax}")
    m = grid.index_freq
    M1, M2 = np.meshgrid(m, m, indexing="ij")
    mag = np.hypot(M1, M2)
    keep = (np.maximum(np.abs(M1), np.abs(M2)) <= kmax) & (mag > 0)
    amp = np.zeros((n, n))
    amp[keep] = mag[keep] ** spectrum_slope
    coeffs = amp * (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
    values = np.fft.ifft2(coeffs).real
    if not zero_mean:
        values = values + rng.standard_normal() * np.abs(values).max()
    return ScalarField(grid, values / np.abs(values).max())


def random_band(grid, rng, kmax=4, amplitude=1.0):
    """Smooth random velocity from band-limited vorticity, scaled to ``max|u| = amplitude``."""
    omega = band_limited_scalar(grid, rng, kmax)
    u = biot_savart(omega)
    return u * (amplitude / u.max_abs())


def rough_highfreq(grid, rng, amplitude=1.0, energy_slope=-1.0, kmax=None):
    """Random velocity with energy spectrum ``E(k) ~ k^energy_slope`` up to the dealias cap.

    In 2D the mode amplitude of ``u`` is ``|k|^{(energy_slope - 1)/2}``, so the vorticity
    amplitude is ``|k|^{(energy_slope + 1)/2}``.
    """
    kmax = kmax if kmax is not None else grid.n // 3
    omega = band_limited_scalar(grid, rng, kmax, spectrum_slope=(energy_slope + 1) / 2)
    u = biot_savart(omega)
    return u * (amplitude / u.max_abs())


def _plateau_profile(s):
    """C-infinity bump ``exp(1 - 1/(1 - s^2))`` on ``|s| < 1`` and its derivative."""
    s = np.asarray(s, dtype=float)
    inside = np.abs(s) < 1
    val = np.zeros_like(s)
    der = np.zeros_like(s)
    si = s[inside]
    q = 1.0 - si * si
    val[inside] = np.exp(1.0 - 1.0 / q)
    der[inside] = val[inside] * (-2.0 * si / (q * q))
    return val, der


GAUSS_RATE = 25.0


def _gauss_profile(s):
    """``exp(-25 s^2)`` switched off smoothly on ``0.75 <= s <= 1``.

    The switch acts where the Gaussian is below 1e-6, so the profile is exactly
    compact yet spectrally as well resolved as the Gaussian itself.
    """
    s = np.abs(np.asarray(s, dtype=float))
    t = (s - 0.75) / 0.25
    g = np.exp(-GAUSS_RATE * s * s)
    c = 1.0 - smooth_step(t)
    val = g * c
    der = -2.0 * GAUSS_RATE * s * val - g * smooth_step_deriv(t) / 0.25
    return np.where(s < 1, val, 0.0), np.where(s < 1, der, 0.0)


BUMP_PROFILES = {"plateau": _plateau_profile, "gauss": _gauss_profile}


def bump_stream(grid, centers, radii, weights, profile="gauss"):
    """Stream function ``sum_i w_i b(|x - c_i| / r_i)`` and its analytic ``perp`` gradient."""
    prof = BUMP_PROFILES[profile]
    theta = np.zeros((grid.n, grid.n))
    u1 = np.zeros_like(theta)
    u2 = np.zeros_like(theta)
    for c, r, w in zip(centers, radii, weights):
        d1, d2 = grid.displacement(c)
        rho = np.hypot(d1, d2)
        val, der = prof(rho / r)
        theta += w * val
        with np.errstate(invalid="ignore", divide="ignore"):
            radial = np.where(rho > 0, w * der / (r * rho), 0.0)
        u1 += radial * d2
        u2 -= radial * d1
    return ScalarField(grid, theta), VectorField.from_arrays(grid, u1, u2)


def random_bump(grid, rng, count=3, radius=2.0, spread=None, amplitude=1.0, center=(0.0, 0.0),
                profile="gauss", velocity="analytic"):
    """Compactly supported divergence-free field: perp gradient of a sum of smooth bumps.

    ``profile`` is ``gauss`` (truncated Gaussian, default) or ``plateau``.
    Bumps of radius ``radius`` are centred within ``spread`` of ``center``; the
    support therefore lies in ``B(center, spread + radius)``.

    ``velocity="analytic"`` samples the exact gradient, so the support is exact but
    the spectral divergence is only as small as the resolution allows.
    ``velocity="spectral"`` differentiates the sampled stream function instead:
    divergence-free to roundoff, with a spectrally small spill outside the support.
    """
    if velocity not in ("analytic", "spectral"):
        raise ValueError(f"velocity must be 'analytic' or 'spectral', got {velocity!r}")
    spread = radius if spread is None else spread
    ang = rng.uniform(0, 2 * np.pi, count)
    rad = spread * np.sqrt(rng.uniform(0, 1, count))
    centers = np.stack([center[0] + rad * np.cos(ang), center[1] + rad * np.sin(ang)], axis=1)
    radii = radius * rng.uniform(0.6, 1.0, count)
    weights = rng.choice([-1.0, 1.0], count) * rng.uniform(0.5, 1.0, count)
    theta, u = bump_stream(grid, centers, radii, weights, profile)
    if velocity == "spectral":
        u = perp_grad(theta)
    return u * (amplitude / max(u.max_abs(), 1e-300))


def sinusoidal_nondecaying(grid, amplitude=1.0, m=None):
    """Shear pair ``A (sin k x2, sin k x1)``; bounded, non-decaying, divergence-free.

    With the default ``m`` the wavelength is about ``2 pi`` regardless of box size.
    """
    m = max(1, int(round(grid.L / (2 * np.pi)))) if m is None else m
    k = _mode_wavenumber(grid, m)
    X1, X2 = grid.mesh
    return VectorField.from_arrays(grid, amplitude * np.sin(k * X2), amplitude * np.sin(k * X1))


def stream_to_velocity(theta):
    return perp_grad(theta)


GENERATORS = {
    "taylor_green": taylor_green,
    "random_bump": random_bump,
    "random_band": random_band,
    "rough_highfreq": rough_highfreq,
    "sinusoidal_nondecaying": sinusoidal_nondecaying,
}

RANDOM_GENERATORS = {"random_bump", "random_band", "rough_highfreq"}


def make_field(name, grid, rng=None, **params):
    try:
        gen = GENERATORS[name]
    except KeyError:
        raise ValueError(f"unknown generator {name!r}; choose from {sorted(GENERATORS)}") from None
    if name in RANDOM_GENERATORS:
        if rng is None:
            raise ValueError(f"generator {name!r} needs a random generator")
        return gen(grid, rng, **params)
    return gen(grid, **params)
