"""Weights, cut-offs, weighted and uniformly-local norms, and the functional Z.

Suprema over centres ``x0`` are taken over a coarsened grid of centres and
outer integrals over ``x0`` use the same set with cell-area weighting.  The
default stride is the largest power of two ``s`` with ``s*h <= R/4``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special

from . import _fft
from .errors import BoxTooSmallError, SupportError
from .fields import ScalarField, ball_integrals, ball_norm, field_grid, pointwise_abs

# int_{R^2} dx / (1 + |x|^3)
THETA_L1 = 4 * np.pi**2 / (3 * np.sqrt(3))
# pointwise product bound theta_x0 theta_y0 <= 4 theta_x0(y0) (theta_x0 + theta_y0)
THETA_CONVOLUTION_BOUND = 8 * THETA_L1

KINDS = ("theta", "theta_scaled", "exp", "exp_smooth", "cutoff")
PROFILES = ("cubic", "smooth", "erf")


# --- transition profiles on [0, 1] ----------------------------------------------


def cubic_step(t):
    t = np.clip(t, 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t)


def cubic_step_deriv(t):
    t = np.asarray(t, dtype=float)
    inside = (t > 0) & (t < 1)
    return np.where(inside, 6.0 * t * (1.0 - t), 0.0)


def quintic_step(t):
    t = np.clip(t, 0.0, 1.0)
    return t**3 * (10.0 - 15.0 * t + 6.0 * t * t)


def quintic_step_deriv(t):
    t = np.asarray(t, dtype=float)
    inside = (t > 0) & (t < 1)
    return np.where(inside, 30.0 * t * t * (1.0 - t) ** 2, 0.0)


def _exp_neg_inv(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def smooth_step(t):
    """C-infinity step ``f(t) / (f(t) + f(1 - t))`` with ``f(t) = exp(-1/t)``."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    a = _exp_neg_inv(t)
    b = _exp_neg_inv(1.0 - t)
    return a / (a + b)


def smooth_step_deriv(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = (t > 0) & (t < 1)
    ti = t[inside]
    a = np.exp(-1.0 / ti)
    b = np.exp(-1.0 / (1.0 - ti))
    da = a / ti**2
    db = b / (1.0 - ti) ** 2
    out[inside] = (da * b + a * db) / (a + b) ** 2
    return out


ERF_RATE = 10.0


def erf_step(t):
    """``(erf(c(t - 1/2)) + E) / 2E``, ``E = erf(c/2)``, ``c = 10``; exactly 0 and 1 at the ends.

    The derivative jumps by ``~1e-11`` at the ends, so on coarse grids this profile
    is spectrally better resolved than the C-infinity one of the same width.
    """
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    e = special.erf(ERF_RATE / 2)
    return (special.erf(ERF_RATE * (t - 0.5)) + e) / (2 * e)


def erf_step_deriv(t):
    t = np.asarray(t, dtype=float)
    e = special.erf(ERF_RATE / 2)
    inside = (t > 0) & (t < 1)
    val = ERF_RATE / (np.sqrt(np.pi) * e) * np.exp(-((ERF_RATE * (t - 0.5)) ** 2))
    return np.where(inside, val, 0.0)


_STEPS = {
    "cubic": (cubic_step, cubic_step_deriv),
    "smooth": (smooth_step, smooth_step_deriv),
    "quintic": (quintic_step, quintic_step_deriv),
    "erf": (erf_step, erf_step_deriv),
}


def step_profile(name):
    try:
        return _STEPS[name]
    except KeyError:
        raise ValueError(f"unknown profile {name!r}; choose from {sorted(_STEPS)}") from None


# --- weight families ------------------------------------------------------------


@dataclass(frozen=True)
class WeightFamily:
    """One member of a weight family.

    ``theta``: ``1/(1+|x-x0|^3)``; ``theta_scaled``: ``1/(R^3+|x-x0|^3)``;
    ``exp``: ``exp(-mu|x-x0|)``; ``exp_smooth``: ``exp(-sqrt(1+mu^2|x-x0|^2))``;
    ``cutoff``: ``S(2 - |x-x0|/R)`` with ``S`` the chosen step profile.
    """

    kind: str
    R: float = 1.0
    x0: tuple = (0.0, 0.0)
    mu: float = 0.0
    profile: str = "cubic"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown weight kind {self.kind!r}; choose from {KINDS}")
        if not self.R >= 1:
            raise ValueError(f"weight scale R must be >= 1, got {self.R}")
        if self.profile not in PROFILES:
            raise ValueError(f"unknown cutoff profile {self.profile!r}")
        object.__setattr__(self, "x0", (float(self.x0[0]), float(self.x0[1])))

    def of_distance(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == "theta":
            return 1.0 / (1.0 + r**3)
        if self.kind == "theta_scaled":
            return 1.0 / (self.R**3 + r**3)
        if self.kind == "exp":
            return np.exp(-self.mu * r)
        if self.kind == "exp_smooth":
            return np.exp(-np.sqrt(1.0 + (self.mu * r) ** 2))
        step, _ = _STEPS[self.profile]
        return step(2.0 - r / self.R)

    def radial_derivative(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == "theta":
            return -3.0 * r**2 / (1.0 + r**3) ** 2
        if self.kind == "theta_scaled":
            return -3.0 * r**2 / (self.R**3 + r**3) ** 2
        if self.kind == "exp":
            return -self.mu * np.exp(-self.mu * r)
        if self.kind == "exp_smooth":
            s = np.sqrt(1.0 + (self.mu * r) ** 2)
            return -np.exp(-s) * self.mu**2 * r / s
        _, dstep = _STEPS[self.profile]
        return -dstep(2.0 - r / self.R) / self.R

    def shifted(self, x0):
        return WeightFamily(self.kind, self.R, tuple(x0), self.mu, self.profile)


def theta(x0=(0.0, 0.0)):
    return WeightFamily("theta", x0=x0)


def theta_scaled(R, x0=(0.0, 0.0)):
    return WeightFamily("theta_scaled", R=R, x0=x0)


def cutoff(R, x0=(0.0, 0.0), profile="cubic"):
    return WeightFamily("cutoff", R=R, x0=x0, profile=profile)


def eval_weight(w, x):
    """Pointwise value at ``x`` (shape ``(2,)`` or ``(..., 2)``) in the plane."""
    x = np.asarray(x, dtype=float)
    r = np.hypot(x[..., 0] - w.x0[0], x[..., 1] - w.x0[1])
    val = w.of_distance(r)
    return float(val) if np.ndim(val) == 0 else val


def weight_field(w, grid):
    """The weight sampled on ``grid`` using periodic minimum-image distances."""
    return ScalarField(grid, w.of_distance(grid.distance(w.x0)))


def weight_gradient(w, grid):
    d1, d2 = grid.displacement(w.x0)
    r = np.hypot(d1, d2)
    dr = w.radial_derivative(r)
    with np.errstate(invalid="ignore", divide="ignore"):
        g1 = np.where(r > 0, dr * d1 / r, 0.0)
        g2 = np.where(r > 0, dr * d2 / r, 0.0)
    return g1, g2


def cutoff_gradient_constant(w, grid, floor=1e-12):
    """``max R |grad phi| / phi^{1/2}`` over grid points with ``phi > floor``."""
    if w.kind != "cutoff":
        raise ValueError("gradient bound applies to cutoff weights")
    phi = weight_field(w, grid).values
    g1, g2 = weight_gradient(w, grid)
    mask = phi > floor
    return float(np.max(w.R * np.hypot(g1, g2)[mask] / np.sqrt(phi[mask])))


def cutoff_gradient_bound(profile="cubic"):
    """Sup over ``t`` of ``S'(t)/sqrt(S(t))``, the exact constant for the profile."""
    step, dstep = step_profile(profile)
    t = np.linspace(1e-9, 1.0, 200001)
    s = step(t)
    ok = s > 1e-300
    return float(np.max(dstep(t)[ok] / np.sqrt(s[ok])))


def theta_growth_constant(mu):
    """``C`` with ``theta(x+y) <= C e^{mu|y|} theta(x)``: ``4 sup_r (1+r^3) e^{-mu r}``."""
    if mu <= 0:
        raise ValueError("the polynomial weight has exponential rate mu > 0 only")
    res = optimize.minimize_scalar(
        lambda r: -(np.log1p(r**3) - mu * r), bounds=(0.0, 3.0 / mu + 10.0), method="bounded",
        options={"xatol": 1e-10},
    )
    peak = max(-res.fun, 0.0)
    return 4.0 * math.exp(peak)


# --- estimate reports -----------------------------------------------------------


@dataclass
class EstimateReport:
    name: str
    lhs: float
    rhs: float
    ratio: float = field(default=None)
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.lhs = float(self.lhs)
        self.rhs = float(self.rhs)
        if self.ratio is None:
            if self.rhs > 0:
                self.ratio = self.lhs / self.rhs
            elif self.lhs == 0:
                self.ratio = 0.0
            else:
                raise ValueError(f"{self.name}: rhs vanishes while lhs={self.lhs:g}")
        self.ratio = float(self.ratio)
        if not np.isfinite(self.ratio):
            raise ValueError(f"{self.name}: non-finite ratio")

    def to_csv_row(self):
        row = [self.name, repr(self.lhs), repr(self.rhs), repr(self.ratio)]
        row += [f"{k}={_fmt_param(v)}" for k, v in self.params.items()]
        return row

    @classmethod
    def from_csv_row(cls, row):
        name, lhs, rhs, ratio, *rest = row
        params = {}
        for item in rest:
            key, _, value = item.partition("=")
            params[key] = _parse_param(value)
        return cls(name, float(lhs), float(rhs), float(ratio), params)


def _fmt_param(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (tuple, list, np.ndarray)):
        return ";".join(_fmt_param(x) for x in v)
    return str(v)


def _parse_param(s):
    if ";" in s:
        return tuple(_parse_param(x) for x in s.split(";"))
    for cast in (int, float):
        try:
            return cast(s)
        except ValueError:
            pass
    return s


# --- norms --------------------------------------------------------------------


def weighted_norm(f, w, p):
    """``(int w |f|^p)^{1/p}`` by box quadrature."""
    if not 1 <= p < np.inf:
        raise ValueError(f"weighted norms need 1 <= p < inf, got {p}")
    grid = field_grid(f)
    wv = weight_field(w, grid).values
    total = np.sum(wv * pointwise_abs(f) ** p) * grid.cell_area
    return float(total ** (1.0 / p))


def default_stride(grid, R):
    s = 1
    while 2 * s * grid.h <= R / 4:
        s *= 2
    return min(s, grid.n)


def center_indices(grid, R, stride=None):
    s = default_stride(grid, R) if stride is None else int(stride)
    if s < 1 or grid.n % s:
        raise ValueError(f"stride must divide n={grid.n}, got {s}")
    return slice(0, grid.n, s), s


def _explicit_centers(centers):
    c = np.asarray(centers, dtype=float)
    if c.ndim != 2 or c.shape[1] != 2 or len(c) == 0:
        raise ValueError("centres must be a nonempty (k, 2) array")
    return c


def ul_norm(f, p, R, centers=None, stride=None):
    """``sup_{x0} ||f||_{L^p(B^R_{x0})}`` over sampled centres.

    ``centers`` may be an explicit ``(k, 2)`` array; otherwise the grid coarsened
    by ``stride`` (default: power of two nearest below ``R/4``) is used.
    """
    grid = field_grid(f)
    if centers is not None:
        return max(ball_norm(f, p, R, c) for c in _explicit_centers(centers))
    sl, s = center_indices(grid, R, stride)
    if np.isinf(p):
        if s * grid.h <= R:
            return float(pointwise_abs(f).max())
        return max(ball_norm(f, p, R, grid.point((i, j)))
                   for i in range(0, grid.n, s) for j in range(0, grid.n, s))
    vals = ball_integrals(f, p, R)[sl, sl]
    return float(vals.max() ** (1.0 / p))


def cutoff_integrals(f, R, profile="cubic", p=2):
    """``int phi_{R,x} |f|^p`` for every grid centre ``x`` (FFT convolution)."""
    grid = field_grid(f)
    if 2 * R > grid.L / 2:
        raise SupportError(f"cut-off support 2R={2 * R} exceeds half the box ({grid.L / 2})")
    kernel = cutoff(R, profile=profile).of_distance(grid.origin_distance)
    dens = pointwise_abs(f) ** p
    out = _fft.irfft2(_fft.rfft2(dens) * _fft.rfft2(kernel), grid.n) * grid.cell_area
    return np.maximum(out, 0.0)


def _outer_weights(grid, R, y0, sl, s):
    w = theta_scaled(R, y0)
    return w.of_distance(grid.distance(y0))[sl, sl] * (s * grid.h) ** 2


def z_functional(u, R, y0=(0.0, 0.0), stride=None, profile="cubic"):
    """``Z_{R,y0}(u) = int theta_{R,y0}(x0) ||u||^2_{L^2_{phi_{R,x0}}} dx0``."""
    if R < 1:
        raise ValueError("Z needs R >= 1")
    grid = field_grid(u)
    sl, s = center_indices(grid, R, stride)
    inner = cutoff_integrals(u, R, profile)[sl, sl]
    return float(np.sum(_outer_weights(grid, R, y0, sl, s) * inner))


def z_bracket(u, R, y0=(0.0, 0.0), stride=None):
    """Comparison quantity ``int theta_{R,y0}(y) ||u||^2_{L^2(B^R_y)} dy`` for Z."""
    grid = field_grid(u)
    sl, s = center_indices(grid, R, stride)
    inner = ball_integrals(u, 2, R)[sl, sl]
    return float(np.sum(_outer_weights(grid, R, y0, sl, s) * inner))


def weighted_ball_integral(f, p, R, w, stride=1):
    """``int w(x0) ||f||^p_{L^p(B^R_{x0})} dx0`` over the grid of centres."""
    grid = field_grid(f)
    sl, s = center_indices(grid, R, stride)
    inner = ball_integrals(f, p, R)[sl, sl]
    wv = weight_field(w, grid).values[sl, sl]
    return float(np.sum(wv * inner) * (s * grid.h) ** 2)


def theta_ball_integral(f, p, R, x0, stride=1):
    """``int theta_{R,x0}(x) ||f||_{L^p(B^R_x)} dx`` (norm, not p-th power, inside)."""
    grid = field_grid(f)
    sl, s = center_indices(grid, R, stride)
    inner = ball_integrals(f, p, R)[sl, sl] ** (1.0 / p)
    wv = theta_scaled(R, x0).of_distance(grid.distance(x0))[sl, sl]
    return float(np.sum(wv * inner) * (s * grid.h) ** 2)


# --- weight lemma ---------------------------------------------------------------


def theta_convolution_check(R, x0, y0, rho=None, h=None, tail_fraction=0.01):
    """Measure ``int theta_{R,x0} theta_{R,y0}`` against ``R^{-1} theta_{R,x0}(y0)``.

    Quadrature is on a square of half-width ``rho`` centred at ``x0`` (midpoint
    rule, no periodic wrap).  When ``|x0 - y0| <= rho/2`` the mass outside the
    inscribed disk is at most ``4 pi / rho^4``; it must stay below
    ``tail_fraction * lhs``.  By default ``rho`` is chosen from a rigorous lower
    bound of the lhs so that this holds.
    """
    x0 = np.asarray(x0, dtype=float)
    y0 = np.asarray(y0, dtype=float)
    D = float(np.hypot(*(x0 - y0)))
    if rho is None:
        # points of B(x0, R) give lhs >= pi R^2 / (2 R^3 (R^3 + (R + D)^3))
        lower = np.pi * R**2 / (2 * R**3 * (R**3 + (R + D) ** 3))
        rho = max(2 * D, 4 * R, 1.05 * (4 * np.pi / (tail_fraction * lower)) ** 0.25)
    h = R / 16 if h is None else h
    m = int(np.ceil(2 * rho / h))
    if m > 4096:
        raise BoxTooSmallError(f"required quadrature box (half-width {rho:.3g}) is too large")
    s = -rho + h * (np.arange(m) + 0.5)
    total = 0.0
    for start in range(0, m, 256):
        d1 = s[start:start + 256, None]
        r0 = np.hypot(d1, s[None, :])
        r1 = np.hypot(d1 + x0[0] - y0[0], s[None, :] + x0[1] - y0[1])
        total += np.sum(1.0 / ((R**3 + r0**3) * (R**3 + r1**3)))
    lhs = float(total * h * h)
    tail = 4 * np.pi / rho**4
    if D > rho / 2 or tail >= tail_fraction * lhs:
        raise BoxTooSmallError(
            f"tail bound {tail:.3e} is not below {tail_fraction:.0%} of the integral {lhs:.3e}; "
            "enlarge the quadrature box"
        )
    rhs = 1.0 / (R * (R**3 + D**3))
    return EstimateReport(
        "theta_convolution", lhs, rhs,
        params={"R": float(R), "x0": tuple(x0), "y0": tuple(y0), "rho": float(rho), "tail_bound": tail},
    )
