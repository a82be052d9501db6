"""Tests for stream functions, truncation and the divergence check."""

import numpy as np
import pytest

from ulnse import divfree as D
from ulnse.errors import NotDivergenceFreeError, SupportError
from ulnse.fields import Grid, ScalarField, VectorField, biot_savart, perp_grad
from ulnse.generators import band_limited_scalar, random_bump, sinusoidal_nondecaying
from ulnse.weights import ul_norm


def rel_l2(a, b):
    return np.sqrt(np.sum((a - b).magnitude() ** 2) / np.sum(b.magnitude() ** 2))


@pytest.fixture(scope="module")
def fine():
    return Grid(1024, 64.0)


@pytest.fixture(scope="module")
def trunc_grid():
    return Grid(1024, 160.0)


class TestBasePoints:
    def test_in_unit_disk_and_fixed(self):
        pts = D.base_points()
        assert pts.shape == (16, 2)
        assert np.all(np.hypot(pts[:, 0], pts[:, 1]) < 1)
        np.testing.assert_array_equal(pts, D.base_points())
        assert len({tuple(p) for p in pts}) == 16


class TestStreamFunction:
    def test_zero(self):
        g = Grid(32, 2 * np.pi)
        assert np.abs(D.stream_function(VectorField.zeros(g)).values).max() == 0.0

    def test_taylor_green_potential(self):
        g = Grid(64, 2 * np.pi)
        X1, X2 = g.mesh
        th = np.sin(X1) * np.sin(X2)
        got = D.stream_function(perp_grad(ScalarField(g, th)))
        # th has zero box mean, so the normalizations agree
        assert np.abs(got.values - th).max() / np.abs(th).max() < 1e-3

    def test_single_base_point_recovers_potential(self):
        g = Grid(128, 2 * np.pi)
        X1, X2 = g.mesh
        th = np.cos(X1) + np.sin(2 * X2) * np.cos(X1)
        u = perp_grad(ScalarField(g, th))
        base = (0.25, -0.4)
        got = D.path_integral(u, base)
        ref = th - (np.cos(0.25) + np.sin(-0.8) * np.cos(0.25))
        assert np.abs(got - ref).max() < 2e-3

    def test_roundtrip_on_compact_bumps(self, fine):
        rng = np.random.default_rng(0)
        for _ in range(3):
            u = random_bump(fine, rng, count=3, radius=12.0, spread=4.0, velocity="spectral")
            back = perp_grad(D.stream_function(u))
            assert rel_l2(back, u) < 1e-3

    def test_agrees_with_spectral_stream(self, fine):
        u = random_bump(fine, np.random.default_rng(1), count=2, radius=12.0, spread=4.0, velocity="spectral")
        path = D.stream_function(u).values
        spec = D.spectral_stream(u).values
        spec = spec - spec.mean()
        assert np.abs(path - spec).max() < 1e-3 * np.abs(spec).max()

    def test_rejects_nonsolenoidal(self):
        g = Grid(64, 2 * np.pi)
        X1, _ = g.mesh
        u = VectorField.from_arrays(g, np.sin(X1), np.zeros_like(X1))
        with pytest.raises(NotDivergenceFreeError):
            D.stream_function(u)

    def test_mean_flow_gives_linear_growth(self):
        g = Grid(256, 64.0)
        c = (0.7, -0.3)
        s = sinusoidal_nondecaying(g, amplitude=0.5)
        u = VectorField.from_arrays(g, s.u1.values + c[0], s.u2.values + c[1])
        th = D.stream_function(u)
        rng = np.random.default_rng(2)
        centers = rng.uniform(-28, 28, (60, 2))
        prof = D.linear_growth_profile(th, centers)
        assert np.all(np.isfinite(prof))
        # Theta = c1 x2 - c2 x1 + (cos k x1 - cos k x2) A/k + const, so the ratio is
        # bounded by sqrt(pi) (|c| + 2A/k + |const|) up to the unit-ball offset
        X1, X2 = g.mesh
        rest = th.values - (c[0] * X2 - c[1] * X1)
        rest -= rest.mean()
        k = 2 * np.pi * round(g.L / (2 * np.pi)) / g.L
        assert np.abs(rest).max() <= 2 * 0.5 / k * 1.01 + 1e-2
        assert prof.max() <= np.sqrt(np.pi) * (np.hypot(*c) * 2 + 2 * 0.5 / k + 1e-2)

    def test_decay_transfer_for_compact_data(self):
        g = Grid(256, 64.0)
        u = random_bump(g, np.random.default_rng(3), count=2, radius=4.0, spread=2.0, velocity="spectral")
        th = D.stream_function(u)
        rng = np.random.default_rng(4)
        ang = rng.uniform(0, 2 * np.pi, 200)
        rad = rng.uniform(0, 30, 200)
        centers = np.stack([rad * np.cos(ang), rad * np.sin(ang)], axis=1)
        prof = D.linear_growth_profile(th, centers)
        bins = np.arange(0, 31, 5)
        binmax = [prof[(rad >= lo) & (rad < hi)].max() for lo, hi in zip(bins[:-1], bins[1:])]
        # upper envelope from outside in; it must fall well below the support value
        env = np.maximum.accumulate(binmax[::-1])[::-1]
        assert env[1] < 0.01 * env[0]
        assert env[-1] <= env[1]


class TestTruncation:
    @pytest.mark.parametrize("N", [8.0, 16.0, 32.0])
    def test_truncation_properties(self, trunc_grid, N):
        u = sinusoidal_nondecaying(trunc_grid)
        uN = D.truncate_divfree(u, N)
        r = trunc_grid.distance((0.0, 0.0))
        assert D.divfree_check(uN) <= 1e-8
        assert np.abs((uN - u).magnitude()[r <= N]).max() <= 1e-10
        assert np.all(uN.magnitude()[r > 2 * N] == 0.0)

    def test_amplification_stable_in_N(self, trunc_grid):
        u = sinusoidal_nondecaying(trunc_grid)
        base = ul_norm(u, 2, 1.0)
        amp = [ul_norm(D.truncate_divfree(u, N), 2, 1.0) / base for N in (8.0, 16.0, 32.0)]
        for a in amp:
            assert abs(a / amp[0] - 1) <= 0.2

    def test_projection_on_range(self, fine):
        u = random_bump(fine, np.random.default_rng(5), count=3, radius=8.0, spread=2.0)
        assert D.divfree_check(u) <= 1e-8
        # support lies in B(0, 10); truncation at any N >= 10 is the identity
        for N in (10.0, 15.0):
            assert (D.truncate_divfree(u, N) - u).max_abs() <= 1e-10

    def test_mean_velocity_handled(self):
        g = Grid(512, 64.0)
        X1, _ = g.mesh
        u = VectorField.from_arrays(g, np.full_like(X1, 1.5), np.zeros_like(X1))
        uN = D.truncate_divfree(u, 6.0)
        r = g.distance((0.0, 0.0))
        assert np.abs(uN.u1.values[r <= 6.0] - 1.5).max() == 0.0
        assert D.divfree_check(uN) <= 1e-8

    def test_box_too_small(self):
        g = Grid(64, 32.0)
        with pytest.raises(SupportError):
            D.truncate_divfree(VectorField.zeros(g), 8.0)


class TestDivfreeCheck:
    def test_biot_savart_output(self):
        g = Grid(64, 2 * np.pi)
        u = biot_savart(band_limited_scalar(g, np.random.default_rng(6), 10))
        assert D.divfree_check(u) <= 1e-10

    def test_windowed_linear_field(self):
        g = Grid(128, 32.0)
        X1, X2 = g.mesh
        win = np.exp(-(X1**2 + X2**2) / 20)
        u = VectorField.from_arrays(g, X1 * win, np.zeros_like(X1))
        assert D.divfree_check(u) > 0.1
