"""Tests for grids, spectral operators and ball norms."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ulnse import fields as F
from ulnse.errors import IllPosedInversionError, SupportError
from ulnse.generators import band_limited_scalar, taylor_green

TWO_PI = 2 * np.pi


@pytest.fixture
def grid64():
    return F.Grid(64, TWO_PI)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


class TestGrid:
    def test_spacing_and_points(self):
        g = F.Grid(16, 4.0)
        assert g.h == 0.25
        assert g.x[0] == -2.0
        assert np.isclose(g.x[-1], 2.0 - 0.25)

    @pytest.mark.parametrize("n", [4, 12, 0, -8])
    def test_bad_sizes(self, n):
        with pytest.raises(ValueError):
            F.Grid(n, 1.0)

    def test_bad_length(self):
        with pytest.raises(ValueError):
            F.Grid(16, -1.0)

    def test_min_image_distance(self):
        g = F.Grid(16, 4.0)
        d = g.distance((1.75, 0.0))
        # grid point x1=-2 is 0.25 away through the periodic seam
        assert np.isclose(d[0, 8], 0.25)


class TestFieldContainers:
    def test_values_read_only(self, grid64):
        f = F.ScalarField.zeros(grid64)
        with pytest.raises(ValueError):
            f.values[0, 0] = 1.0

    def test_non_finite_rejected(self, grid64):
        a = np.zeros((64, 64))
        a[3, 3] = np.nan
        with pytest.raises(ValueError):
            F.ScalarField(grid64, a)

    def test_shape_checked(self, grid64):
        with pytest.raises(ValueError):
            F.ScalarField(grid64, np.zeros((32, 32)))

    def test_vector_grids_must_match(self, grid64):
        other = F.Grid(32, TWO_PI)
        with pytest.raises(ValueError):
            F.VectorField(F.ScalarField.zeros(grid64), F.ScalarField.zeros(other))

    def test_tensor_outer_is_symmetric(self, grid64):
        u = taylor_green(grid64)
        w = F.TensorField.outer(u)
        assert np.array_equal(w.w12.values, w.w21.values)


class TestSpectralTransform:
    def test_constant_field(self, grid64):
        f = F.ScalarField(grid64, np.full((64, 64), 2.5))
        hat = F.spectral_transform(f).spectral
        assert np.isclose(hat[0, 0], 2.5 * 64**2)
        rest = hat.copy()
        rest[0, 0] = 0
        assert np.abs(rest).max() < 1e-9

    def test_single_sine_mode(self, grid64):
        f = F.ScalarField.from_function(grid64, lambda x, y: np.sin(TWO_PI * x / grid64.L))
        hat = F.spectral_transform(f).spectral
        big = np.argwhere(np.abs(hat) > 1e-8 * 64**2)
        assert sorted(map(tuple, big)) == [(1, 0), (63, 0)]

    def test_roundtrip(self, grid64, rng):
        f = F.ScalarField(grid64, rng.standard_normal((64, 64)))
        back = F.spectral_transform(F.spectral_transform(f, "forward"), "inverse")
        assert np.abs(back.values - f.values).max() <= 1e-12 * np.abs(f.values).max()

    def test_inverse_needs_cache(self, grid64):
        with pytest.raises(ValueError):
            F.spectral_transform(F.ScalarField.zeros(grid64), "inverse")

    def test_inverse_rejects_non_finite_spectrum(self, grid64):
        f = F.ScalarField.zeros(grid64)
        bad = np.zeros((64, 64), complex)
        bad[1, 1] = np.inf
        with pytest.raises(ValueError):
            F.spectral_transform(F.ScalarField(grid64, f.values, spectral=bad), "inverse")

    def test_parseval(self, grid64, rng):
        f = F.ScalarField(grid64, rng.standard_normal((64, 64)))
        phys = np.sum(f.values**2)
        spec = np.sum(np.abs(f.hat) ** 2) / 64**2
        assert abs(phys - spec) <= 1e-12 * phys


class TestOperators:
    def test_laplacian_eigenfunction(self, grid64):
        th = F.ScalarField.from_function(grid64, lambda x, y: np.sin(x) * np.sin(y))
        lap = F.apply_operator(th, "laplacian")
        assert np.abs(lap.values + 2 * th.values).max() < 1e-12

    def test_taylor_green_div_rot(self, grid64):
        u = taylor_green(grid64)
        X, Y = grid64.mesh
        assert F.apply_operator(u, "div").max_abs() < 1e-12
        assert np.abs(F.apply_operator(u, "rot").values - 2 * np.sin(X) * np.sin(Y)).max() < 1e-12

    def test_inverse_laplacian(self, grid64):
        X, Y = grid64.mesh
        f = F.ScalarField(grid64, -2 * np.sin(X) * np.sin(Y))
        out = F.apply_operator(f, "inv_laplacian_meanzero")
        assert np.abs(out.values - np.sin(X) * np.sin(Y)).max() < 1e-12

    def test_inverse_laplacian_rejects_mean(self, grid64):
        f = F.ScalarField(grid64, np.ones((64, 64)))
        with pytest.raises(IllPosedInversionError):
            F.apply_operator(f, "inv_laplacian_meanzero")

    def test_grad_of_sine(self, grid64):
        f = F.ScalarField.from_function(grid64, lambda x, y: np.sin(2 * x) * np.cos(y))
        g = F.apply_operator(f, "grad")
        X, Y = grid64.mesh
        assert np.abs(g.u1.values - 2 * np.cos(2 * X) * np.cos(Y)).max() < 1e-12
        assert np.abs(g.u2.values + np.sin(2 * X) * np.sin(Y)).max() < 1e-12

    def test_unknown_operator(self, grid64):
        with pytest.raises(ValueError):
            F.apply_operator(F.ScalarField.zeros(grid64), "curlcurl")

    def test_rot_of_grad_vanishes(self, grid64, rng):
        f = band_limited_scalar(grid64, rng, 10)
        assert F.rot(F.grad(f)).max_abs() < 1e-10


class TestBiotSavart:
    def test_taylor_green(self, grid64):
        X, Y = grid64.mesh
        u = F.biot_savart(F.ScalarField(grid64, 2 * np.sin(X) * np.sin(Y)))
        tg = taylor_green(grid64)
        assert np.abs(u.u1.values - tg.u1.values).max() < 1e-12
        assert np.abs(u.u2.values - tg.u2.values).max() < 1e-12

    def test_zero(self, grid64):
        u = F.biot_savart(F.ScalarField.zeros(grid64))
        assert u.max_abs() == 0.0

    def test_nonzero_mean_rejected(self, grid64):
        with pytest.raises(IllPosedInversionError):
            F.biot_savart(F.ScalarField(grid64, np.full((64, 64), 0.1)))

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 2**31 - 1), kmax=st.integers(1, 30))
    def test_roundtrip_and_solenoidal(self, seed, kmax):
        g = F.Grid(64, 10.0)
        om = band_limited_scalar(g, np.random.default_rng(seed), kmax)
        u = F.biot_savart(om)
        assert np.abs(F.rot(u).values - om.values).max() <= 1e-10 * om.max_abs()
        assert F.div(u).max_abs() <= 1e-10

    def test_mean_velocity_added(self, grid64):
        u = F.biot_savart(F.ScalarField.zeros(grid64), mean=(1.5, -2.0))
        assert np.allclose(u.mean(), [1.5, -2.0])


class TestDealias:
    def test_low_modes_unchanged(self, grid64, rng):
        f = band_limited_scalar(grid64, rng, 64 // 3)
        assert np.abs(F.dealias(f).values - f.values).max() < 1e-13

    def test_high_mode_removed(self, grid64):
        k = 64 // 2 - 1
        f = F.ScalarField.from_function(grid64, lambda x, y: np.cos(k * x) + 0 * y)
        assert F.dealias(f).max_abs() < 1e-13

    def test_product_identity(self, grid64):
        s = F.ScalarField.from_function(grid64, lambda x, y: np.sin(x) + 0 * y)
        prod = F.dealiased_product(s, s)
        X, _ = grid64.mesh
        assert np.abs(prod.values - (1 - np.cos(2 * X)) / 2).max() < 1e-12


class TestBallNorm:
    def test_constant_l2(self):
        errs = []
        for n in (64, 128, 256):
            g = F.Grid(n, 16.0)
            f = F.ScalarField(g, np.full((n, n), -3.0))
            exact = 3.0 * np.sqrt(np.pi * 4.0**2)
            errs.append(abs(F.ball_norm(f, 2, 4.0) - exact) / exact)
        assert errs[-1] < 0.02
        assert errs[-1] < errs[0]

    def test_constant_sup(self, grid64):
        f = F.ScalarField(grid64, np.full((64, 64), -3.0))
        assert F.ball_norm(f, np.inf, 1.0, (0.3, -1.0)) == 3.0

    def test_gaussian_monotone_in_radius(self, grid64):
        f = F.ScalarField.from_function(grid64, lambda x, y: np.exp(-(x**2 + y**2)))
        vals = [F.ball_norm(f, 2, R) for R in np.linspace(0.1, np.pi, 40)]
        assert np.all(np.diff(vals) >= 0)

    def test_radius_too_large(self, grid64):
        with pytest.raises(SupportError):
            F.ball_norm(F.ScalarField.zeros(grid64), 2, np.pi + 0.01)

    def test_convergence_to_inscribed_disk(self):
        # smooth field; exact integral of f^2 over the radius-L/2 disk by polar quadrature
        L = TWO_PI
        func = lambda x, y: np.exp(-(x**2 + y**2) / 2) * (1 + 0.3 * np.sin(x))
        from scipy import integrate

        exact, _ = integrate.dblquad(
            lambda r, t: func(r * np.cos(t), r * np.sin(t)) ** 2 * r, 0, TWO_PI, 0, L / 2,
            epsabs=1e-13, epsrel=1e-13,
        )
        hs, errs = [], []
        for n in (16, 32, 64, 128):
            g = F.Grid(n, L)
            val = F.ball_norm(F.ScalarField.from_function(g, func), 2, L / 2 - g.h) ** 2
            hs.append(g.h)
            errs.append(abs(val - exact))
        order = np.polyfit(np.log(hs), np.log(errs), 1)[0]
        assert order >= 1.0

    def test_all_centres_match_direct(self, rng):
        g = F.Grid(32, 8.0)
        f = F.ScalarField(g, rng.standard_normal((32, 32)))
        all_c = F.ball_integrals(f, 2, 1.7)
        for idx in [(0, 0), (5, 17), (31, 2)]:
            direct = F.ball_norm(f, 2, 1.7, g.point(idx)) ** 2
            assert np.isclose(all_c[idx], direct, rtol=1e-10)
        sup_all = F.ball_sup_norms(f, 1.7)
        assert np.isclose(sup_all[5, 17], F.ball_norm(f, np.inf, 1.7, g.point((5, 17))))

    @settings(max_examples=25, deadline=None)
    @given(lam=st.one_of(st.just(0.0), st.floats(1e-6, 50), st.floats(-50, -1e-6)), p=st.sampled_from([1, 1.5, 2, 3, np.inf]))
    def test_absolute_homogeneity(self, lam, p):
        g = F.Grid(16, 4.0)
        f = F.ScalarField.from_function(g, lambda x, y: np.cos(x) * np.sin(2 * y) + 0.2)
        a = F.ball_norm(f * lam, p, 1.5, (0.5, 0.25))
        b = abs(lam) * F.ball_norm(f, p, 1.5, (0.5, 0.25))
        assert np.isclose(a, b, rtol=1e-12)


class TestSnapshot:
    def test_roundtrip(self, tmp_path, rng):
        g = F.Grid(16, 3.5)
        f = F.ScalarField(g, rng.standard_normal((16, 16)))
        path = tmp_path / "f.bin"
        F.write_snapshot(path, f)
        raw = path.read_bytes()
        assert raw[:6] == b"ULNSE1"
        assert len(raw) == 6 + 4 + 8 + 8 * 256
        back = F.read_snapshot(path)
        assert back.grid == g
        assert np.array_equal(back.values, f.values)

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "x.bin"
        p.write_bytes(b"NOTSNAP" + bytes(20))
        with pytest.raises(ValueError):
            F.read_snapshot(p)

    def test_truncated(self, tmp_path):
        g = F.Grid(8, 1.0)
        p = tmp_path / "t.bin"
        F.write_snapshot(p, F.ScalarField.zeros(g))
        p.write_bytes(p.read_bytes()[:-8])
        with pytest.raises(ValueError):
            F.read_snapshot(p)
