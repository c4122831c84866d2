import math

import numpy as np
import pytest

from epi_lab import phase_space as ps
from epi_lab.errors import DomainError, GridTooSmallError, NegativeTimeError, SpacingMismatchError


def gaussian_mixture(weights, ts, centers, spacing, extent):
    """Mixture of isotropic Gaussians sampled on one grid (test helper)."""
    half = int(math.ceil(extent / spacing)) + 1
    xs = spacing * (np.arange(2 * half + 1) - half)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    vals = np.zeros_like(X)
    for w, t, (cx, cy) in zip(weights, ts, centers):
        vals += w * np.exp(-((X - cx) ** 2 + (Y - cy) ** 2) / (2 * t)) / t
    f = ps.GridPdf((-half * spacing, -half * spacing), spacing, vals)
    return f.normalized()


class TestGaussianPdf:
    @pytest.mark.parametrize("t", [0.2, 1.0, 2.5])
    def test_mass_entropy_energy(self, t):
        f = ps.gaussian_pdf(t)
        f.validate()
        assert f.mass() == pytest.approx(1.0, abs=1e-12)
        assert ps.shannon_entropy(f) == pytest.approx(1.0 + math.log(t), abs=1e-9)
        assert ps.energy(f) == pytest.approx(2.0 * t, rel=1e-9)

    def test_moments(self):
        f = ps.gaussian_pdf(0.8, center=(0.3, -0.7))
        mean, cov = ps.moments(f)
        assert mean == pytest.approx([0.3, -0.7], abs=1e-10)
        assert np.allclose(cov, 0.8 * np.eye(2), atol=1e-9)

    def test_energy_parallel_axis(self):
        f0 = ps.gaussian_pdf(0.5)
        f1 = f0.displaced((1.2, 0.0))
        assert ps.energy(f1) == pytest.approx(ps.energy(f0) + 1.2 ** 2, rel=1e-9)

    def test_extent_too_small(self):
        with pytest.raises(GridTooSmallError):
            ps.gaussian_pdf(1.0, extent=5.0)

    def test_grid_cap(self):
        with pytest.raises(GridTooSmallError):
            ps.gaussian_pdf(1.0, spacing=1e-4)

    def test_domain(self):
        with pytest.raises(DomainError):
            ps.gaussian_pdf(0.0)


class TestEntropyAndMoments:
    def test_uniform_square(self):
        f = ps.uniform_square_pdf(3.0, 0.05)
        m = (3.0) ** 2 / (2 * math.pi)
        assert ps.shannon_entropy(f) == pytest.approx(math.log(m), rel=1e-9)

    def test_delta_entropy(self):
        f = ps.delta_pdf(0.1)
        assert ps.shannon_entropy(f) == pytest.approx(math.log(0.1 ** 2 / (2 * math.pi)))

    def test_displacement_entropy_bit_identical(self):
        f = ps.gaussian_pdf(0.6)
        shifted = f.displaced((0.35, -1.07))
        assert ps.shannon_entropy(shifted) == ps.shannon_entropy(f)

    def test_mixture_covariance(self):
        c = 0.9
        f = gaussian_mixture([0.5, 0.5], [1.0, 1.0], [(c, 0.0), (-c, 0.0)], 0.1, 9.5)
        _, cov = ps.moments(f)
        expected = np.eye(2) + np.array([[c ** 2, 0.0], [0.0, 0.0]])
        assert np.allclose(cov, expected, atol=1e-6)


class TestConvolution:
    def test_gaussian_identity(self):
        s, t = 0.6, 0.9
        out = ps.classical_convolution(ps.gaussian_pdf(s, spacing=0.1), ps.gaussian_pdf(t, spacing=0.1))
        xs, ys = out.axes()
        rsq = xs[:, None] ** 2 + ys[None, :] ** 2
        exact = np.exp(-rsq / (2 * (s + t))) / (s + t)
        assert np.abs(out.values - exact).max() <= 1e-6
        assert out.mass() == pytest.approx(1.0, abs=1e-12)

    def test_covariances_add(self):
        g = gaussian_mixture([0.7, 0.3], [0.4, 0.8], [(0.5, 0), (-0.3, 0.2)], 0.1, 8.0)
        f = ps.gaussian_pdf(0.5, spacing=0.1)
        out = ps.classical_convolution(g, f)
        _, cg = ps.moments(g)
        _, cf = ps.moments(f)
        _, cout = ps.moments(out)
        assert np.allclose(cout, cg + cf, atol=1e-6)

    def test_near_delta_neutral(self):
        f = ps.gaussian_pdf(0.5, spacing=0.1)
        out = ps.classical_convolution(f, ps.delta_pdf(0.1))
        assert ps.shannon_entropy(out) == pytest.approx(ps.shannon_entropy(f), abs=1e-12)

    def test_spacing_mismatch(self):
        with pytest.raises(SpacingMismatchError):
            ps.classical_convolution(ps.gaussian_pdf(0.5, spacing=0.1), ps.gaussian_pdf(0.5, spacing=0.11))


class TestHeatFlow:
    def test_zero_time(self):
        f = ps.gaussian_pdf(0.5)
        out = ps.classical_heat_flow(f, 0.0)
        assert np.array_equal(out.values, f.values)

    def test_gaussian_flows_to_gaussian(self):
        out = ps.classical_heat_flow(ps.gaussian_pdf(0.5, spacing=0.1), 0.7)
        assert ps.shannon_entropy(out) == pytest.approx(1.0 + math.log(1.2), abs=1e-8)

    def test_semigroup(self):
        f = gaussian_mixture([0.6, 0.4], [0.5, 1.1], [(0.4, -0.2), (-0.6, 0.5)], 0.1, 9.0)
        one = ps.classical_heat_flow(ps.classical_heat_flow(f, 0.3), 0.5)
        two = ps.classical_heat_flow(f, 0.8)
        pad = (one.size - two.size) // 2
        inner = one.values[pad : pad + two.size, pad : pad + two.size] if pad > 0 else one.values
        assert np.abs(inner - two.values).max() <= 1e-6

    def test_entropy_nondecreasing(self):
        rng = np.random.default_rng(4)
        for _ in range(3):
            ts = rng.uniform(0.3, 1.2, size=2)
            cs = rng.uniform(-0.8, 0.8, size=(2, 2))
            f = gaussian_mixture([0.5, 0.5], ts, [tuple(c) for c in cs], 0.1, 10.0)
            s_prev = ps.shannon_entropy(f)
            for t in (0.2, 0.5, 1.0):
                s_t = ps.shannon_entropy(ps.classical_heat_flow(f, t))
                assert s_t >= s_prev - 1e-12
                s_prev = s_t

    def test_negative_time(self):
        with pytest.raises(NegativeTimeError):
            ps.classical_heat_flow(ps.gaussian_pdf(0.5), -1.0)


class TestClassicalEpi:
    def test_randomized_mixtures(self):
        rng = np.random.default_rng(9)
        for _ in range(3):
            ts = rng.uniform(0.3, 1.0, size=4)
            cs = rng.uniform(-0.7, 0.7, size=(4, 2))
            g = gaussian_mixture([0.5, 0.5], ts[:2], [tuple(c) for c in cs[:2]], 0.1, 9.0)
            f = gaussian_mixture([0.4, 0.6], ts[2:], [tuple(c) for c in cs[2:]], 0.1, 9.0)
            out = ps.classical_convolution(g, f)
            margin = (
                math.exp(ps.shannon_entropy(out))
                - math.exp(ps.shannon_entropy(g))
                - math.exp(ps.shannon_entropy(f))
            )
            assert margin >= -1e-3

    def test_scaling_bound(self):
        f = gaussian_mixture([0.5, 0.5], [0.6, 1.0], [(0.5, 0.0), (-0.5, 0.3)], 0.15, 9.0)
        _, cov = ps.moments(f)
        sigma_sq = float(np.linalg.eigvalsh(cov).max())
        for t in (10.0, 50.0):
            s = ps.shannon_entropy(ps.classical_heat_flow(f, t))
            assert abs(s - math.log(t) - 1.0) <= math.log1p(sigma_sq / t) + 0.02


class TestSerialization:
    def test_roundtrip_exact(self, tmp_path):
        f = ps.gaussian_pdf(0.37, center=(0.21, -0.83), spacing=0.09)
        path = tmp_path / "noise.grid"
        ps.save_gridpdf(f, path)
        g = ps.load_gridpdf(path)
        assert g.origin == f.origin
        assert g.spacing == f.spacing
        assert np.array_equal(g.values, f.values)

    def test_bad_header(self, tmp_path):
        path = tmp_path / "bad.grid"
        path.write_text("something else\n")
        with pytest.raises(DomainError):
            ps.load_gridpdf(path)

    def test_size_mismatch(self, tmp_path):
        path = tmp_path / "short.grid"
        path.write_text("gridpdf 1\norigin 0.0 0.0\nspacing 0.1\nsize 3\n1 2 3\n4 5 6\n")
        with pytest.raises(DomainError):
            ps.load_gridpdf(path)


class TestInvariants:
    def test_negative_values_rejected(self):
        with pytest.raises(DomainError):
            ps.GridPdf((0.0, 0.0), 0.1, -np.ones((3, 3)))

    def test_boundary_tail_flagged(self):
        vals = np.ones((5, 5))
        f = ps.GridPdf((0.0, 0.0), 0.1, vals).normalized()
        with pytest.raises(GridTooSmallError):
            f.validate()
