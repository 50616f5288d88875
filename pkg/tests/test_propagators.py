import math

import numpy as np
import pytest

from smearing.families import DeltaFamily, GammaFamily, StaticFamily
from smearing.propagators import (
    AliasingWarning,
    GridSpec,
    HamiltonianSpec,
    cke_residual,
    density_via_fourier,
    effective_char_function,
    kernel_density_v,
    smeared_density_quadrature,
    tilted_values,
)


@pytest.fixture(scope="module")
def gamma_density():
    f = GammaFamily(1.0, 2.0)
    grid = GridSpec.default(f, 1.0, n=4096)
    return f, grid, density_via_fourier(grid, 1.0, f, HamiltonianSpec(0.0))


class TestHamiltonian:
    def test_martingale_continuation(self):
        spec = HamiltonianSpec(0.05)
        assert spec.H1(1j) == 0
        phi = effective_char_function(1j, 2.0, GammaFamily(1, 2), spec)
        assert phi == pytest.approx(math.exp(0.05 * 2.0), rel=1e-14)

    def test_tilt_makes_h1_real(self):
        spec = HamiltonianSpec()
        p = np.linspace(-5, 5, 11)
        h = spec.H1(p + 1j * spec.tilt)
        np.testing.assert_allclose(h.imag, 0, atol=1e-15)
        np.testing.assert_allclose(h.real, p ** 2 / 2 + 1 / 8)


class TestGrid:
    def test_power_of_two(self):
        with pytest.raises(ValueError):
            GridSpec(-1, 1, 1000)

    def test_centered_has_zero_node(self):
        g = GridSpec.centered(3.0, 64)
        assert 0.0 in g.x


class TestFourierDensity:
    def test_normalised_and_martingale(self, gamma_density):
        _, _, d = gamma_density
        assert d.integral() == pytest.approx(1.0, abs=1e-9)
        assert d.expectation(np.exp) == pytest.approx(1.0, abs=1e-6)

    def test_fat_tails(self, gamma_density):
        _, _, d = gamma_density
        assert d.excess_kurtosis() > 1.0

    def test_delta_family_gives_gaussian(self):
        v0, t = 0.3, 1.5
        f = DeltaFamily(v0)
        grid = GridSpec.centered(8.0, 2048)
        d = density_via_fourier(grid, t, f, HamiltonianSpec(0.02))
        exact = kernel_density_v(grid.x, t, v0, HamiltonianSpec(0.02))
        assert np.max(np.abs(d.values - exact)) < 1e-12

    def test_matches_quadrature(self):
        f = GammaFamily(4.0, 2.0)
        spec = HamiltonianSpec(0.05)
        grid = GridSpec.default(f, 1.0, n=256)
        a = density_via_fourier(grid, 1.0, f, spec).values
        b = smeared_density_quadrature(grid, 1.0, f, spec).values
        assert np.max(np.abs(a - b)) < 1e-8

    def test_tilted_values(self, gamma_density):
        f, grid, d = gamma_density
        share = tilted_values(grid, 1.0, f, HamiltonianSpec(0.0), 1.0, oversample=4)
        mask = np.abs(grid.x) < 5
        np.testing.assert_allclose(share[mask], (np.exp(grid.x) * d.values)[mask], atol=1e-10)

    def test_aliasing_warning_when_capped(self):
        f = GammaFamily(1.0, 0.3)
        grid = GridSpec.centered(5.0, 64)
        with pytest.warns(AliasingWarning):
            density_via_fourier(grid, 1.0, f, HamiltonianSpec(), max_points=128)

    def test_csv_export(self, gamma_density, tmp_path):
        _, _, d = gamma_density
        d.to_csv(tmp_path / "d.csv")
        lines = (tmp_path / "d.csv").read_text().splitlines()
        assert lines[0] == "x,density" and len(lines) == d.n + 1


class TestChapmanKolmogorov:
    @pytest.mark.parametrize("r", [0.0, 0.05])
    def test_gamma_composes(self, r):
        f = GammaFamily(1.0, 2.0)
        for t_c in (0.25, 0.5, 0.75):
            assert cke_residual(0.0, t_c, 1.0, f, HamiltonianSpec(r)) < 1e-6

    def test_static_mixture_does_not(self):
        f = StaticFamily.gamma(1.0, 2.0)
        assert cke_residual(0.0, 0.5, 1.0, f, HamiltonianSpec()) > 1e-2

    def test_lab_frame_shows_cusp_discretisation(self):
        f = GammaFamily(1.0, 2.0)
        lab = cke_residual(0.0, 0.25, 1.0, f, HamiltonianSpec(0.05), comoving=False)
        co = cke_residual(0.0, 0.25, 1.0, f, HamiltonianSpec(0.05))
        assert lab > 10 * co

    def test_quadrature_method_agrees_roughly(self):
        f = GammaFamily(2.0, 4.0)
        grid = GridSpec.default(f, 1.0, n=256)
        res = cke_residual(0.0, 0.5, 1.0, f, HamiltonianSpec(), grid=grid, method="quadrature")
        assert res < 1e-3

    def test_rejects_unordered_times(self):
        with pytest.raises(ValueError):
            cke_residual(0.0, 1.0, 0.5, GammaFamily(1, 2), HamiltonianSpec())
