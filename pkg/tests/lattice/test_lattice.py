"""Testes para a grade 4D, a transformada de Fourier e a camada de massa."""

import logging

import numpy as np
import pytest
from scipy.integrate import quad

from src.errors import DimensionError, GridError, GridMismatchError, InputError, ShellCoverageError
from src.fields.lattice import (
    GridSpec,
    Rank,
    RealField4,
    boundary_leakage,
    check_same_grid,
    expand_antisym,
    fft4,
    finite_difference,
    gradient4,
    ifft4,
    make_grid,
    pack_antisym,
    shell_coverage,
    shell_samples,
)
from src.fields.testfunctions import bump, gaussian_packet


@pytest.fixture
def grid16():
    return make_grid(GridSpec(n_t=16, n_s=16, dt=0.75, dx=0.75), memory_cap=10**9)


def _inner_band(grid, fraction=0.6):
    """Máscara dos momentos longe da frequência de Nyquist (sem aliasing)."""
    k0, kx, ky, kz = grid.momenta()
    limit = fraction * np.pi / grid.spec.dx
    return np.broadcast_to(
        (np.abs(k0) < fraction * np.pi / grid.spec.dt)
        & (np.abs(kx) < limit)
        & (np.abs(ky) < limit)
        & (np.abs(kz) < limit),
        grid.shape,
    )


@pytest.fixture
def grid8():
    return make_grid(GridSpec(n_t=8, n_s=8, dt=0.25, dx=0.5), memory_cap=10**9)


class TestMakeGrid:
    def test_centered_origin(self):
        grid = make_grid(GridSpec(8, 8, 0.5, 0.25))
        assert grid.t[0] == pytest.approx(-2.0)
        assert grid.x[0][0] == pytest.approx(-1.0)
        assert grid.shape == (8, 8, 8, 8)
        assert grid.spacings == (0.5, 0.25, 0.25, 0.25)

    def test_momentum_spacing(self):
        grid = make_grid(GridSpec(8, 16, 0.5, 0.25))
        assert grid.dk0 == pytest.approx(2 * np.pi / 4.0)
        assert grid.dk == pytest.approx(2 * np.pi / 4.0)
        assert grid.k[1] == pytest.approx(grid.dk)

    def test_odd_size_rejected(self):
        with pytest.raises(GridError, match="odd grid size"):
            make_grid(GridSpec(8, 9, 0.5, 0.5))

    def test_too_small_rejected(self):
        with pytest.raises(GridError, match="mínimo"):
            make_grid(GridSpec(6, 8, 0.5, 0.5))

    @pytest.mark.parametrize("dt, dx", [(0.0, 0.5), (0.5, -1.0)])
    def test_nonpositive_spacing_rejected(self, dt, dx):
        with pytest.raises(GridError):
            make_grid(GridSpec(8, 8, dt, dx))

    def test_memory_cap(self):
        """Uma grade acima do limite de memória deve ser recusada."""
        with pytest.raises(GridError, match="bytes"):
            make_grid(GridSpec(8, 8, 0.5, 0.5), components=6, memory_cap=8**4 * 8)

    def test_memory_cap_from_environment(self, monkeypatch):
        monkeypatch.setenv("NLFIELD_MEMORY_CAP_BYTES", "1000")
        with pytest.raises(GridError):
            make_grid(GridSpec(8, 8, 0.5, 0.5))


class TestRealField4:
    def test_shape_checked(self, grid8):
        with pytest.raises(DimensionError):
            RealField4(grid8, Rank.VECTOR, np.zeros((1, *grid8.shape)))

    def test_non_finite_rejected(self, grid8):
        samples = np.zeros((1, *grid8.shape))
        samples[0, 0, 0, 0, 0] = np.nan
        with pytest.raises(GridError):
            RealField4(grid8, Rank.SCALAR, samples)

    def test_rank_components(self):
        assert Rank.SCALAR.n_components == 1
        assert Rank.VECTOR.n_components == 4
        assert Rank.ANTISYM2.n_components == 6


class TestFourier:
    def test_gaussian_matches_closed_form(self, grid16):
        """A DFT de uma gaussiana deve reproduzir a transformada analítica."""
        fn = gaussian_packet(center=(0.25, 0.5, 0.0, -0.25), sigma=1.0)
        spectral = fft4(fn.sample(grid16), workers=1)
        exact = fn.spectrum(grid16.momenta())
        inner = _inner_band(grid16)
        peak = np.max(np.abs(exact))
        assert np.max(np.abs(spectral.samples - exact)[:, inner]) < 1e-4 * peak

    def test_modulated_gaussian_matches_closed_form(self, grid16):
        fn = gaussian_packet(sigma=1.0, q=(1.0, 0.5, 0.0, 0.0), phase=0.3)
        spectral = fft4(fn.sample(grid16), workers=1)
        exact = fn.spectrum(grid16.momenta())
        inner = _inner_band(grid16)
        peak = np.max(np.abs(exact))
        assert np.max(np.abs(spectral.samples - exact)[:, inner]) < 1e-4 * peak

    def test_inverse_recovers_samples(self, grid8):
        rng = np.random.default_rng(7)
        field = RealField4(grid8, Rank.VECTOR, rng.normal(size=(4, *grid8.shape)))
        back = ifft4(fft4(field, workers=1), workers=1)
        np.testing.assert_allclose(back.samples, field.samples, atol=1e-12)

    def test_parseval(self, grid8):
        """Σ|f|² dt dx³ = Σ|f~|² dk0 dk³ / (2π)⁴."""
        rng = np.random.default_rng(17)
        field = RealField4(grid8, Rank.SCALAR, rng.normal(size=(1, *grid8.shape)))
        spectral = fft4(field, workers=1)
        position = np.sum(field.samples**2) * grid8.cell_volume
        momentum = np.sum(np.abs(spectral.samples) ** 2) * grid8.dk0 * grid8.dk**3 / (2 * np.pi) ** 4
        assert momentum == pytest.approx(position, rel=1e-12)

    def test_real_input_has_conjugate_symmetric_spectrum(self, grid8):
        """f~(-k) = conj f~(k) para f real."""
        rng = np.random.default_rng(19)
        field = RealField4(grid8, Rank.VECTOR, rng.normal(size=(4, *grid8.shape)))
        spectral = fft4(field, workers=1).samples
        n_t, n_s = grid8.spec.n_t, grid8.spec.n_s
        flip_t, flip_s = (-np.arange(n_t)) % n_t, (-np.arange(n_s)) % n_s
        mirrored = spectral[:, flip_t][:, :, flip_s][:, :, :, flip_s][:, :, :, :, flip_s]
        scale = np.max(np.abs(spectral))
        np.testing.assert_allclose(mirrored, np.conj(spectral), rtol=0, atol=1e-12 * scale)


class TestDerivatives:
    def test_central_difference_is_second_order(self):
        """Refinar o passo pela metade deve dividir o erro por ~4."""
        errors = []
        for n in (32, 64):
            x = np.linspace(0.0, 2 * np.pi, n, endpoint=False)
            h = x[1] - x[0]
            errors.append(np.max(np.abs(finite_difference(np.sin(x), 0, h) - np.cos(x))))
        assert errors[0] / errors[1] > 3.5
        assert errors[1] < 2e-3

    def test_gradient_uses_axis_of_mu(self, grid8):
        rng = np.random.default_rng(3)
        field = RealField4(grid8, Rank.SCALAR, rng.normal(size=(1, *grid8.shape)))
        derived = gradient4(field, 2)
        expected = finite_difference(field.samples, axis=3, spacing=grid8.spec.dx)
        np.testing.assert_allclose(derived.samples, expected)

    def test_invalid_mu(self, grid8):
        with pytest.raises(DimensionError):
            gradient4(RealField4.zeros(grid8, Rank.SCALAR), 4)


class TestBoundaryLeakage:
    def test_compact_bump_has_no_leakage(self, grid16):
        assert boundary_leakage(bump(radius=2.0).sample(grid16)) == 0.0

    def test_zero_field(self, grid8):
        assert boundary_leakage(RealField4.zeros(grid8, Rank.SCALAR)) == 0.0

    def test_wide_gaussian_warns(self, grid8, caplog):
        with caplog.at_level(logging.WARNING, logger="src.fields.lattice"):
            ratio = boundary_leakage(gaussian_packet(sigma=2.0).sample(grid8))
        assert ratio > 1e-10
        assert "Vazamento" in caplog.text


class TestAntisym:
    def test_expand_is_antisymmetric(self):
        packed = np.arange(1.0, 7.0).reshape(6, 1)
        full = expand_antisym(packed)
        assert full[0, 1, 0] == 1.0
        assert full[1, 0, 0] == -1.0
        assert full[2, 3, 0] == 6.0
        np.testing.assert_allclose(full[:, :, 0], -full[:, :, 0].T)
        np.testing.assert_allclose(pack_antisym(full), packed)


class TestBumpQuadrature:
    @staticmethod
    def _exact_integral(radius):
        """∫ bump d⁴x = 2π² r⁴ ∫₀¹ ρ³ exp(-1/(1-ρ²)) dρ."""
        radial, _ = quad(lambda rho: rho**3 * np.exp(-1.0 / (1.0 - rho**2)), 0.0, 1.0, epsabs=1e-14)
        return 2.0 * np.pi**2 * radius**4 * radial

    def test_grid_sum_converges_under_refinement(self):
        """Reduzir o espaçamento 4x deve reduzir o erro da soma na grade."""
        errors = []
        for n, spacing in ((8, 0.5), (32, 0.125)):
            grid = make_grid(GridSpec(n, n, spacing, spacing))
            worst = 0.0
            for radius in (1.1, 1.3, 1.5):
                total = np.sum(bump(radius=radius).sample(grid).samples) * grid.cell_volume
                worst = max(worst, abs(total / self._exact_integral(radius) - 1.0))
            errors.append(worst)
        assert errors[1] < errors[0] / 3
        assert errors[1] < 1e-2


class TestShellSamples:
    def test_all_non_nyquist_points_when_band_is_wide(self, grid8):
        spectral = fft4(gaussian_packet(sigma=0.5).sample(grid8), workers=1)
        shell = shell_samples(spectral, 1.0, workers=1)
        assert shell.n_shell == 7**3
        assert shell.n_dropped == 0
        assert shell.kmu.shape == (4, 7**3)
        np.testing.assert_allclose(shell.kmu[0] ** 2 - np.sum(shell.kvec**2, axis=0), 1.0)

    def test_massless_excludes_zero_momentum(self, grid8):
        spectral = fft4(gaussian_packet(sigma=0.5).sample(grid8), workers=1)
        shell = shell_samples(spectral, 0.0, workers=1)
        assert shell.n_shell == 7**3 - 1
        assert np.all(shell.omega > 0)

    def test_direct_matches_closed_form(self, grid16):
        """Os valores sobre a camada devem coincidir com f~(ω_k, k) analítica."""
        fn = gaussian_packet(center=(0.3, 0.0, 0.5, 0.0), sigma=1.0)
        shell = shell_samples(fft4(fn.sample(grid16), workers=1), 1.0, workers=1)
        exact = fn.spectrum(tuple(shell.kmu))
        peak = (2 * np.pi) ** 2
        assert np.max(np.abs(shell.values - exact)) < 1e-3 * peak

    def test_linear_method_has_same_points(self, grid16):
        spectral = fft4(gaussian_packet(sigma=1.0).sample(grid16), workers=1)
        direct = shell_samples(spectral, 1.0, method="direct", workers=1)
        linear = shell_samples(spectral, 1.0, method="linear", workers=1)
        assert linear.method == "linear"
        np.testing.assert_allclose(linear.omega, direct.omega)

    def test_weights_are_shell_measure(self, grid8):
        spectral = fft4(gaussian_packet(sigma=0.5).sample(grid8), workers=1)
        shell = shell_samples(spectral, 2.0, workers=1)
        box = (8 * 0.5) ** 3
        np.testing.assert_allclose(shell.weights, 1.0 / (box * 2.0 * shell.omega))

    def test_unknown_method(self, grid8):
        spectral = fft4(gaussian_packet().sample(grid8), workers=1)
        with pytest.raises(InputError):
            shell_samples(spectral, 1.0, method="spline")

    def test_mass_above_band(self, grid8):
        spectral = fft4(gaussian_packet().sample(grid8), workers=1)
        with pytest.raises(ShellCoverageError):
            shell_samples(spectral, 100.0, workers=1)


class TestShellCoverage:
    def test_counts_dropped_points(self, caplog):
        grid = make_grid(GridSpec(8, 8, 0.5, 0.5))
        with caplog.at_level(logging.WARNING, logger="src.fields.lattice"):
            coverage = shell_coverage(grid, 1.0)
        assert coverage.n_candidates == 7**3
        assert coverage.n_dropped > 0
        assert coverage.n_in_band + coverage.n_dropped == coverage.n_candidates
        assert 0.0 < coverage.fraction < 1.0
        assert "descartados" in caplog.text

    def test_full_coverage(self, grid8):
        coverage = shell_coverage(grid8, 1.0)
        assert coverage.fraction == 1.0


class TestCheckSameGrid:
    def test_mismatch(self, grid8, grid16):
        with pytest.raises(GridMismatchError):
            check_same_grid(RealField4.zeros(grid8, Rank.SCALAR), RealField4.zeros(grid16, Rank.SCALAR))

    def test_returns_grid(self, grid8):
        field = RealField4.zeros(grid8, Rank.SCALAR)
        assert check_same_grid(field, field) is grid8
