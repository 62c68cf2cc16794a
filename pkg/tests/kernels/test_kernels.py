"""Testes para os núcleos sobre a camada de massa (escalar, vetorial e EM)."""

import numpy as np
import pytest

from src.errors import GridMismatchError, ModelError, RankError
from src.fields.kernels import (
    Kernel,
    KernelKind,
    ShellValue,
    em_shell_ip,
    kernel_value,
    scalar_shell_ip,
    translated_autocorrelation,
    vector_shell_ip,
)
from src.fields.lattice import GridSpec, Rank, fft4, make_grid, shell_samples
from src.fields.testfunctions import gaussian_packet, translate


@pytest.fixture
def grid():
    return make_grid(GridSpec(n_t=16, n_s=16, dt=0.75, dx=0.75))


def _spectral(fn, grid):
    return fft4(fn.sample(grid), workers=1)


@pytest.fixture
def profile_shell(grid):
    """Amostras na camada m=1 do perfil escalar comum aos testes tensoriais."""
    return shell_samples(_spectral(gaussian_packet(sigma=1.0), grid), 1.0, workers=1)


class TestKernelValidation:
    def test_vector_requires_mass(self):
        with pytest.raises(ModelError):
            Kernel.vector(0.0)

    def test_vector_requires_ordered_weights(self):
        """σT >= σS >= 0 garante positividade."""
        with pytest.raises(ModelError):
            Kernel.vector(1.0, sigma_t=0.5, sigma_s=1.0)
        with pytest.raises(ModelError):
            Kernel.vector(1.0, sigma_t=1.0, sigma_s=-0.1)

    def test_negative_mass(self):
        with pytest.raises(ModelError):
            Kernel.scalar(-1.0)

    def test_em_is_massless(self):
        with pytest.raises(ModelError):
            Kernel(KernelKind.EM, mass=1.0)

    def test_ranks(self):
        assert Kernel.scalar(1.0).rank is Rank.SCALAR
        assert Kernel.vector(1.0).rank is Rank.VECTOR
        assert Kernel.em().rank is Rank.ANTISYM2


class TestScalarKernel:
    def test_self_product_is_positive(self, grid):
        f = _spectral(gaussian_packet(sigma=1.0, q=(0.5, 0.3, 0.0, 0.0)), grid)
        value = scalar_shell_ip(f, f, 1.0).value
        assert value.real > 0
        assert abs(value.imag) < 1e-12 * value.real

    def test_hermitian(self, grid):
        f = _spectral(gaussian_packet(sigma=1.0), grid)
        g = _spectral(gaussian_packet(center=(0.5, 1.0, 0.0, 0.0), sigma=0.8, q=(1.0, 0, 0, 0)), grid)
        fg = scalar_shell_ip(f, g, 0.5).value
        gf = scalar_shell_ip(g, f, 0.5).value
        assert fg == pytest.approx(np.conj(gf), rel=1e-12)

    def test_is_weighted_sum_over_shell(self, grid, profile_shell):
        f = _spectral(gaussian_packet(sigma=1.0), grid)
        expected = np.sum(profile_shell.weights * np.abs(profile_shell.values[0]) ** 2)
        assert scalar_shell_ip(f, f, 1.0).value.real == pytest.approx(expected, rel=1e-12)

    def test_mass_mismatch(self, profile_shell):
        with pytest.raises(GridMismatchError):
            kernel_value(Kernel.scalar(2.0), profile_shell, profile_shell)

    def test_rank_mismatch(self, profile_shell):
        with pytest.raises(RankError):
            kernel_value(Kernel.vector(1.0), profile_shell, profile_shell)

    def test_dropped_points_are_reported(self):
        coarse = make_grid(GridSpec(8, 8, 0.5, 0.5))
        f = _spectral(gaussian_packet(sigma=0.6), coarse)
        value = scalar_shell_ip(f, f, 1.0)
        assert value.n_dropped > 0
        assert any("descartados" in warning for warning in value.warnings)


class TestVectorKernel:
    def test_timelike_profile(self, grid, profile_shell):
        """J = (1,0,0,0) g: σT ω² - σS m² por ponto da camada."""
        J = _spectral(gaussian_packet(sigma=1.0, rank=Rank.VECTOR, profile=(1, 0, 0, 0)), grid)
        value = vector_shell_ip(J, J, 1.0, 1.0, 0.5).value
        w, g2, omega = profile_shell.weights, np.abs(profile_shell.values[0]) ** 2, profile_shell.omega
        expected = np.sum(w * g2 * (omega**2 - 0.5))
        assert value.real == pytest.approx(expected, rel=1e-10)

    def test_spacelike_profile_is_positive(self, grid, profile_shell):
        """J = (0,1,0,0) g: σT k_x² + σS m², positivo apesar de J·J < 0."""
        J = _spectral(gaussian_packet(sigma=1.0, rank=Rank.VECTOR, profile=(0, 1, 0, 0)), grid)
        value = vector_shell_ip(J, J, 1.0, 1.0, 0.5).value
        w, g2, kx = profile_shell.weights, np.abs(profile_shell.values[0]) ** 2, profile_shell.kvec[0]
        expected = np.sum(w * g2 * (kx**2 + 0.5))
        assert value.real == pytest.approx(expected, rel=1e-10)
        assert value.real > 0

    def test_hermitian(self, grid):
        J1 = _spectral(gaussian_packet(sigma=1.0, rank=Rank.VECTOR, profile=(1, 0.5, 0, -0.2)), grid)
        J2 = _spectral(
            gaussian_packet(center=(0, 0.5, 0, 0), sigma=0.9, rank=Rank.VECTOR, profile=(0, 1, 1, 0)), grid
        )
        a = vector_shell_ip(J1, J2, 1.5, 1.0, 0.3).value
        b = vector_shell_ip(J2, J1, 1.5, 1.0, 0.3).value
        assert a == pytest.approx(np.conj(b), rel=1e-12)


class TestEMKernel:
    def test_electric_profile(self, grid):
        """F_01 = g dá |g~|² (k_y² + k_z²), não negativo."""
        g = gaussian_packet(sigma=1.0)
        F = _spectral(gaussian_packet(sigma=1.0, rank=Rank.ANTISYM2, profile=(1, 0, 0, 0, 0, 0)), grid)
        shell = shell_samples(_spectral(g, grid), 0.0, workers=1)
        value = em_shell_ip(F, F).value
        expected = np.sum(shell.weights * np.abs(shell.values[0]) ** 2 * (shell.kvec[1] ** 2 + shell.kvec[2] ** 2))
        assert value.real == pytest.approx(expected, rel=1e-10)

    def test_random_profiles_are_positive(self, grid):
        rng = np.random.default_rng(11)
        for _ in range(3):
            F = _spectral(
                gaussian_packet(sigma=1.0, rank=Rank.ANTISYM2, profile=rng.normal(size=6)), grid
            )
            assert em_shell_ip(F, F).value.real >= 0


# Múltiplos inteiros do passo; f e f_a ficam a mais de 9σ das faces da caixa.
SEPARATIONS = [(0.0, 0.5 * j, 0.5 * (j // 2), 0.0) for j in range(-5, 6)]


@pytest.fixture(scope="module")
def translation_grid():
    return make_grid(GridSpec(n_t=16, n_s=32, dt=0.5, dx=0.5))


class TestTranslation:
    def test_zero_translation_is_identity(self, profile_shell):
        kernel = Kernel.scalar(1.0)
        plain = kernel_value(kernel, profile_shell, profile_shell)
        moved = kernel_value(kernel, profile_shell, profile_shell, translation=np.zeros(4))
        assert moved.value == pytest.approx(plain.value, rel=1e-14)

    @pytest.mark.parametrize("a", SEPARATIONS)
    def test_phase_form_matches_explicit_translation(self, translation_grid, a):
        """ξ(f, f_a) pela fase coincide com a translação explícita da função."""
        f = gaussian_packet(sigma=0.6)
        spectral = _spectral(f, translation_grid)
        shell = shell_samples(spectral, 1.0, workers=1)
        phase = translated_autocorrelation([(2.0, Kernel.scalar(1.0), shell)], a).value
        explicit = 2.0 * scalar_shell_ip(spectral, _spectral(translate(f, a), translation_grid), 1.0).value
        assert phase == pytest.approx(explicit, rel=1e-8)

    def test_shell_value_addition(self):
        total = ShellValue(1 + 1j, 3, 1, ("a",)) + ShellValue(2.0, 4, 0, ("b",))
        assert total == ShellValue(3 + 1j, 7, 1, ("a", "b"))
