"""Produtos internos invariantes de Poincaré sobre a camada de massa.

A distribuição ``2π δ(k² - m²) θ(k0)`` é resolvida analiticamente na medida
``d³k / ((2π)³ 2ω_k)`` antes da discretização; o núcleo só enxerga os
valores espectrais em ``k0 = ω_k`` (ver ``lattice.shell_samples``).
"""

import logging
from collections.abc import Iterable
from dataclasses import dataclass
from enum import Enum

import numpy as np

from src.errors import GridMismatchError, ModelError, RankError
from src.fields.lattice import (
    ETA_DIAG,
    Rank,
    ShellSamples,
    SpectralField4,
    check_same_grid,
    expand_antisym,
    shell_samples,
)

logger = logging.getLogger(__name__)

PSD_RELATIVE_TOL = 1e-10


class KernelKind(Enum):
    SCALAR = "scalar"
    VECTOR = "vector"
    EM = "em"


KERNEL_RANKS: dict[KernelKind, Rank] = {
    KernelKind.SCALAR: Rank.SCALAR,
    KernelKind.VECTOR: Rank.VECTOR,
    KernelKind.EM: Rank.ANTISYM2,
}


@dataclass(frozen=True)
class Kernel:
    """Núcleo sesquilinear sobre a camada de massa.

    Attributes:
        kind: Escalar de massa ``m``, vetorial com ``(σT, σS)`` ou tensorial EM.
        mass: Massa da camada (sempre 0 para EM).
        sigma_t: Peso da parte tipo-tempo (só vetorial).
        sigma_s: Peso da parte tipo-espaço (só vetorial).
        label: Rótulo para diagnósticos.
    """

    kind: KernelKind
    mass: float = 0.0
    sigma_t: float = 1.0
    sigma_s: float = 0.0
    label: str = ""

    def __post_init__(self) -> None:
        if not np.isfinite(self.mass) or self.mass < 0:
            raise ModelError(f"Massa inválida no núcleo {self.label!r}: {self.mass}.")
        if self.kind is KernelKind.VECTOR:
            if self.mass <= 0:
                raise ModelError(f"Núcleo vetorial {self.label!r} exige m > 0.")
            if not (self.sigma_t >= self.sigma_s >= 0):
                raise ModelError(
                    f"Núcleo vetorial {self.label!r} exige σT >= σS >= 0 "
                    f"(σT={self.sigma_t}, σS={self.sigma_s})."
                )
        if self.kind is KernelKind.EM and self.mass != 0:
            raise ModelError("O núcleo EM é definido apenas na camada sem massa.")

    @classmethod
    def scalar(cls, mass: float, label: str = "scalar") -> "Kernel":
        return cls(KernelKind.SCALAR, mass=float(mass), label=label)

    @classmethod
    def vector(cls, mass: float, sigma_t: float = 1.0, sigma_s: float = 0.5, label: str = "vector") -> "Kernel":
        return cls(KernelKind.VECTOR, float(mass), float(sigma_t), float(sigma_s), label)

    @classmethod
    def em(cls, label: str = "em") -> "Kernel":
        return cls(KernelKind.EM, label=label)

    @property
    def rank(self) -> Rank:
        return KERNEL_RANKS[self.kind]


@dataclass(frozen=True)
class ShellValue:
    """Valor de um produto interno com diagnósticos.

    Attributes:
        value: Valor complexo.
        n_shell: Pontos da camada somados.
        n_dropped: Pontos descartados acima da banda ``π/dt``.
        warnings: Avisos (banda, positividade).
    """

    value: complex
    n_shell: int
    n_dropped: int
    warnings: tuple[str, ...] = ()

    def __add__(self, other: "ShellValue") -> "ShellValue":
        return ShellValue(
            self.value + other.value,
            self.n_shell + other.n_shell,
            self.n_dropped + other.n_dropped,
            self.warnings + other.warnings,
        )


def translation_phase(samples: ShellSamples, a) -> np.ndarray:
    """Fase ``e^{-i(ω_k a0 - k.a)}`` de ``f~_a(k) = e^{-ik.a} f~(k)``."""
    a = np.asarray(a, dtype=float)
    return np.exp(-1j * (samples.omega * a[0] - samples.kvec.T @ a[1:]))


def _integrand(kernel: Kernel, a: ShellSamples, b: ShellSamples) -> np.ndarray:
    if kernel.kind is KernelKind.SCALAR:
        return np.conj(a.values[0]) * b.values[0]
    kmu = a.kmu
    if kernel.kind is KernelKind.VECTOR:
        k_a = np.einsum("mp,mp->p", kmu, a.values)
        k_b = np.einsum("mp,mp->p", kmu, b.values)
        metric = np.einsum("m,mp,mp->p", ETA_DIAG, np.conj(a.values), b.values)
        return kernel.sigma_t * np.conj(k_a) * k_b - kernel.sigma_s * kernel.mass**2 * metric
    # A_β = k^μ F_{μβ} é tipo-espaço; o sinal torna a forma positiva em (+,-,-,-)
    f_a = expand_antisym(a.values)
    f_b = expand_antisym(b.values)
    a_beta = np.einsum("mp,mbp->bp", kmu, f_a)
    b_beta = np.einsum("mp,mbp->bp", kmu, f_b)
    return -np.einsum("b,bp,bp->p", ETA_DIAG, np.conj(a_beta), b_beta)


def kernel_value(
    kernel: Kernel,
    a: ShellSamples,
    b: ShellSamples,
    translation=None,
    self_product: bool = False,
) -> ShellValue:
    """Soma ``Σ w_k conj(a) K b`` sobre amostras já restritas à camada.

    Args:
        kernel: Núcleo.
        a: Amostras do primeiro argumento (conjugado).
        b: Amostras do segundo argumento.
        translation: 4-vetor ``a`` opcional; multiplica ``b`` pela fase de translação.
        self_product: Ativa o diagnóstico de positividade.

    Raises:
        RankError: Posto incompatível com o núcleo.
        GridMismatchError: Grades ou camadas diferentes.
    """
    for samples in (a, b):
        if samples.rank is not kernel.rank:
            raise RankError(
                f"Núcleo {kernel.kind.value} {kernel.label!r} exige posto "
                f"{kernel.rank.value}, recebeu {samples.rank.value}."
            )
    check_same_grid(a, b)
    if a.mass != kernel.mass or b.mass != kernel.mass or a.method != b.method:
        raise GridMismatchError(
            f"Amostras da camada incompatíveis com o núcleo {kernel.label!r}."
        )
    integrand = _integrand(kernel, a, b) * a.weights
    if translation is not None:
        integrand = integrand * translation_phase(b, translation)
    value = complex(np.sum(integrand))

    warnings: list[str] = []
    if a.n_dropped:
        warnings.append(
            f"{kernel.label}: {a.n_dropped} pontos da camada acima de π/dt descartados"
        )
    if self_product and value.real < -PSD_RELATIVE_TOL * abs(value):
        message = f"{kernel.label}: autoproduto negativo {value.real:.3e}"
        logger.warning("Violação de positividade no núcleo %s: %.3e", kernel.label, value.real)
        warnings.append(message)
    return ShellValue(value, a.n_shell, a.n_dropped, tuple(warnings))


def _shell_ip(kernel: Kernel, f: SpectralField4, g: SpectralField4, method: str) -> ShellValue:
    check_same_grid(f, g)
    a = shell_samples(f, kernel.mass, method)
    b = a if g is f else shell_samples(g, kernel.mass, method)
    return kernel_value(kernel, a, b, self_product=g is f)


def scalar_shell_ip(f: SpectralField4, g: SpectralField4, mass: float, method: str = "direct") -> ShellValue:
    """``∫ d³k/((2π)³ 2ω_k) conj(f~(ω_k, k)) g~(ω_k, k)``."""
    return _shell_ip(Kernel.scalar(mass), f, g, method)


def vector_shell_ip(
    j1: SpectralField4,
    j2: SpectralField4,
    mass: float,
    sigma_t: float,
    sigma_s: float,
    method: str = "direct",
) -> ShellValue:
    """Núcleo vetorial ``conj(J1_μ)(σT k^μ k_ν - σS m² δ^μ_ν) J2^ν``."""
    return _shell_ip(Kernel.vector(mass, sigma_t, sigma_s), j1, j2, method)


def em_shell_ip(f1: SpectralField4, f2: SpectralField4, method: str = "direct") -> ShellValue:
    """Forma EM ``-k^μ conj(f1_{μβ}) k^ν f2_ν^β`` na camada sem massa."""
    return _shell_ip(Kernel.em(), f1, f2, method)


def translated_autocorrelation(
    terms: Iterable[tuple[float, Kernel, ShellSamples]], a
) -> ShellValue:
    """Forma de fase de ``ξ(f, f_a)``: ``Σ_i λ_i Σ_k w |P~_i[f]|² e^{-ik.a}``.

    Args:
        terms: Para cada termo do modelo, ``(peso, núcleo, amostras de P_i[f])``.
        a: Separação ``a^μ`` entre as duas medições.
    """
    total = ShellValue(0j, 0, 0)
    for weight, kernel, samples in terms:
        term = kernel_value(kernel, samples, samples, translation=a)
        total = total + ShellValue(weight * term.value, term.n_shell, term.n_dropped, term.warnings)
    return total
