"""Grade 4D de espaço-tempo e de momentos, transformada de Fourier e derivadas.

Convenções (usadas em todo o projeto): métrica (+,-,-,-),
``k.x = k0*t - kvec.xvec`` e ``f~(k) = ∫ d4x e^{+ik.x} f(x)``, discretizada
com peso ``dt*dx^3``. O eixo temporal usa ``e^{+ik0 t}`` e os espaciais
``e^{-ik.x}``.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.fft

from src.config import get_memory_cap, get_threads
from src.errors import (
    DimensionError,
    GridError,
    GridMismatchError,
    InputError,
    RankError,
    ShellCoverageError,
)

logger = logging.getLogger(__name__)

BYTES_PER_SAMPLE = 8
LEAKAGE_THRESHOLD = 1e-10

ETA_DIAG = np.array([1.0, -1.0, -1.0, -1.0])
"""Diagonal da métrica de Minkowski (+,-,-,-)."""

ANTISYM_PAIRS: tuple[tuple[int, int], ...] = (
    (0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3),
)
"""Componentes independentes de um tensor antissimétrico de posto 2."""


class Rank(Enum):
    """Posto tensorial de um campo amostrado."""

    SCALAR = "scalar"
    VECTOR = "vector"
    ANTISYM2 = "antisym2"

    @property
    def n_components(self) -> int:
        return {"scalar": 1, "vector": 4, "antisym2": 6}[self.value]


@dataclass(frozen=True)
class GridSpec:
    """Parâmetros de uma grade 4D uniforme (unidades naturais, ħ = c = 1).

    Attributes:
        n_t: Pontos no eixo temporal.
        n_s: Pontos em cada um dos 3 eixos espaciais.
        dt: Espaçamento temporal.
        dx: Espaçamento espacial.
        origin: Coordenadas ``(t, x, y, z)`` do canto da grade; ``None``
            centraliza a grade na origem.
    """

    n_t: int
    n_s: int
    dt: float
    dx: float
    origin: tuple[float, float, float, float] | None = None

    def __post_init__(self) -> None:
        if self.origin is None:
            corner = (
                -0.5 * self.n_t * self.dt,
                -0.5 * self.n_s * self.dx,
                -0.5 * self.n_s * self.dx,
                -0.5 * self.n_s * self.dx,
            )
            object.__setattr__(self, "origin", corner)
        else:
            object.__setattr__(self, "origin", tuple(float(v) for v in self.origin))

    @property
    def n_points(self) -> int:
        return self.n_t * self.n_s**3


class Grid:
    """Grade validada com eixos de coordenadas e de momentos.

    Os momentos seguem as frequências padrão da DFT escaladas por
    ``2π/(n·Δ)`` (ordem de ``scipy.fft.fftfreq``).
    """

    def __init__(self, spec: GridSpec) -> None:
        self.spec = spec
        t0, x0, y0, z0 = spec.origin
        self.t = t0 + spec.dt * np.arange(spec.n_t)
        self.x = (
            x0 + spec.dx * np.arange(spec.n_s),
            y0 + spec.dx * np.arange(spec.n_s),
            z0 + spec.dx * np.arange(spec.n_s),
        )
        self.k0 = 2.0 * np.pi * scipy.fft.fftfreq(spec.n_t, d=spec.dt)
        self.k = 2.0 * np.pi * scipy.fft.fftfreq(spec.n_s, d=spec.dx)
        self.dk0 = 2.0 * np.pi / (spec.n_t * spec.dt)
        self.dk = 2.0 * np.pi / (spec.n_s * spec.dx)
        self.cell_volume = spec.dt * spec.dx**3

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return (self.spec.n_t, self.spec.n_s, self.spec.n_s, self.spec.n_s)

    @property
    def spacings(self) -> tuple[float, float, float, float]:
        return (self.spec.dt, self.spec.dx, self.spec.dx, self.spec.dx)

    def coordinates(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Eixos ``x^μ`` em formato *broadcast* ``(n_t, n_s, n_s, n_s)``."""
        return (
            self.t[:, None, None, None],
            self.x[0][None, :, None, None],
            self.x[1][None, None, :, None],
            self.x[2][None, None, None, :],
        )

    def momenta(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Eixos ``k^μ`` em formato *broadcast*."""
        return (
            self.k0[:, None, None, None],
            self.k[None, :, None, None],
            self.k[None, None, :, None],
            self.k[None, None, None, :],
        )

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Grid) and other.spec == self.spec

    def __hash__(self) -> int:
        return hash(self.spec)

    def __repr__(self) -> str:
        return f"Grid({self.spec!r})"


def make_grid(spec: GridSpec, components: int = 1, memory_cap: int | None = None) -> Grid:
    """Valida a especificação e constrói a grade.

    Args:
        spec: Parâmetros da grade.
        components: Número de componentes por campo usado na estimativa de memória.
        memory_cap: Limite em bytes; ``None`` lê ``NLFIELD_MEMORY_CAP_BYTES``.

    Returns:
        Grade com eixos de coordenadas e momentos.

    Raises:
        GridError: Tamanho ímpar ou menor que 8, espaçamento não positivo ou
            estimativa de memória acima do limite.
    """
    for name, n in (("n_t", spec.n_t), ("n_s", spec.n_s)):
        if n % 2 != 0:
            raise GridError(f"odd grid size: {name}={n} deve ser par.")
        if n < 8:
            raise GridError(f"{name}={n} abaixo do mínimo de 8 pontos.")
    if not (spec.dt > 0 and spec.dx > 0):
        raise GridError(
            f"Espaçamentos devem ser positivos (dt={spec.dt}, dx={spec.dx})."
        )
    cap = get_memory_cap() if memory_cap is None else memory_cap
    footprint = spec.n_points * BYTES_PER_SAMPLE * components
    if footprint > cap:
        raise GridError(
            f"Grade de {spec.n_points} pontos x {components} componentes exige "
            f"{footprint} bytes, acima do limite de {cap} bytes."
        )
    return Grid(spec)


@dataclass(frozen=True, eq=False)
class RealField4:
    """Campo real amostrado, shape ``(componentes, n_t, n_s, n_s, n_s)``.

    Vetores e tensores são guardados com índices covariantes (``J_μ``,
    ``f_{μν}``); tensores antissimétricos guardam as 6 componentes de
    ``ANTISYM_PAIRS``.
    """

    grid: Grid
    rank: Rank
    samples: np.ndarray

    def __post_init__(self) -> None:
        expected = (self.rank.n_components, *self.grid.shape)
        if self.samples.shape != expected:
            raise DimensionError(
                f"Amostras com shape {self.samples.shape}, esperado {expected}."
            )
        if not np.all(np.isfinite(self.samples)):
            raise GridError("Campo contém valores não finitos.")

    @classmethod
    def zeros(cls, grid: Grid, rank: Rank) -> "RealField4":
        return cls(grid, rank, np.zeros((rank.n_components, *grid.shape)))


@dataclass(frozen=True, eq=False)
class SpectralField4:
    """Transformada de Fourier de um ``RealField4`` (mesmo shape, complexa)."""

    grid: Grid
    rank: Rank
    samples: np.ndarray
    convention: str = field(default="e^{+ik.x}, signature (+,-,-,-)")


def _phase(grid: Grid) -> np.ndarray:
    """Fator de fase da origem da grade, ``e^{+ik0 t0} e^{-ik.x0}``."""
    t0, x0, y0, z0 = grid.spec.origin
    k0, kx, ky, kz = grid.momenta()
    return np.exp(1j * (k0 * t0 - kx * x0 - ky * y0 - kz * z0))


def fft4(field: RealField4, workers: int | None = None) -> SpectralField4:
    """DFT 4D componente a componente com a convenção de sinal do projeto.

    Args:
        field: Campo real amostrado.
        workers: Threads do ``scipy.fft``; ``None`` lê ``NLFIELD_THREADS``.

    Returns:
        Campo espectral ``f~(k)`` com peso de medida ``dt*dx^3``.
    """
    grid = field.grid
    w = workers or get_threads()
    spatial = scipy.fft.fftn(field.samples, axes=(2, 3, 4), workers=w)
    full = scipy.fft.ifft(spatial, axis=1, norm="forward", workers=w)
    samples = full * (_phase(grid) * grid.cell_volume)[None]
    return SpectralField4(grid, field.rank, samples)


def ifft4(spectral: SpectralField4, workers: int | None = None) -> RealField4:
    """Inversa de :func:`fft4`."""
    grid = spectral.grid
    w = workers or get_threads()
    undone = spectral.samples * (np.conj(_phase(grid)) / grid.cell_volume)[None]
    temporal = scipy.fft.fft(undone, axis=1, norm="forward", workers=w)
    samples = scipy.fft.ifftn(temporal, axes=(2, 3, 4), workers=w)
    return RealField4(grid, spectral.rank, np.ascontiguousarray(samples.real))


def finite_difference(array: np.ndarray, axis: int, spacing: float) -> np.ndarray:
    """Diferença centrada de segunda ordem com contorno periódico."""
    return (np.roll(array, -1, axis=axis) - np.roll(array, 1, axis=axis)) / (2.0 * spacing)


def gradient4(field: RealField4, mu: int) -> RealField4:
    """Derivada ``∂_μ`` de cada componente por diferença centrada periódica.

    Raises:
        DimensionError: Se ``mu`` não estiver em ``0..3``.
    """
    if mu not in (0, 1, 2, 3):
        raise DimensionError(f"Índice de eixo inválido: {mu}.")
    spacing = field.grid.spacings[mu]
    derived = finite_difference(field.samples, axis=1 + mu, spacing=spacing)
    return RealField4(field.grid, field.rank, derived)


def boundary_leakage(field: RealField4) -> float:
    """Razão entre o maior ``|f|`` nas faces da caixa e o maior ``|f|`` global."""
    peak = float(np.max(np.abs(field.samples))) if field.samples.size else 0.0
    if peak == 0.0:
        return 0.0
    faces = 0.0
    for axis in range(1, 5):
        for index in (0, -1):
            face = np.take(field.samples, index, axis=axis)
            faces = max(faces, float(np.max(np.abs(face))))
    ratio = faces / peak
    if ratio > LEAKAGE_THRESHOLD:
        logger.warning(
            "Vazamento de borda %.3e acima de %.0e: a função não decai dentro da caixa.",
            ratio,
            LEAKAGE_THRESHOLD,
        )
    return ratio


def expand_antisym(packed: np.ndarray) -> np.ndarray:
    """Expande ``(6, ...)`` para o tensor completo ``(4, 4, ...)`` com sinais."""
    full = np.zeros((4, 4, *packed.shape[1:]), dtype=packed.dtype)
    for index, (mu, nu) in enumerate(ANTISYM_PAIRS):
        full[mu, nu] = packed[index]
        full[nu, mu] = -packed[index]
    return full


def pack_antisym(full: np.ndarray) -> np.ndarray:
    """Inverso de :func:`expand_antisym` (lê a parte ``μ < ν``)."""
    return np.stack([full[mu, nu] for mu, nu in ANTISYM_PAIRS])


@dataclass(frozen=True, eq=False)
class ShellSamples:
    """Valores de um campo espectral sobre a camada de massa ``k0 = ω_k``.

    Attributes:
        grid: Grade de origem.
        rank: Posto do campo.
        mass: Massa da camada.
        omega: ``ω_k`` por ponto selecionado, shape ``(p,)``.
        kvec: Momento espacial ``k^i``, shape ``(3, p)``.
        weights: Medida ``d^3k/((2π)^3 2ω_k)`` por ponto.
        values: ``f~(ω_k, k)`` por componente, shape ``(c, p)``.
        n_candidates: Pontos espaciais elegíveis antes do corte de banda.
        n_dropped: Pontos descartados por ``ω_k > π/dt``.
        method: ``"direct"`` ou ``"linear"``.
    """

    grid: Grid
    rank: Rank
    mass: float
    omega: np.ndarray
    kvec: np.ndarray
    weights: np.ndarray
    values: np.ndarray
    n_candidates: int
    n_dropped: int
    method: str

    @property
    def kmu(self) -> np.ndarray:
        """``k^μ = (ω_k, k)`` contravariante, shape ``(4, p)``."""
        return np.vstack([self.omega[None, :], self.kvec])

    @property
    def n_shell(self) -> int:
        return int(self.omega.size)


SHELL_METHODS = ("direct", "linear")


def _shell_mask(grid: Grid, mass: float):
    n_s = grid.spec.n_s
    kx, ky, kz = np.meshgrid(grid.k, grid.k, grid.k, indexing="ij")
    omega = np.sqrt(kx**2 + ky**2 + kz**2 + mass**2)

    eligible = np.ones((n_s, n_s, n_s), dtype=bool)
    nyquist = n_s // 2
    eligible[nyquist, :, :] = False
    eligible[:, nyquist, :] = False
    eligible[:, :, nyquist] = False
    if mass == 0.0:
        eligible[0, 0, 0] = False

    in_band = omega <= np.pi / grid.spec.dt
    return kx, ky, kz, omega, eligible, in_band


@dataclass(frozen=True)
class ShellCoverage:
    """Cobertura da camada de massa ``m`` pela banda temporal da grade."""

    mass: float
    n_candidates: int
    n_in_band: int
    n_dropped: int

    @property
    def fraction(self) -> float:
        return self.n_in_band / self.n_candidates if self.n_candidates else 0.0


def shell_coverage(grid: Grid, mass: float) -> ShellCoverage:
    """Conta os pontos da camada abaixo e acima de ``π/dt`` sem tocar em campos."""
    _, _, _, _, eligible, in_band = _shell_mask(grid, mass)
    n_in_band = int((eligible & in_band).sum())
    n_dropped = int((eligible & ~in_band).sum())
    if n_dropped:
        logger.warning(
            "Camada m=%s: %d de %d pontos acima de π/dt serão descartados.",
            mass,
            n_dropped,
            n_in_band + n_dropped,
        )
    return ShellCoverage(float(mass), int(eligible.sum()), n_in_band, n_dropped)


def shell_samples(
    spectral: SpectralField4,
    mass: float,
    method: str = "direct",
    workers: int | None = None,
) -> ShellSamples:
    """Restringe um campo espectral à camada de massa ``k0 = sqrt(k^2 + m^2)``.

    O método ``"direct"`` (padrão) recompõe as fatias temporais e avalia a soma
    trigonométrica exatamente em ``k0 = ω_k``; ``"linear"`` interpola ao longo
    do eixo ``k0`` da DFT. Os planos de Nyquist espaciais recebem peso zero
    (conjunto de momentos simétrico por ``k -> -k``) e, para ``m = 0``, o
    ponto ``k = 0`` também.

    Raises:
        ShellCoverageError: Se nenhum ponto da camada estiver abaixo de ``π/dt``.
        InputError: Método desconhecido.
    """
    if method not in SHELL_METHODS:
        raise InputError(f"Método de camada desconhecido: {method!r}.")
    grid = spectral.grid
    spec = grid.spec
    n_s, n_t = spec.n_s, spec.n_t

    kx, ky, kz, omega, eligible, in_band = _shell_mask(grid, mass)
    selected = eligible & in_band
    n_candidates = int(eligible.sum())
    n_dropped = int((eligible & ~in_band).sum())
    if not selected.any():
        raise ShellCoverageError(
            f"Toda a camada de massa m={mass} está acima da banda k0 <= π/dt; "
            "a grade é grossa demais para esta massa."
        )
    if n_dropped:
        logger.debug("Camada m=%s: %d pontos fora da banda descartados.", mass, n_dropped)

    flat = np.flatnonzero(selected)
    omega_s = omega.ravel()[flat]
    kvec = np.vstack([kx.ravel()[flat], ky.ravel()[flat], kz.ravel()[flat]])
    c = spectral.rank.n_components
    data = spectral.samples.reshape(c, n_t, n_s**3)[:, :, flat]

    if method == "direct":
        w = workers or get_threads()
        t0 = spec.origin[0]
        unphased = data * np.exp(-1j * grid.k0 * t0)[None, :, None]
        slices = scipy.fft.fft(unphased, axis=1, norm="forward", workers=w) / spec.dt
        values = np.zeros((c, flat.size), dtype=complex)
        for j, t in enumerate(grid.t):
            values += slices[:, j, :] * np.exp(1j * omega_s * t)
        values *= spec.dt
    else:
        half = n_t // 2
        positive = data[:, : half + 1, :].copy()
        # o bin de Nyquist da DFT carrega a fase de -π/dt; corrige para +π/dt
        positive[:, half, :] *= np.exp(2j * np.pi * spec.origin[0] / spec.dt)
        position = omega_s / grid.dk0
        lower = np.minimum(np.floor(position).astype(int), half - 1)
        frac = position - lower
        cols = np.arange(flat.size)
        values = positive[:, lower, cols] * (1.0 - frac) + positive[:, lower + 1, cols] * frac

    weights = 1.0 / ((n_s * spec.dx) ** 3 * 2.0 * omega_s)
    return ShellSamples(
        grid=grid,
        rank=spectral.rank,
        mass=float(mass),
        omega=omega_s,
        kvec=kvec,
        weights=weights,
        values=values,
        n_candidates=n_candidates,
        n_dropped=n_dropped,
        method=method,
    )


def check_same_grid(*fields: RealField4 | SpectralField4 | ShellSamples) -> Grid:
    """Garante que todos os campos usam a mesma grade e a retorna."""
    grid = fields[0].grid
    for other in fields[1:]:
        if other.grid.spec != grid.spec:
            raise GridMismatchError(
                f"Grades diferentes: {grid.spec!r} e {other.grid.spec!r}."
            )
    return grid
