"""Densidades de (quase)probabilidade para ``n`` medições.

- Vácuo: ``exp(-½ xᵀF⁻¹x) / sqrt((2π)^n det F)``.
- Uma partícula: o mesmo vezes ``|xᵀF⁻¹S|² + 1 - S†F⁻¹S`` (pode ser negativa).
- Deformação por ``G`` invertível: ``exp(-G(y)²/(2v)) G'(y) / sqrt(2πv)``.
"""

import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.integrate import trapezoid
from scipy.interpolate import PchipInterpolator
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.optimize import brentq

from src.errors import (
    BoxTooSmallError,
    DimensionError,
    InputError,
    NullStateError,
    SingularGeometryError,
)

logger = logging.getLogger(__name__)

OVERLAP_TOL = 1e-8
BOUNDARY_RATIO = 1e-12
MAX_TENSOR_DIM = 3


class GKind(Enum):
    IDENTITY = "identity"
    X_MINUS_TANH = "x_minus_tanh"
    MONOTONE_TABLE = "monotone_table"


@dataclass(frozen=True)
class GDescriptor:
    """Função ``G`` estritamente crescente usada na deformação.

    Para ``MONOTONE_TABLE`` o interpolante é PCHIP (monótono por construção),
    estendido linearmente fora dos nós com a inclinação do intervalo extremo.
    """

    kind: GKind
    knots_x: tuple[float, ...] = ()
    knots_y: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if self.kind is not GKind.MONOTONE_TABLE:
            return
        xs, ys = np.asarray(self.knots_x, float), np.asarray(self.knots_y, float)
        if xs.size < 2 or xs.shape != ys.shape:
            raise InputError("Tabela de G exige ao menos 2 nós com x e y do mesmo tamanho.")
        if np.any(np.diff(xs) <= 0) or np.any(np.diff(ys) <= 0):
            raise InputError("Tabela de G deve ser estritamente crescente em x e em y.")

    @classmethod
    def identity(cls) -> "GDescriptor":
        return cls(GKind.IDENTITY)

    @classmethod
    def x_minus_tanh(cls) -> "GDescriptor":
        return cls(GKind.X_MINUS_TANH)

    @classmethod
    def table(cls, xs: Sequence[float], ys: Sequence[float]) -> "GDescriptor":
        return cls(GKind.MONOTONE_TABLE, tuple(map(float, xs)), tuple(map(float, ys)))

    def _table(self):
        xs, ys = np.asarray(self.knots_x), np.asarray(self.knots_y)
        left = (ys[1] - ys[0]) / (xs[1] - xs[0])
        right = (ys[-1] - ys[-2]) / (xs[-1] - xs[-2])
        return xs, ys, PchipInterpolator(xs, ys, extrapolate=False), left, right

    def value(self, y):
        y = np.asarray(y, dtype=float)
        if self.kind is GKind.IDENTITY:
            return y
        if self.kind is GKind.X_MINUS_TANH:
            return y - np.tanh(y)
        xs, ys, interp, left, right = self._table()
        inside = np.nan_to_num(interp(y))
        return np.where(
            y < xs[0], ys[0] + left * (y - xs[0]),
            np.where(y > xs[-1], ys[-1] + right * (y - xs[-1]), inside),
        )

    def derivative(self, y):
        y = np.asarray(y, dtype=float)
        if self.kind is GKind.IDENTITY:
            return np.ones_like(y)
        if self.kind is GKind.X_MINUS_TANH:
            return np.tanh(y) ** 2
        xs, _, interp, left, right = self._table()
        inside = np.nan_to_num(interp.derivative()(y))
        return np.where(y < xs[0], left, np.where(y > xs[-1], right, inside))

    def inverse(self, u: float) -> float:
        """``G⁻¹(u)`` por bissecção com intervalo expandido."""
        lo, hi = -1.0, 1.0
        while float(self.value(lo)) > u:
            lo *= 2.0
        while float(self.value(hi)) < u:
            hi *= 2.0
        return float(brentq(lambda y: float(self.value(y)) - u, lo, hi))


class DensityKind(Enum):
    VACUUM = "vacuum"
    ONE_PARTICLE = "one_particle"
    G_DEFORMED = "g_deformed"


@dataclass(frozen=True, eq=False)
class DensitySpec:
    """Dados de uma densidade conjunta.

    Attributes:
        kind: Vácuo, uma partícula ou deformada por ``G``.
        covariance: ``F_ij = Re ξ(f_i, f_j)``.
        overlap: ``S_i = ξ(f_i, g)/sqrt(ξ(g, g))`` (só uma partícula).
        variance: ``ξ(f, f)`` (só deformada).
        g: Descritor de ``G`` (só deformada).
        ridge: Regularização ``ε I`` aplicada a ``F`` somente se pedida.
    """

    kind: DensityKind
    covariance: np.ndarray
    overlap: np.ndarray | None = None
    variance: float | None = None
    g: GDescriptor | None = None
    ridge: float = 0.0

    def __post_init__(self) -> None:
        f = np.atleast_2d(np.asarray(self.covariance, dtype=float))
        object.__setattr__(self, "covariance", f)
        if f.shape[0] != f.shape[1]:
            raise DimensionError(f"F deve ser quadrada, shape {f.shape}.")
        if not np.allclose(f, f.T, rtol=0, atol=1e-12 * max(np.max(np.abs(f)), 1e-300)):
            raise InputError("F deve ser simétrica.")
        if self.kind is DensityKind.ONE_PARTICLE:
            s = np.asarray(self.overlap, dtype=complex).ravel()
            if s.size != f.shape[0]:
                raise DimensionError(f"S com {s.size} entradas para F {f.shape}.")
            object.__setattr__(self, "overlap", s)
        if self.kind is DensityKind.G_DEFORMED:
            if self.g is None or self.variance is None:
                raise InputError("Densidade deformada exige G e variância.")
            if not self.variance > 0:
                raise InputError(f"Variância deve ser positiva, recebido {self.variance}.")
        if self.ridge < 0:
            raise InputError(f"Ridge deve ser >= 0, recebido {self.ridge}.")

    @property
    def n(self) -> int:
        return self.covariance.shape[0]

    @classmethod
    def vacuum(cls, covariance, ridge: float = 0.0) -> "DensitySpec":
        return cls(DensityKind.VACUUM, covariance, ridge=ridge)

    @classmethod
    def one_particle(cls, covariance, overlap, ridge: float = 0.0) -> "DensitySpec":
        return cls(DensityKind.ONE_PARTICLE, covariance, overlap=overlap, ridge=ridge)

    @classmethod
    def g_deformed(cls, g: GDescriptor, variance: float) -> "DensitySpec":
        return cls(DensityKind.G_DEFORMED, np.array([[variance]]), variance=float(variance), g=g)


def _factor(spec: DensitySpec):
    matrix = spec.covariance + spec.ridge * np.eye(spec.n)
    try:
        return cho_factor(matrix, lower=True)
    except LinAlgError as error:
        raise SingularGeometryError(
            "F singular (det F = 0): geometria de medição degenerada; "
            "forneça um ridge explícito para regularizar."
        ) from error


def overlap_norm(spec: DensitySpec) -> float:
    """``S†F⁻¹S`` de uma densidade de uma partícula."""
    factor = _factor(spec)
    return float(np.real(np.conj(spec.overlap) @ cho_solve(factor, spec.overlap)))


def g_deformed_density(g: GDescriptor, variance: float, y):
    """``exp(-G(y)²/(2v)) G'(y) / sqrt(2πv)``.

    Raises:
        InputError: ``variance <= 0``.
    """
    if not variance > 0:
        raise InputError(f"Variância deve ser positiva, recebido {variance}.")
    u = g.value(y)
    return np.exp(-(u**2) / (2.0 * variance)) * g.derivative(y) / np.sqrt(2.0 * np.pi * variance)


def joint_density(spec: DensitySpec, x):
    """Avalia a densidade em ``x`` (vetor ``(n,)`` ou lote ``(m, n)``).

    Raises:
        SingularGeometryError: ``F`` não invertível.
        DimensionError: ``x`` com dimensão diferente de ``n``.
    """
    points = np.asarray(x, dtype=float)
    single = points.ndim <= 1
    points = np.atleast_2d(points.reshape(1, -1) if single else points)
    if points.shape[1] != spec.n:
        raise DimensionError(f"Ponto com {points.shape[1]} coordenadas para n = {spec.n}.")

    if spec.kind is DensityKind.G_DEFORMED:
        values = g_deformed_density(spec.g, spec.variance, points[:, 0])
        return float(values[0]) if single else values

    factor = _factor(spec)
    solved = cho_solve(factor, points.T)
    quadratic = np.einsum("mi,im->m", points, solved)
    log_det = 2.0 * np.sum(np.log(np.diag(factor[0])))
    values = np.exp(-0.5 * quadratic - 0.5 * (spec.n * np.log(2.0 * np.pi) + log_det))

    if spec.kind is DensityKind.ONE_PARTICLE:
        f_inv_s = cho_solve(factor, spec.overlap)
        norm = float(np.real(np.conj(spec.overlap) @ f_inv_s))
        if norm > 1.0 + OVERLAP_TOL:
            logger.warning("S†F⁻¹S = %.6f > 1: a densidade assume valores negativos.", norm)
        values = values * (np.abs(points @ f_inv_s) ** 2 + 1.0 - norm)
    return float(values[0]) if single else values


def default_box(spec: DensitySpec, n_sigma: float = 10.0) -> list[tuple[float, float]]:
    """Caixa de integração que cobre ``n_sigma`` desvios por eixo."""
    if spec.kind is DensityKind.G_DEFORMED:
        reach = n_sigma * np.sqrt(spec.variance)
        return [(spec.g.inverse(-reach), spec.g.inverse(reach))]
    sigmas = np.sqrt(np.diag(spec.covariance) + spec.ridge)
    return [(-n_sigma * s, n_sigma * s) for s in sigmas]


def integrate_density(
    density: DensitySpec | Callable[[np.ndarray], np.ndarray],
    box: Sequence[tuple[float, float]] | None = None,
    resolution: int = 201,
) -> float:
    """Integral trapezoidal numa grade tensorial.

    Args:
        density: Especificação ou função ``(m, n) -> (m,)``.
        box: Limites por eixo; ``None`` usa :func:`default_box`.
        resolution: Pontos por eixo.

    Raises:
        DimensionError: ``n > 3``.
        BoxTooSmallError: Densidade na borda acima de ``1e-12`` do máximo.
    """
    if box is None:
        if not isinstance(density, DensitySpec):
            raise InputError("Caixa obrigatória para densidades fornecidas como função.")
        box = default_box(density)
    n = len(box)
    if n > MAX_TENSOR_DIM:
        raise DimensionError(f"Quadratura tensorial limitada a n <= {MAX_TENSOR_DIM}, recebido {n}.")
    axes = [np.linspace(lo, hi, resolution) for lo, hi in box]
    mesh = np.meshgrid(*axes, indexing="ij")
    points = np.stack([m.ravel() for m in mesh], axis=1)
    evaluate = (lambda p: joint_density(density, p)) if isinstance(density, DensitySpec) else density
    values = np.asarray(evaluate(points), dtype=float).reshape(mesh[0].shape)

    peak = float(np.max(np.abs(values)))
    edge = 0.0
    for axis in range(n):
        for index in (0, -1):
            edge = max(edge, float(np.max(np.abs(np.take(values, index, axis=axis)))))
    if peak > 0 and edge > BOUNDARY_RATIO * peak:
        raise BoxTooSmallError(
            f"Densidade na borda ({edge:.3e}) acima de {BOUNDARY_RATIO:.0e} do máximo "
            f"({peak:.3e}); amplie a caixa."
        )
    result = values
    for axis_values in reversed(axes):
        result = trapezoid(result, axis_values, axis=-1)
    return float(result)


def density_spec(inner, functions: Sequence, state, ridge: float = 0.0) -> DensitySpec:
    """Monta ``F`` e ``S`` a partir de ``ξ`` para o estado dado.

    Args:
        inner: Fonte de ``ξ`` (``XiEngine`` ou equivalente).
        functions: Funções medidas ``f_1..f_n``.
        state: ``StatePrep`` de vácuo ou de uma partícula.
        ridge: Regularização opcional de ``F``.
    """
    n = len(functions)
    gram = np.array(
        [[inner.xi(functions[i], functions[j]) for j in range(n)] for i in range(n)],
        dtype=complex,
    )
    covariance = 0.5 * (gram.real + gram.real.T)
    if state.is_vacuum:
        return DensitySpec.vacuum(covariance, ridge)
    if len(state.creators) != 1:
        raise InputError("Densidade disponível apenas para vácuo e estados de uma partícula.")
    (g,) = state.creators
    norm = complex(inner.xi(g, g)).real
    if norm <= 0:
        raise NullStateError("Direção de estado nula: ξ(g, g) = 0.")
    overlap = np.array([inner.xi(f, g) for f in functions], dtype=complex) / np.sqrt(norm)
    return DensitySpec.one_particle(covariance, overlap, ridge)
