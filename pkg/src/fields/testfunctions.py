"""Famílias de funções teste com metadados analíticos.

Pacotes gaussianos (suporte ilimitado, transformada de Fourier fechada),
*bumps* de suporte compacto numa bola euclidiana 4D, somas e múltiplos
escalares. Funções tensoriais são um perfil escalar vezes um vetor
constante de componentes (covariantes).
"""

import logging
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from src.errors import TestFunctionError
from src.fields.lattice import Grid, Rank, RealField4

logger = logging.getLogger(__name__)

Vector4 = tuple[float, float, float, float]
ZERO4: Vector4 = (0.0, 0.0, 0.0, 0.0)


@dataclass(frozen=True)
class Ball:
    """Bola euclidiana 4D que contém o suporte de uma função."""

    center: Vector4
    radius: float


class Relation(Enum):
    SPACELIKE = "SpacelikeSeparated"
    NOT_SPACELIKE = "NotSpacelikeSeparated"
    INDETERMINATE = "Indeterminate"


@dataclass(frozen=True)
class CausalRelation:
    """Relação causal certificada entre dois suportes.

    Attributes:
        relation: Classificação.
        margin: Maior valor possível de ``Δt² - |Δx|²`` entre os suportes;
            ``None`` quando algum suporte é ilimitado.
    """

    relation: Relation
    margin: float | None


def _vector4(value, name: str) -> Vector4:
    arr = np.asarray(value if value is not None else ZERO4, dtype=float).ravel()
    if arr.shape != (4,) or not np.all(np.isfinite(arr)):
        raise TestFunctionError(f"{name} deve ser um 4-vetor finito, recebido {value!r}.")
    return tuple(float(v) for v in arr)


def _profile(profile, rank: Rank) -> tuple[float, ...]:
    if profile is None:
        return (1.0,) * rank.n_components
    arr = np.asarray(profile, dtype=float).ravel()
    if arr.size != rank.n_components:
        raise TestFunctionError(
            f"Perfil com {arr.size} componentes; posto {rank.value} exige "
            f"{rank.n_components}."
        )
    if not np.all(np.isfinite(arr)):
        raise TestFunctionError("Perfil de componentes com valores não finitos.")
    return tuple(float(v) for v in arr)


def _minkowski(a: Vector4, b) -> float | np.ndarray:
    return a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3]


@dataclass(frozen=True)
class TestFunction:
    """Função teste real sobre o espaço-tempo.

    ``family`` é ``"gaussian"``, ``"bump"``, ``"sum"`` ou ``"scaled"``. Para
    gaussianas ``width`` é σ; para *bumps* é o raio r.
    """

    __test__ = False

    family: str
    rank: Rank
    profile: tuple[float, ...] = (1.0,)
    center: Vector4 = ZERO4
    width: float = 1.0
    q: Vector4 = ZERO4
    amplitude: float = 1.0
    phase: float = 0.0
    parts: tuple["TestFunction", ...] = field(default=())
    factor: float = 1.0

    @property
    def support(self) -> tuple[Ball, ...] | None:
        """Bolas que cobrem o suporte; ``None`` para suporte ilimitado."""
        if self.family == "gaussian":
            return None
        if self.family == "bump":
            return (Ball(self.center, self.width),)
        balls: list[Ball] = []
        for part in self.parts:
            part_support = part.support
            if part_support is None:
                return None
            balls.extend(part_support)
        return tuple(balls)

    @property
    def has_closed_form(self) -> bool:
        if self.family == "gaussian":
            return True
        if self.family in ("sum", "scaled"):
            return all(part.has_closed_form for part in self.parts)
        return False

    def _scalar_profile(self, coords) -> np.ndarray:
        t, x, y, z = coords
        d2 = (
            (t - self.center[0]) ** 2
            + (x - self.center[1]) ** 2
            + (y - self.center[2]) ** 2
            + (z - self.center[3]) ** 2
        )
        if self.family == "gaussian":
            envelope = np.exp(-d2 / (2.0 * self.width**2))
            return self.amplitude * envelope * np.cos(_minkowski(self.q, coords) + self.phase)
        rho2 = d2 / self.width**2
        inside = rho2 < 1.0
        safe = np.where(inside, 1.0 - rho2, 1.0)
        return self.amplitude * np.where(inside, np.exp(-1.0 / safe), 0.0)

    def evaluate(self, coords) -> np.ndarray:
        """Avalia a função em coordenadas ``(t, x, y, z)`` com *broadcast*.

        Returns:
            Array ``(componentes, ...)`` com o formato do *broadcast*.
        """
        if self.family == "sum":
            return sum(part.evaluate(coords) for part in self.parts)
        if self.family == "scaled":
            return self.factor * self.parts[0].evaluate(coords)
        scalar = self._scalar_profile(coords)
        weights = np.asarray(self.profile).reshape((-1,) + (1,) * np.ndim(scalar))
        return weights * scalar[None]

    def sample(self, grid: Grid) -> RealField4:
        """Amostra a função sobre a grade."""
        shape = (self.rank.n_components, *grid.shape)
        values = np.broadcast_to(self.evaluate(grid.coordinates()), shape)
        return RealField4(grid, self.rank, np.ascontiguousarray(values, dtype=float))

    def spectrum(self, momenta) -> np.ndarray:
        """Transformada de Fourier exata ``f~(k)`` em momentos ``(k0, k1, k2, k3)``.

        Raises:
            TestFunctionError: Se a família não tiver forma fechada.
        """
        if self.family == "sum":
            return sum(part.spectrum(momenta) for part in self.parts)
        if self.family == "scaled":
            return self.factor * self.parts[0].spectrum(momenta)
        if self.family != "gaussian":
            raise TestFunctionError(
                f"Família {self.family!r} não possui transformada de Fourier fechada."
            )
        sigma2 = self.width**2

        def shifted(sign: float) -> np.ndarray:
            p = [momenta[mu] + sign * self.q[mu] for mu in range(4)]
            euclid = sum(pm**2 for pm in p)
            return (2.0 * np.pi * sigma2) ** 2 * np.exp(
                1j * _minkowski(self.center, p) - 0.5 * sigma2 * euclid
            )

        scalar = 0.5 * self.amplitude * (
            np.exp(1j * self.phase) * shifted(1.0) + np.exp(-1j * self.phase) * shifted(-1.0)
        )
        weights = np.asarray(self.profile).reshape((-1,) + (1,) * np.ndim(scalar))
        return weights * scalar[None]


def gaussian_packet(
    center=None,
    sigma: float = 1.0,
    q=None,
    rank: Rank = Rank.SCALAR,
    profile=None,
    amplitude: float = 1.0,
    phase: float = 0.0,
) -> TestFunction:
    """Pacote gaussiano ``A exp(-|x-x0|²/(2σ²)) cos(q.x + φ)``.

    ``|.|`` é a norma euclidiana 4D e ``q.x`` o produto de Minkowski.

    Raises:
        TestFunctionError: Se ``sigma <= 0`` ou parâmetros não finitos.
    """
    if not (np.isfinite(sigma) and sigma > 0):
        raise TestFunctionError(f"Largura σ deve ser positiva, recebido {sigma}.")
    if not (np.isfinite(amplitude) and np.isfinite(phase)):
        raise TestFunctionError("Amplitude e fase devem ser finitas.")
    return TestFunction(
        family="gaussian",
        rank=rank,
        profile=_profile(profile, rank),
        center=_vector4(center, "center"),
        width=float(sigma),
        q=_vector4(q, "q"),
        amplitude=float(amplitude),
        phase=float(phase),
    )


def bump(
    center=None,
    radius: float = 1.0,
    rank: Rank = Rank.SCALAR,
    profile=None,
    amplitude: float = 1.0,
) -> TestFunction:
    """*Bump* ``exp(-1/(1-ρ²))`` com ``ρ = |x-x0|/r``, nulo para ``ρ >= 1``.

    Raises:
        TestFunctionError: Se ``radius <= 0``.
    """
    if not (np.isfinite(radius) and radius > 0):
        raise TestFunctionError(f"Raio r deve ser positivo, recebido {radius}.")
    return TestFunction(
        family="bump",
        rank=rank,
        profile=_profile(profile, rank),
        center=_vector4(center, "center"),
        width=float(radius),
        amplitude=float(amplitude),
    )


def sum_of(*parts: TestFunction) -> TestFunction:
    """Soma pontual de funções do mesmo posto."""
    if not parts:
        raise TestFunctionError("Soma sem parcelas.")
    ranks = {part.rank for part in parts}
    if len(ranks) != 1:
        raise TestFunctionError(
            f"Parcelas com postos diferentes: {sorted(r.value for r in ranks)}."
        )
    return TestFunction(family="sum", rank=parts[0].rank, parts=tuple(parts))


def scaled(f: TestFunction, factor: float) -> TestFunction:
    """Múltiplo escalar ``factor * f``."""
    if not np.isfinite(factor):
        raise TestFunctionError(f"Fator não finito: {factor}.")
    return TestFunction(family="scaled", rank=f.rank, parts=(f,), factor=float(factor))


def translate(f: TestFunction, a) -> TestFunction:
    """Retorna ``f_a(x) = f(x + a)`` por reavaliação analítica.

    O suporte é deslocado por ``-a``; a fase da modulação absorve ``q.a``.
    """
    shift = _vector4(a, "a")
    if f.family in ("sum", "scaled"):
        return TestFunction(
            family=f.family,
            rank=f.rank,
            parts=tuple(translate(part, shift) for part in f.parts),
            factor=f.factor,
        )
    center = tuple(c - s for c, s in zip(f.center, shift))
    phase = f.phase + _minkowski(f.q, shift) if f.family == "gaussian" else f.phase
    return TestFunction(
        family=f.family,
        rank=f.rank,
        profile=f.profile,
        center=center,
        width=f.width,
        q=f.q,
        amplitude=f.amplitude,
        phase=float(phase),
    )


def causal_relation(f: TestFunction, g: TestFunction) -> CausalRelation:
    """Classifica a separação causal dos suportes por aritmética de intervalos.

    Para cada par de bolas, o pior caso de ``Δt² - |Δx|²`` é
    ``(|Δt| + r1 + r2)² - max(0, |Δx| - r1 - r2)²``; o resultado é o máximo
    sobre todos os pares.
    """
    f_support, g_support = f.support, g.support
    if f_support is None or g_support is None:
        return CausalRelation(Relation.INDETERMINATE, None)
    margin = -np.inf
    for a in f_support:
        for b in g_support:
            reach = a.radius + b.radius
            dt = abs(a.center[0] - b.center[0])
            dx = float(np.linalg.norm(np.subtract(a.center[1:], b.center[1:])))
            worst = (dt + reach) ** 2 - max(0.0, dx - reach) ** 2
            margin = max(margin, worst)
    relation = Relation.SPACELIKE if margin < 0 else Relation.NOT_SPACELIKE
    return CausalRelation(relation, float(margin))

