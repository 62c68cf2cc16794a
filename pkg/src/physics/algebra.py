"""Camada algébrica: ξ, matrizes de Gram, permanentes e valores esperados.

Os valores esperados são calculados diretamente das relações
``[a_g, a†_f] = ξ(f, g)`` e ``a_f|0⟩ = 0``, sem construir espaço de Hilbert.
"""

import logging
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, replace
from enum import Enum
from typing import Protocol

import numpy as np

from src.config import PERMANENT_CAP, PSD_TOL, WIGHTMAN_CAP, WORD_CAP
from src.errors import (
    CapExceededError,
    DimensionError,
    FieldError,
    FunctionalSyntaxError,
    InputError,
    ModelError,
    NullStateError,
    UnboundSlotError,
)
from src.fields.functionals import LocalFunctional, eval_functional, parse_functional
from src.fields.kernels import Kernel, ShellValue, kernel_value, translated_autocorrelation
from src.fields.lattice import Grid, Rank, RealField4, ShellSamples, fft4, shell_samples
from src.fields.testfunctions import TestFunction

logger = logging.getLogger(__name__)


class InnerProduct(Protocol):
    """Qualquer objeto que forneça ``ξ(f, g)``."""

    def xi(self, f, g) -> complex: ...


# --- Modelo não linear ---


@dataclass(frozen=True)
class ModelTerm:
    """Um termo ``λ_i (P_i[f], P_i[g])_i`` do modelo.

    Attributes:
        functional: Funcional local ``P_i``.
        kernel: Núcleo da camada de massa.
        weight: Peso ``λ_i >= 0``.
        norm_scaled: Usa ``P[f] (P[f], P[f])_i`` no lugar de ``P[f]``.
        label: Rótulo para diagnósticos.
    """

    functional: LocalFunctional
    kernel: Kernel
    weight: float = 1.0
    norm_scaled: bool = False
    label: str = ""


@dataclass(frozen=True)
class NonlinearModel:
    """Lista ordenada de termos que define ``ξ(f,g) = Σ λ_i (P_i[f], P_i[g])_i``."""

    terms: tuple[ModelTerm, ...]

    def __post_init__(self) -> None:
        if not self.terms:
            raise ModelError("Modelo sem termos.")
        ranks: dict[str, Rank] = {}
        for index, term in enumerate(self.terms):
            name = term.label or f"#{index}"
            if not (np.isfinite(term.weight) and term.weight >= 0):
                raise ModelError(f"Peso do termo {name} deve ser >= 0, recebido {term.weight}.")
            if term.functional.rank is not term.kernel.rank:
                raise ModelError(
                    f"Termo {name}: funcional de posto {term.functional.rank.value} "
                    f"com núcleo {term.kernel.kind.value}."
                )
            for slot, rank in term.functional.slot_ranks:
                if ranks.setdefault(slot, rank) is not rank:
                    raise ModelError(f"Slot {slot!r} com postos diferentes entre termos.")

    @property
    def slot_ranks(self) -> dict[str, Rank]:
        ranks: dict[str, Rank] = {}
        for term in self.terms:
            ranks.update(term.functional.slot_ranks)
        return ranks

    @property
    def slots(self) -> tuple[str, ...]:
        return tuple(sorted(self.slot_ranks))

    @classmethod
    def from_terms(
        cls,
        terms: Iterable[tuple[str, Kernel, float]],
        slot_ranks: Mapping[str, Rank] | None = None,
    ) -> "NonlinearModel":
        """Constrói o modelo a partir de ``(expressão, núcleo, peso)``."""
        built = tuple(
            ModelTerm(parse_functional(text, slot_ranks), kernel, float(weight), label=text)
            for text, kernel, weight in terms
        )
        return cls(built)


def free_scalar_model(mass: float, slot: str = "f") -> NonlinearModel:
    """Campo livre: um único termo identidade com núcleo escalar."""
    return NonlinearModel.from_terms([(slot, Kernel.scalar(mass), 1.0)])


def _relabel(error: FieldError, prefix: str) -> FieldError:
    if isinstance(error, FunctionalSyntaxError):
        return error
    try:
        return type(error)(f"{prefix}: {error}")
    except TypeError:
        return error


class XiEngine:
    """Avalia ``ξ`` sobre uma grade fixa, com cache de amostras na camada.

    Uma sonda (*probe*) é uma ``TestFunction`` (modelos de um único slot)
    ou um mapeamento ``slot -> TestFunction | None``; slots ausentes valem
    o campo nulo.
    """

    def __init__(
        self,
        model: NonlinearModel,
        grid: Grid,
        method: str = "direct",
        workers: int | None = None,
    ) -> None:
        self.model = model
        self.grid = grid
        self.method = method
        self.workers = workers
        self._samples: dict[tuple, ShellSamples | None] = {}
        self._values: dict[tuple, ShellValue] = {}

    def bindings(self, probe) -> dict[str, TestFunction | None]:
        """Normaliza uma sonda para ``slot -> função``."""
        if hasattr(probe, "as_bindings"):
            probe = probe.as_bindings()
        if isinstance(probe, TestFunction):
            slots = self.model.slots
            if len(slots) != 1:
                raise UnboundSlotError(
                    f"Modelo com slots {slots}: use um mapeamento slot -> função."
                )
            return {slots[0]: probe}
        bound = dict(probe)
        unknown = sorted(set(bound) - set(self.model.slots))
        if unknown:
            raise UnboundSlotError(f"Slots desconhecidos pelo modelo: {unknown}.")
        if not any(value is not None for value in bound.values()):
            raise UnboundSlotError("Sonda sem nenhuma função associada.")
        return bound

    def key(self, probe) -> tuple:
        bound = self.bindings(probe)
        return tuple(sorted((slot, fn) for slot, fn in bound.items() if fn is not None))

    def term_samples(self, probe, index: int) -> ShellSamples | None:
        """Amostras na camada de ``P_i[probe]``; ``None`` se o termo não vê a sonda."""
        cache_key = (self.key(probe), index)
        if cache_key in self._samples:
            return self._samples[cache_key]
        term = self.model.terms[index]
        bound = self.bindings(probe)
        slot_ranks = dict(term.functional.slot_ranks)
        if all(bound.get(slot) is None for slot in slot_ranks):
            self._samples[cache_key] = None
            return None
        fields = {
            slot: bound[slot].sample(self.grid)
            if bound.get(slot) is not None
            else RealField4.zeros(self.grid, rank)
            for slot, rank in slot_ranks.items()
        }
        try:
            evaluated = eval_functional(term.functional, fields)
            samples = shell_samples(
                fft4(evaluated, self.workers), term.kernel.mass, self.method, self.workers
            )
            if term.norm_scaled:
                norm = kernel_value(term.kernel, samples, samples).value.real
                samples = replace(samples, values=samples.values * norm)
        except FieldError as error:
            raise _relabel(error, f"termo {index} ({term.label})") from error
        self._samples[cache_key] = samples
        return samples

    def term_values(self, f, g, translation=None) -> list[ShellValue]:
        """Contribuição ponderada de cada termo para ``ξ(f, g)``."""
        same = self.key(f) == self.key(g)
        values: list[ShellValue] = []
        for index, term in enumerate(self.model.terms):
            a = self.term_samples(f, index)
            b = self.term_samples(g, index)
            if a is None or b is None or term.weight == 0:
                values.append(ShellValue(0j, 0, 0))
                continue
            try:
                raw = kernel_value(term.kernel, a, b, translation, self_product=same)
            except FieldError as error:
                raise _relabel(error, f"termo {index} ({term.label})") from error
            values.append(ShellValue(term.weight * raw.value, raw.n_shell, raw.n_dropped, raw.warnings))
        return values

    def xi_value(self, f, g) -> ShellValue:
        """``ξ(f, g)`` com diagnósticos agregados."""
        cache_key = (self.key(f), self.key(g))
        if cache_key not in self._values:
            total = ShellValue(0j, 0, 0)
            for value in self.term_values(f, g):
                total = total + value
            self._values[cache_key] = total
        return self._values[cache_key]

    def xi(self, f, g) -> complex:
        return self.xi_value(f, g).value

    def translated_autocorrelation(self, f, a) -> ShellValue:
        """``ξ(f, f_a)`` pela forma de fase, sem reamostrar ``f_a``."""
        terms = []
        for index, term in enumerate(self.model.terms):
            samples = self.term_samples(f, index)
            if samples is not None and term.weight != 0:
                terms.append((term.weight, term.kernel, samples))
        return translated_autocorrelation(terms, a)


# --- Gram e permanentes ---


@dataclass(frozen=True)
class GramReport:
    """Matriz ``ξ(f_i, f_j)`` com certificação de positividade.

    Attributes:
        matrix: Matriz complexa ``n x n``.
        eigenvalues: Autovalores da parte hermitiana, em ordem crescente.
        min_eigenvalue: Menor autovalor.
        hermiticity_residual: ``max|M - M^H| / max|M|``.
        psd_certified: ``min_eigenvalue >= -tol * traço``.
        tol: Tolerância relativa ao traço.
    """

    matrix: np.ndarray
    eigenvalues: np.ndarray
    min_eigenvalue: float
    hermiticity_residual: float
    psd_certified: bool
    tol: float

    @property
    def covariance(self) -> np.ndarray:
        """``F_ij = Re ξ(f_i, f_j)``."""
        return self.matrix.real.copy()


def gram_matrix(inner: InnerProduct, functions: Sequence) -> np.ndarray:
    n = len(functions)
    matrix = np.zeros((n, n), dtype=complex)
    for i in range(n):
        for j in range(n):
            matrix[i, j] = inner.xi(functions[i], functions[j])
    return matrix


def certify_psd(matrix: np.ndarray, tol: float = PSD_TOL) -> GramReport:
    """Certifica uma matriz de Gram já calculada."""
    matrix = np.asarray(matrix, dtype=complex)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1] or matrix.shape[0] == 0:
        raise DimensionError(f"Matriz de Gram deve ser quadrada e não vazia, shape {matrix.shape}.")
    hermitian = 0.5 * (matrix + matrix.conj().T)
    eigenvalues = np.linalg.eigvalsh(hermitian)
    scale = float(np.max(np.abs(matrix)))
    residual = float(np.max(np.abs(matrix - matrix.conj().T))) / scale if scale > 0 else 0.0
    trace = float(np.trace(hermitian).real)
    minimum = float(eigenvalues[0])
    certified = minimum >= -tol * trace
    if not certified:
        logger.warning(
            "Gram não certificada: menor autovalor %.3e < -%.1e * traço (%.3e).",
            minimum,
            tol,
            trace,
        )
    return GramReport(matrix, eigenvalues, minimum, residual, bool(certified), tol)


def gram_psd(inner: InnerProduct, functions: Sequence, tol: float = PSD_TOL) -> GramReport:
    """Matriz ``ξ(f_i, f_j)`` e certificado de positividade.

    Uma violação não é exceção: o relatório marca ``psd_certified = False``.
    """
    if not functions:
        raise DimensionError("gram_psd exige ao menos uma função.")
    return certify_psd(gram_matrix(inner, functions), tol)


def permanent(matrix: np.ndarray, cap: int = PERMANENT_CAP) -> complex:
    """Permanente pela fórmula de Ryser com enumeração em código de Gray.

    ``per(A) = (-1)^n Σ_{S} (-1)^{|S|} Π_i Σ_{j∈S} a_ij``, atualizando as
    somas de linha uma coluna por passo.

    Raises:
        DimensionError: Matriz não quadrada.
        CapExceededError: ``n`` acima de ``cap``.
    """
    a = np.asarray(matrix, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"Permanente exige matriz quadrada, shape {a.shape}.")
    n = a.shape[0]
    if n == 0:
        return 1.0 + 0j
    if n > cap:
        raise CapExceededError(f"Permanente {n}x{n} acima do limite {cap}.")
    row_sums = np.zeros(n, dtype=complex)
    total = 0j
    previous = 0
    for k in range(1, 1 << n):
        gray = k ^ (k >> 1)
        changed = gray ^ previous
        column = changed.bit_length() - 1
        if gray & changed:
            row_sums += a[:, column]
        else:
            row_sums -= a[:, column]
        previous = gray
        sign = -1.0 if bin(gray).count("1") % 2 else 1.0
        total += sign * np.prod(row_sums)
    return complex((-1) ** n * total)


def normalized_permanent(inner: InnerProduct, functions: Sequence) -> complex:
    """``per[ξ(g_j, g_k)] / Π ξ(g_i, g_i)``: ``K!`` para funções paralelas."""
    matrix = gram_matrix(inner, functions)
    diagonal = np.diag(matrix).real
    if np.any(diagonal <= 0):
        raise NullStateError("Direção de estado nula: ξ(g, g) = 0.")
    return permanent(matrix) / float(np.prod(diagonal))


# --- Monômios e estados ---


class OpKind(Enum):
    ANNIHILATE = "a"
    CREATE = "a+"
    FIELD = "phi"


@dataclass(frozen=True)
class Op:
    kind: OpKind
    function: object


@dataclass(frozen=True)
class OperatorMonomial:
    """Produto ordenado de ``a_f``, ``a†_f`` e ``φ_f = a_f + a†_f``."""

    factors: tuple[Op, ...]

    @classmethod
    def parse(cls, spec: Iterable[tuple[str, object]]) -> "OperatorMonomial":
        """Constrói a partir de pares ``("a" | "a+" | "phi", função)``."""
        try:
            return cls(tuple(Op(OpKind(kind), fn) for kind, fn in spec))
        except ValueError as error:
            raise InputError(f"Operador desconhecido: {error}") from error

    @property
    def is_anti_normal_ordered(self) -> bool:
        kinds = [op.kind for op in self.factors]
        if OpKind.FIELD in kinds:
            return False
        n_a = kinds.count(OpKind.ANNIHILATE)
        return all(k is OpKind.ANNIHILATE for k in kinds[:n_a])

    def __len__(self) -> int:
        return len(self.factors)


def annihilate(f) -> Op:
    return Op(OpKind.ANNIHILATE, f)


def create(f) -> Op:
    return Op(OpKind.CREATE, f)


def field(f) -> Op:
    return Op(OpKind.FIELD, f)


@dataclass(frozen=True)
class StatePrep:
    """Vácuo (sem criadores) ou ``a†_{g1}...a†_{gJ}|0⟩`` normalizado."""

    creators: tuple = ()

    @classmethod
    def vacuum(cls) -> "StatePrep":
        return cls()

    @classmethod
    def excited(cls, *creators) -> "StatePrep":
        return cls(tuple(creators))

    @property
    def is_vacuum(self) -> bool:
        return not self.creators

    def normalization(self, inner: InnerProduct) -> float:
        """``per[ξ(g_j, g_k)]``; 1 para o vácuo."""
        if self.is_vacuum:
            return 1.0
        value = permanent(gram_matrix(inner, self.creators)).real
        if value <= 0:
            raise NullStateError(
                "Direção de estado nula: per[ξ(g_j, g_k)] = 0 (componente infinitamente suprimida)."
            )
        return value


class _Rewriter:
    """Reescrita memoizada de palavras até um número."""

    def __init__(self, inner: InnerProduct, functions: Sequence) -> None:
        self.inner = inner
        self.functions = functions
        self.memo: dict[tuple, complex] = {}
        self.xi_cache: dict[tuple[int, int], complex] = {}

    def xi(self, i: int, j: int) -> complex:
        if (i, j) not in self.xi_cache:
            self.xi_cache[(i, j)] = complex(self.inner.xi(self.functions[i], self.functions[j]))
        return self.xi_cache[(i, j)]

    def expectation(self, word: tuple[tuple[OpKind, int], ...]) -> complex:
        if not word:
            return 1.0 + 0j
        if word in self.memo:
            return self.memo[word]
        result = self._reduce(word)
        self.memo[word] = result
        return result

    def _reduce(self, word) -> complex:
        first_kind, first_fn = word[0]
        last_kind, last_fn = word[-1]
        if last_kind is OpKind.ANNIHILATE or first_kind is OpKind.CREATE:
            return 0j
        if last_kind is OpKind.FIELD:
            return self.expectation(word[:-1] + ((OpKind.CREATE, last_fn),))
        if first_kind is OpKind.FIELD:
            return self.expectation(((OpKind.ANNIHILATE, first_fn),) + word[1:])
        for position, (kind, fn) in enumerate(word):
            if kind is OpKind.FIELD:
                head, tail = word[:position], word[position + 1:]
                return self.expectation(head + ((OpKind.ANNIHILATE, fn),) + tail) + self.expectation(
                    head + ((OpKind.CREATE, fn),) + tail
                )
        kinds = [kind for kind, _ in word]
        if kinds.count(OpKind.ANNIHILATE) != kinds.count(OpKind.CREATE):
            return 0j
        p = max(i for i, kind in enumerate(kinds) if kind is OpKind.ANNIHILATE)
        g, f = word[p][1], word[p + 1][1]
        swapped = word[:p] + (word[p + 1], word[p]) + word[p + 2:]
        contracted = word[:p] + word[p + 2:]
        # a_g a†_f = a†_f a_g + ξ(f, g)
        return self.expectation(swapped) + self.xi(f, g) * self.expectation(contracted)


def _index_word(monomial: OperatorMonomial) -> tuple[tuple, list]:
    functions: list = []
    word = []
    for op in monomial.factors:
        try:
            index = functions.index(op.function)
        except ValueError:
            functions.append(op.function)
            index = len(functions) - 1
        word.append((op.kind, index))
    return tuple(word), functions


def vacuum_expectation(
    monomial: OperatorMonomial,
    inner: InnerProduct,
    method: str = "auto",
    cap: int = WORD_CAP,
) -> complex:
    """``⟨0| monômio |0⟩``.

    Args:
        monomial: Palavra em ``a``, ``a†`` e ``φ``.
        inner: Fonte de ``ξ``.
        method: ``"rewrite"`` (reescrita por comutadores), ``"permanent"``
            (só palavras anti-normais) ou ``"auto"``.
        cap: Comprimento máximo da palavra.

    Raises:
        CapExceededError: Palavra acima de ``cap``.
        InputError: ``"permanent"`` com palavra fora da ordem anti-normal.
    """
    if len(monomial) > cap:
        raise CapExceededError(f"Palavra de comprimento {len(monomial)} acima do limite {cap}.")
    if method not in ("auto", "rewrite", "permanent"):
        raise InputError(f"Método desconhecido: {method!r}.")
    if method == "auto":
        method = "permanent" if monomial.is_anti_normal_ordered else "rewrite"
    if method == "permanent":
        if not monomial.is_anti_normal_ordered:
            raise InputError("O caminho do permanente exige a ordem a...a a†...a†.")
        annihilators = [op.function for op in monomial.factors if op.kind is OpKind.ANNIHILATE]
        creators = [op.function for op in monomial.factors if op.kind is OpKind.CREATE]
        if len(annihilators) != len(creators):
            return 0j
        matrix = np.array(
            [[inner.xi(g, f) for f in annihilators] for g in creators], dtype=complex
        ).reshape(len(creators), len(annihilators))
        return permanent(matrix)
    word, functions = _index_word(monomial)
    return _Rewriter(inner, functions).expectation(word)


def all_pairings(items):
    """Gera todos os emparelhamentos perfeitos de ``items``."""
    items = list(items)
    if not items:
        yield []
        return
    first = items.pop(0)
    for i, item in enumerate(items):
        for rest in all_pairings(items[:i] + items[i + 1:]):
            yield [(first, item)] + rest


def wightman(functions: Sequence, inner: InnerProduct, cap: int = WIGHTMAN_CAP) -> complex:
    """``⟨0|φ_{f1}...φ_{fn}|0⟩`` pela soma sobre emparelhamentos.

    Cada par ``i < j`` contribui ``ξ(f_j, f_i)``.
    """
    n = len(functions)
    if n > cap:
        raise CapExceededError(f"Função de Wightman de ordem {n} acima do limite {cap}.")
    if n % 2:
        return 0j
    cache: dict[tuple[int, int], complex] = {}

    def contraction(i: int, j: int) -> complex:
        if (i, j) not in cache:
            cache[(i, j)] = complex(inner.xi(functions[j], functions[i]))
        return cache[(i, j)]

    total = 0j
    for pairing in all_pairings(range(n)):
        term = 1.0 + 0j
        for i, j in pairing:
            term *= contraction(i, j)
        total += term
    return total


@dataclass(frozen=True)
class CommutatorValue:
    """``[φ_f, φ_g] = ξ(g,f) - ξ(f,g)`` com magnitude normalizada.

    Attributes:
        value: Comutador (puramente imaginário).
        normalized: ``|value| / sqrt(ξ(f,f) ξ(g,g))``.
        symplectic: ``ω(f,g) = i(ξ(f,g) - ξ(g,f))``, real.
    """

    value: complex
    normalized: float
    symplectic: float


def commutator(f, g, inner: InnerProduct) -> CommutatorValue:
    xi_fg = complex(inner.xi(f, g))
    xi_gf = complex(inner.xi(g, f))
    value = xi_gf - xi_fg
    scale = float(np.sqrt(max(complex(inner.xi(f, f)).real, 0.0) * max(complex(inner.xi(g, g)).real, 0.0)))
    if scale > 0:
        normalized = abs(value) / scale
    elif value == 0:
        normalized = 0.0
    else:
        raise NullStateError("Comutador não normalizável: ξ(f,f) ξ(g,g) = 0.")
    return CommutatorValue(value, normalized, float((1j * (xi_fg - xi_gf)).real))


def characteristic_function(
    state: StatePrep,
    functions: Sequence,
    lam,
    inner: InnerProduct,
) -> complex:
    """``⟨e^{i Σ λ_i φ_{f_i}}⟩`` na forma fechada.

    Vácuo: ``exp(-½ λᵀFλ)``; uma partícula ``a†_g|0⟩``:
    ``(1 - |λ.S|²) exp(-½ λᵀFλ)`` com ``F_ij = Re ξ(f_i,f_j)`` e
    ``S_i = ξ(f_i, g)/sqrt(ξ(g,g))``.

    Raises:
        NullStateError: ``ξ(g, g) = 0``.
        InputError: Estados com mais de um criador (sem forma fechada).
        DimensionError: ``λ`` com tamanho diferente de ``functions``.
    """
    lam = np.asarray(lam, dtype=float).ravel()
    if lam.size != len(functions):
        raise DimensionError(f"λ com {lam.size} entradas para {len(functions)} funções.")
    covariance = gram_matrix(inner, functions).real
    gaussian = np.exp(-0.5 * lam @ covariance @ lam)
    if state.is_vacuum:
        return complex(gaussian)
    if len(state.creators) != 1:
        raise InputError(
            "Forma fechada disponível apenas para estados de uma partícula; "
            "use state_moment para estados com mais criadores."
        )
    (g,) = state.creators
    norm = complex(inner.xi(g, g)).real
    if norm <= 0:
        raise NullStateError("Direção de estado nula: ξ(g, g) = 0.")
    s = np.array([inner.xi(f, g) for f in functions], dtype=complex) / np.sqrt(norm)
    return complex((1.0 - abs(lam @ s) ** 2) * gaussian)


def state_expectation(state: StatePrep, monomial: OperatorMonomial, inner: InnerProduct) -> complex:
    """``⟨ψ| monômio |ψ⟩`` para ``|ψ⟩ ∝ a†_{g1}...a†_{gJ}|0⟩``."""
    bra = tuple(annihilate(g) for g in reversed(state.creators))
    ket = tuple(create(g) for g in state.creators)
    word = OperatorMonomial(bra + monomial.factors + ket)
    value = vacuum_expectation(word, inner, method="rewrite")
    return value / state.normalization(inner)


def state_moment(state: StatePrep, functions: Sequence, inner: InnerProduct) -> complex:
    """``⟨ψ|φ_{f1}...φ_{fn}|ψ⟩`` pelo caminho de reescrita."""
    return state_expectation(state, OperatorMonomial(tuple(field(f) for f in functions)), inner)
