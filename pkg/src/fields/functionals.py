"""Funcionais locais: árvores de expressão avaliadas ponto a ponto.

Gramática (ver ``docs/scenario_format.md``)::

    expr   := term (("+" | "-") term)*
    term   := unary ("*" unary)*
    unary  := "-" unary | power
    power  := atom ("^" INT)?
    atom   := NUMBER | SLOT | CALL "(" args ")" | "(" expr ")"

Chamadas: ``deriv(x)``, ``deriv(mu, x)``, ``eta(a, b)``, ``eps(a, b)``,
``contract(J, F)``, ``wedge(S, J)``, ``dual(F)``, ``div(x)``, ``curl(J)``,
``raise(x)``, ``lower(x)``.

Todos os tensores são guardados com índices covariantes; as contrações
aplicam a métrica explicitamente, de modo que ``raise``/``lower`` são
apenas notação.
"""

import itertools
import logging
import re
from collections.abc import Mapping
from dataclasses import dataclass

import numpy as np

from src.errors import FunctionalSyntaxError, RankError, UnboundSlotError
from src.fields.lattice import (
    ANTISYM_PAIRS,
    ETA_DIAG,
    Grid,
    Rank,
    RealField4,
    check_same_grid,
    expand_antisym,
    finite_difference,
    pack_antisym,
)

logger = logging.getLogger(__name__)

DEFAULT_SLOT_RANKS: dict[str, Rank] = {
    "J": Rank.VECTOR,
    "S": Rank.VECTOR,
    "F": Rank.ANTISYM2,
}
"""Postos padrão dos slots; qualquer outro nome é escalar."""


def _permutation_sign(perm: tuple[int, ...]) -> int:
    inversions = sum(1 for i, j in itertools.combinations(range(len(perm)), 2) if perm[i] > perm[j])
    return -1 if inversions % 2 else 1


LEVI_CIVITA: tuple[tuple[tuple[int, int, int, int], int], ...] = tuple(
    (perm, _permutation_sign(perm)) for perm in itertools.permutations(range(4))
)
"""Entradas não nulas de ``ε^{μνρσ}`` com ``ε^{0123} = +1``."""


@dataclass
class _Context:
    fields: dict[str, np.ndarray]
    grid: Grid

    def d(self, array: np.ndarray, mu: int, leading: int = 0) -> np.ndarray:
        return finite_difference(array, axis=leading + mu, spacing=self.grid.spacings[mu])


def _number(value: float) -> str:
    return repr(float(value))


# --- Nós da árvore ---


class Node:
    """Nó de expressão. Subclasses implementam posto, avaliação e impressão."""

    atomic = True

    def rank(self, slots: Mapping[str, Rank]) -> Rank:
        raise NotImplementedError

    def evaluate(self, ctx: _Context) -> np.ndarray:
        raise NotImplementedError

    def slots(self) -> frozenset[str]:
        return frozenset().union(*(child.slots() for child in self.children()))

    def children(self) -> tuple["Node", ...]:
        return ()


def _wrap(node: Node) -> str:
    return str(node) if node.atomic else f"({node})"


@dataclass(frozen=True)
class Var(Node):
    name: str

    def rank(self, slots):
        return slots.get(self.name, Rank.SCALAR)

    def evaluate(self, ctx):
        return ctx.fields[self.name]

    def slots(self):
        return frozenset({self.name})

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Const(Node):
    value: float

    @property
    def atomic(self):
        return self.value >= 0

    def rank(self, slots):
        return Rank.SCALAR

    def evaluate(self, ctx):
        return np.full((1, 1, 1, 1, 1), self.value)

    def __str__(self):
        return _number(self.value)


@dataclass(frozen=True)
class Power(Node):
    child: Node
    exponent: int

    def children(self):
        return (self.child,)

    def rank(self, slots):
        if self.child.rank(slots) is not Rank.SCALAR:
            raise RankError(f"Potência de um campo não escalar: {self}.")
        return Rank.SCALAR

    def evaluate(self, ctx):
        return self.child.evaluate(ctx) ** self.exponent

    def __str__(self):
        return f"{_wrap(self.child)}^{self.exponent}"


@dataclass(frozen=True)
class Product(Node):
    factors: tuple[Node, ...]
    atomic = False

    def children(self):
        return self.factors

    def rank(self, slots):
        ranks = [factor.rank(slots) for factor in self.factors]
        tensorial = [r for r in ranks if r is not Rank.SCALAR]
        if len(tensorial) > 1:
            raise RankError(
                f"Produto com mais de um fator tensorial em {self}; use eta/contract/wedge."
            )
        return tensorial[0] if tensorial else Rank.SCALAR

    def evaluate(self, ctx):
        result = self.factors[0].evaluate(ctx)
        for factor in self.factors[1:]:
            result = result * factor.evaluate(ctx)
        return result

    def __str__(self):
        parts = [
            f"({factor})" if isinstance(factor, (Sum, Scale)) else str(factor)
            for factor in self.factors
        ]
        return " * ".join(parts)


@dataclass(frozen=True)
class Sum(Node):
    terms: tuple[Node, ...]
    atomic = False

    def children(self):
        return self.terms

    def rank(self, slots):
        ranks = {term.rank(slots) for term in self.terms}
        if len(ranks) != 1:
            raise RankError(
                f"Soma de postos diferentes em {self}: {sorted(r.value for r in ranks)}."
            )
        return ranks.pop()

    def evaluate(self, ctx):
        result = self.terms[0].evaluate(ctx)
        for term in self.terms[1:]:
            result = result + term.evaluate(ctx)
        return result

    def __str__(self):
        return " + ".join(f"({t})" if isinstance(t, Sum) else str(t) for t in self.terms)


@dataclass(frozen=True)
class Scale(Node):
    child: Node
    factor: float
    atomic = False

    def children(self):
        return (self.child,)

    def rank(self, slots):
        return self.child.rank(slots)

    def evaluate(self, ctx):
        return self.factor * self.child.evaluate(ctx)

    def __str__(self):
        inner = f"({self.child})" if isinstance(self.child, (Sum, Scale)) else str(self.child)
        return f"{_number(self.factor)} * {inner}"


@dataclass(frozen=True)
class Deriv(Node):
    """``deriv(x)``: covetor ``∂_μ x`` de um escalar; ``deriv(mu, x)``: um eixo."""

    child: Node
    mu: int | None = None

    def children(self):
        return (self.child,)

    def rank(self, slots):
        inner = self.child.rank(slots)
        if self.mu is not None:
            return inner
        if inner is not Rank.SCALAR:
            raise RankError(f"deriv sem eixo exige escalar em {self}; use div/curl.")
        return Rank.VECTOR

    def evaluate(self, ctx):
        inner = self.child.evaluate(ctx)
        if self.mu is not None:
            return ctx.d(np.broadcast_to(inner, (inner.shape[0], *ctx.grid.shape)), self.mu, 1)
        scalar = np.broadcast_to(inner[0], ctx.grid.shape)
        return np.stack([ctx.d(scalar, mu) for mu in range(4)])

    def __str__(self):
        if self.mu is None:
            return f"deriv({self.child})"
        return f"deriv({self.mu}, {self.child})"


@dataclass(frozen=True)
class _Binary(Node):
    left: Node
    right: Node
    keyword = ""

    def children(self):
        return (self.left, self.right)

    def _ranks(self, slots):
        return self.left.rank(slots), self.right.rank(slots)

    def _mismatch(self, slots) -> RankError:
        a, b = self._ranks(slots)
        return RankError(f"{self.keyword}({a.value}, {b.value}) não suportado em {self}.")

    def __str__(self):
        return f"{self.keyword}({self.left}, {self.right})"


class Eta(_Binary):
    """Contração total com a métrica: ``a_μ b^μ`` ou ``a_{μν} b^{μν}``."""

    keyword = "eta"

    def rank(self, slots):
        a, b = self._ranks(slots)
        if a is b and a is not Rank.SCALAR:
            return Rank.SCALAR
        raise self._mismatch(slots)

    def evaluate(self, ctx):
        a, b = self.left.evaluate(ctx), self.right.evaluate(ctx)
        if a.shape[0] == 4:
            return sum(ETA_DIAG[mu] * a[mu] * b[mu] for mu in range(4))[None]
        total = 0.0
        for index, (mu, nu) in enumerate(ANTISYM_PAIRS):
            total = total + ETA_DIAG[mu] * ETA_DIAG[nu] * a[index] * b[index]
        return 2.0 * total[None]


class Eps(_Binary):
    """``ε^{μρσα} J_μ F_{ρσ}`` (vetor) ou ``ε^{μνρσ} F_{μν} G_{ρσ}`` (escalar)."""

    keyword = "eps"

    def rank(self, slots):
        a, b = self._ranks(slots)
        if (a, b) == (Rank.VECTOR, Rank.ANTISYM2):
            return Rank.VECTOR
        if (a, b) == (Rank.ANTISYM2, Rank.ANTISYM2):
            return Rank.SCALAR
        raise self._mismatch(slots)

    def evaluate(self, ctx):
        a, b = self.left.evaluate(ctx), self.right.evaluate(ctx)
        g = expand_antisym(b)
        if a.shape[0] == 4:
            out = [0.0] * 4
            for (mu, rho, sigma, alpha), sign in LEVI_CIVITA:
                out[alpha] = out[alpha] + sign * a[mu] * g[rho, sigma]
            return np.stack([ETA_DIAG[alpha] * out[alpha] for alpha in range(4)])
        f = expand_antisym(a)
        total = 0.0
        for (mu, nu, rho, sigma), sign in LEVI_CIVITA:
            total = total + sign * f[mu, nu] * g[rho, sigma]
        return total[None]


class Contract(_Binary):
    """``J^μ F_{μα}``."""

    keyword = "contract"

    def rank(self, slots):
        if self._ranks(slots) == (Rank.VECTOR, Rank.ANTISYM2):
            return Rank.VECTOR
        raise self._mismatch(slots)

    def evaluate(self, ctx):
        j, f = self.left.evaluate(ctx), expand_antisym(self.right.evaluate(ctx))
        return np.stack([
            sum(ETA_DIAG[mu] * j[mu] * f[mu, alpha] for mu in range(4))
            for alpha in range(4)
        ])


class Wedge(_Binary):
    """``S_{[μ} J_{α]} = ½(S_μ J_α - S_α J_μ)``."""

    keyword = "wedge"

    def rank(self, slots):
        if self._ranks(slots) == (Rank.VECTOR, Rank.VECTOR):
            return Rank.ANTISYM2
        raise self._mismatch(slots)

    def evaluate(self, ctx):
        s, j = self.left.evaluate(ctx), self.right.evaluate(ctx)
        return np.stack([0.5 * (s[mu] * j[nu] - s[nu] * j[mu]) for mu, nu in ANTISYM_PAIRS])


@dataclass(frozen=True)
class _Unary(Node):
    child: Node
    keyword = ""

    def children(self):
        return (self.child,)

    def _mismatch(self, slots) -> RankError:
        return RankError(
            f"{self.keyword} não aceita posto {self.child.rank(slots).value} em {self}."
        )

    def __str__(self):
        return f"{self.keyword}({self.child})"


class Dual(_Unary):
    """``ε_{μα}^{ρσ} F_{ρσ}``."""

    keyword = "dual"

    def rank(self, slots):
        if self.child.rank(slots) is Rank.ANTISYM2:
            return Rank.ANTISYM2
        raise self._mismatch(slots)

    def evaluate(self, ctx):
        f = expand_antisym(self.child.evaluate(ctx))
        out = np.zeros_like(f)
        for (mu, alpha, rho, sigma), sign in LEVI_CIVITA:
            out[mu, alpha] += sign * ETA_DIAG[mu] * ETA_DIAG[alpha] * f[rho, sigma]
        return pack_antisym(out)


class Div(_Unary):
    """Divergência ``∂^μ F_{μα}`` (vetor) ou ``∂^μ J_μ`` (escalar)."""

    keyword = "div"

    def rank(self, slots):
        inner = self.child.rank(slots)
        if inner is Rank.ANTISYM2:
            return Rank.VECTOR
        if inner is Rank.VECTOR:
            return Rank.SCALAR
        raise self._mismatch(slots)

    def evaluate(self, ctx):
        inner = self.child.evaluate(ctx)
        if inner.shape[0] == 4:
            return sum(ETA_DIAG[mu] * ctx.d(inner[mu], mu) for mu in range(4))[None]
        f = expand_antisym(inner)
        return np.stack([
            sum(ETA_DIAG[mu] * ctx.d(f[mu, alpha], mu) for mu in range(4))
            for alpha in range(4)
        ])


class Curl(_Unary):
    """``∂_{[α} J_{μ]} = ½(∂_α J_μ - ∂_μ J_α)``."""

    keyword = "curl"

    def rank(self, slots):
        if self.child.rank(slots) is Rank.VECTOR:
            return Rank.ANTISYM2
        raise self._mismatch(slots)

    def evaluate(self, ctx):
        j = self.child.evaluate(ctx)
        return np.stack([
            0.5 * (ctx.d(j[mu], alpha) - ctx.d(j[alpha], mu)) for alpha, mu in ANTISYM_PAIRS
        ])


class Raise(_Unary):
    keyword = "raise"

    def rank(self, slots):
        inner = self.child.rank(slots)
        if inner is Rank.SCALAR:
            raise self._mismatch(slots)
        return inner

    def evaluate(self, ctx):
        return self.child.evaluate(ctx)


class Lower(Raise):
    keyword = "lower"


BINARY_CALLS: dict[str, type[_Binary]] = {
    "eta": Eta,
    "eps": Eps,
    "contract": Contract,
    "wedge": Wedge,
}
UNARY_CALLS: dict[str, type[_Unary]] = {
    "dual": Dual,
    "div": Div,
    "curl": Curl,
    "raise": Raise,
    "lower": Lower,
}


# --- Parser ---

_TOKEN = re.compile(
    r"\s*(?:(?P<number>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*^(),]))"
)


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    position: int


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    position = 0
    while position < len(text):
        if text[position:].strip() == "":
            break
        match = _TOKEN.match(text, position)
        if match is None or match.end() == position:
            offset = len(text[position:]) - len(text[position:].lstrip())
            raise FunctionalSyntaxError(
                f"Caractere inesperado {text[position + offset]!r}", position + offset
            )
        kind = match.lastgroup
        start = match.start(kind)
        tokens.append(_Token(kind, match.group(kind), start))
        position = match.end()
    tokens.append(_Token("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str) -> None:
        self.tokens = _tokenize(text)
        self.index = 0

    @property
    def current(self) -> _Token:
        return self.tokens[self.index]

    def advance(self) -> _Token:
        token = self.current
        self.index += 1
        return token

    def expect(self, text: str) -> _Token:
        if self.current.text != text:
            found = self.current.text or "fim da expressão"
            raise FunctionalSyntaxError(f"Esperado {text!r}, encontrado {found!r}", self.current.position)
        return self.advance()

    def parse(self) -> Node:
        if self.current.kind == "end":
            raise FunctionalSyntaxError("Expressão vazia", 0)
        node = self.expr()
        if self.current.kind != "end":
            raise FunctionalSyntaxError(f"Token inesperado {self.current.text!r}", self.current.position)
        return node

    def expr(self) -> Node:
        terms = [self.term()]
        while self.current.text in ("+", "-"):
            negate = self.advance().text == "-"
            term = self.term()
            terms.append(_negate(term) if negate else term)
        return terms[0] if len(terms) == 1 else Sum(tuple(terms))

    def term(self) -> Node:
        factors = [self.unary()]
        while self.current.text == "*":
            self.advance()
            factors.append(self.unary())
        if len(factors) == 1:
            return factors[0]
        if isinstance(factors[0], Const):
            rest = factors[1:]
            return Scale(rest[0] if len(rest) == 1 else Product(tuple(rest)), factors[0].value)
        return Product(tuple(factors))

    def unary(self) -> Node:
        if self.current.text == "-":
            self.advance()
            return _negate(self.unary())
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.current.text != "^":
            return base
        self.advance()
        token = self.advance()
        if token.kind != "number" or not token.text.isdigit() or int(token.text) < 1:
            raise FunctionalSyntaxError(
                f"Expoente deve ser inteiro >= 1, encontrado {token.text!r}", token.position
            )
        return Power(base, int(token.text))

    def atom(self) -> Node:
        token = self.current
        if token.kind == "number":
            self.advance()
            return Const(float(token.text))
        if token.text == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        if token.kind == "ident":
            self.advance()
            if self.current.text != "(":
                return Var(token.text)
            return self.call(token)
        found = token.text or "fim da expressão"
        raise FunctionalSyntaxError(f"Token inesperado {found!r}", token.position)

    def call(self, name: _Token) -> Node:
        self.expect("(")
        if name.text == "deriv":
            mu = None
            if self.current.kind == "number" and self.tokens[self.index + 1].text == ",":
                axis = self.advance()
                if axis.text not in ("0", "1", "2", "3"):
                    raise FunctionalSyntaxError(f"Eixo inválido {axis.text!r}", axis.position)
                mu = int(axis.text)
                self.expect(",")
            child = self.expr()
            self.expect(")")
            return Deriv(child, mu)
        args = [self.expr()]
        while self.current.text == ",":
            self.advance()
            args.append(self.expr())
        closing = self.expect(")")
        if name.text in BINARY_CALLS:
            if len(args) != 2:
                raise FunctionalSyntaxError(f"{name.text} exige 2 argumentos", closing.position)
            return BINARY_CALLS[name.text](args[0], args[1])
        if name.text in UNARY_CALLS:
            if len(args) != 1:
                raise FunctionalSyntaxError(f"{name.text} exige 1 argumento", closing.position)
            return UNARY_CALLS[name.text](args[0])
        raise FunctionalSyntaxError(f"Função desconhecida {name.text!r}", name.position)


def _negate(node: Node) -> Node:
    if isinstance(node, Const):
        return Const(-node.value)
    return Scale(node, -1.0)


# --- API pública ---


@dataclass(frozen=True)
class LocalFunctional:
    """Funcional local validado.

    Attributes:
        tree: Raiz da árvore de expressão.
        rank: Posto da saída.
        slot_ranks: Posto declarado de cada slot usado.
    """

    tree: Node
    rank: Rank
    slot_ranks: tuple[tuple[str, Rank], ...]

    @property
    def slots(self) -> frozenset[str]:
        return self.tree.slots()

    @property
    def text(self) -> str:
        return str(self.tree)

    def __str__(self) -> str:
        return self.text


def parse_functional(text: str, slot_ranks: Mapping[str, Rank] | None = None) -> LocalFunctional:
    """Analisa uma expressão e infere o posto da saída.

    Args:
        text: Expressão na gramática do módulo.
        slot_ranks: Posto de cada slot; ausentes usam ``DEFAULT_SLOT_RANKS`` ou escalar.

    Returns:
        Funcional validado, impresso na forma canônica por ``str``.

    Raises:
        FunctionalSyntaxError: Erro de sintaxe (com posição).
        RankError: Postos incompatíveis.
    """
    tree = _Parser(text).parse()
    ranks = {**DEFAULT_SLOT_RANKS, **(slot_ranks or {})}
    used = {name: ranks.get(name, Rank.SCALAR) for name in sorted(tree.slots())}
    rank = tree.rank(used)
    return LocalFunctional(tree=tree, rank=rank, slot_ranks=tuple(used.items()))


def eval_functional(functional: LocalFunctional, bindings: Mapping[str, RealField4]) -> RealField4:
    """Avalia o funcional ponto a ponto sobre campos amostrados.

    Raises:
        UnboundSlotError: Slot sem campo associado.
        RankError: Campo com posto diferente do declarado.
        GridMismatchError: Campos em grades diferentes.
    """
    fields: dict[str, np.ndarray] = {}
    bound: list[RealField4] = []
    for name, rank in functional.slot_ranks:
        if name not in bindings or bindings[name] is None:
            raise UnboundSlotError(f"Slot {name!r} sem função associada em {functional}.")
        value = bindings[name]
        if value.rank is not rank:
            raise RankError(
                f"Slot {name!r} declarado {rank.value}, recebeu campo {value.rank.value}."
            )
        fields[name] = value.samples
        bound.append(value)
    if not bound:
        raise UnboundSlotError(f"Funcional {functional} não usa nenhum slot.")
    grid = check_same_grid(*bound)
    result = functional.tree.evaluate(_Context(fields, grid))
    shape = (functional.rank.n_components, *grid.shape)
    return RealField4(grid, functional.rank, np.array(np.broadcast_to(result, shape), dtype=float))
