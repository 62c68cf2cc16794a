"""Hierarquia de exceções do motor.

``InputError`` cobre entradas inválidas (código de saída 2 no CLI);
``NumericalError`` cobre falhas numéricas (código de saída 3).
"""


class FieldError(Exception):
    """Base de todas as exceções do projeto."""


class InputError(FieldError, ValueError):
    """Entrada inválida: parâmetros, nomes ou formatos."""


class GridError(InputError):
    """Especificação de grade inválida ou acima do limite de memória."""


class TestFunctionError(InputError):
    """Parâmetros inválidos para uma função teste."""

    __test__ = False


class FunctionalSyntaxError(InputError):
    """Erro de sintaxe em uma expressão de funcional local.

    Attributes:
        position: Posição (0-based) do caractere onde o erro foi detectado.
    """

    def __init__(self, message: str, position: int) -> None:
        super().__init__(f"{message} (posição {position})")
        self.position = position


class RankError(InputError):
    """Posto tensorial incompatível."""


class UnboundSlotError(InputError):
    """Slot de função teste sem valor associado."""


class GridMismatchError(InputError):
    """Campos definidos sobre grades diferentes."""


class CapExceededError(InputError):
    """Tamanho acima do limite configurado (permanente, palavra, Wightman)."""


class DimensionError(InputError):
    """Dimensões incompatíveis entre vetores e matrizes."""


class ModelError(InputError):
    """Modelo não linear mal formado."""


class ScenarioError(InputError):
    """Arquivo de cenário inválido."""


class NumericalError(FieldError, ArithmeticError):
    """Falha numérica durante o cálculo."""


class ShellCoverageError(NumericalError):
    """Nenhum ponto da camada de massa cabe na banda da grade."""


class SingularGeometryError(NumericalError):
    """Matriz F singular (det F = 0)."""


class NullStateError(NumericalError):
    """Direção de estado com norma nula, ξ(g,g) = 0."""


class BoxTooSmallError(NumericalError):
    """Caixa de integração não contém a massa da densidade."""


class QuadratureError(NumericalError):
    """Quadratura adaptativa não convergiu."""


class PsdViolationError(NumericalError):
    """Matriz de Gram não certificada como positiva semidefinida."""
