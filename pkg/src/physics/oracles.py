"""Implementações de referência por força bruta, usadas só nos testes.

Nenhuma função aqui reutiliza os caminhos principais que valida
(``algebra.permanent``, ``lattice.shell_samples``, ``algebra.vacuum_expectation``).
"""

import itertools
import logging
import time
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cubature

from src.config import NAIVE_PERMANENT_CAP, WIGHTMAN_ORACLE_CAP
from src.errors import CapExceededError, DimensionError, QuadratureError, TestFunctionError
from src.fields.lattice import Rank
from src.fields.testfunctions import TestFunction

logger = logging.getLogger(__name__)

SPECTRAL_REACH = 9.0


@dataclass(frozen=True)
class OracleReport:
    """Valor de referência com método e custo."""

    value: complex
    method: str
    cost: str


def _elapsed(start: float) -> str:
    return f"{time.perf_counter() - start:.3f} s"


def permanent_naive(matrix, cap: int = NAIVE_PERMANENT_CAP) -> OracleReport:
    """``Σ_σ Π_i M_{i,σ(i)}`` sobre todas as ``n!`` permutações."""
    start = time.perf_counter()
    m = np.asarray(matrix, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"Permanente exige matriz quadrada, shape {m.shape}.")
    n = m.shape[0]
    if n > cap:
        raise CapExceededError(f"Oráculo do permanente limitado a n <= {cap}, recebido {n}.")
    total = 0j
    for perm in itertools.permutations(range(n)):
        term = 1.0 + 0j
        for row, column in enumerate(perm):
            term *= m[row, column]
        total += term
    return OracleReport(total, "permutation-sum", _elapsed(start))


def _reach(f: TestFunction) -> float:
    if f.family in ("sum", "scaled"):
        return max(_reach(part) for part in f.parts)
    return float(np.sum(np.abs(f.q))) + SPECTRAL_REACH / f.width


def analytic_ip_oracle(
    f: TestFunction,
    g: TestFunction,
    mass: float,
    atol: float = 1e-8,
    rtol: float = 1e-9,
) -> OracleReport:
    """``∫ d³k/((2π)³ 2ω_k) conj(f~) g~`` por cubatura adaptativa 3D.

    Usa as transformadas fechadas das funções, independente de qualquer grade.

    Raises:
        TestFunctionError: Funções sem forma fechada ou não escalares.
        QuadratureError: Cubatura não convergiu.
    """
    start = time.perf_counter()
    for fn in (f, g):
        if not fn.has_closed_form or fn.rank is not Rank.SCALAR:
            raise TestFunctionError("O oráculo analítico exige funções escalares gaussianas.")
    reach = max(_reach(f), _reach(g))

    def integrand(k: np.ndarray) -> np.ndarray:
        kx, ky, kz = k[:, 0], k[:, 1], k[:, 2]
        omega = np.sqrt(kx**2 + ky**2 + kz**2 + mass**2)
        momenta = (omega, kx, ky, kz)
        value = np.conj(f.spectrum(momenta)[0]) * g.spectrum(momenta)[0]
        value = value / (2.0 * omega * (2.0 * np.pi) ** 3)
        return np.stack([value.real, value.imag], axis=-1)

    result = cubature(
        integrand,
        [-reach] * 3,
        [reach] * 3,
        rtol=rtol,
        atol=atol,
        max_subdivisions=100_000,
    )
    if result.status != "converged":
        raise QuadratureError(
            f"Cubatura não convergiu (erro estimado {np.max(result.error):.3e})."
        )
    value = complex(result.estimate[0], result.estimate[1])
    return OracleReport(value, "adaptive-cubature-gk21", _elapsed(start))


def wightman_oracle(functions: Sequence, inner, cap: int = WIGHTMAN_ORACLE_CAP) -> OracleReport:
    """Expande ``Π (a_{f_i} + a†_{f_i})`` em ``2^n`` palavras e reescreve cada uma.

    A reescrita troca sempre o par ``a a†`` mais à esquerda e mantém uma
    lista explícita de termos ``(coeficiente, palavra)``.
    """
    start = time.perf_counter()
    n = len(functions)
    if n > cap:
        raise CapExceededError(f"Oráculo de Wightman limitado a n <= {cap}, recebido {n}.")
    xi_table = {
        (i, j): complex(inner.xi(functions[i], functions[j]))
        for i in range(n)
        for j in range(n)
    }
    total = 0j
    for choice in itertools.product((False, True), repeat=n):
        pending = [(1.0 + 0j, tuple(zip(choice, range(n))))]
        while pending:
            coefficient, word = pending.pop()
            if not word:
                total += coefficient
                continue
            if word[0][0] or not word[-1][0]:
                continue
            for i in range(len(word) - 1):
                if not word[i][0] and word[i + 1][0]:
                    annihilated, created = word[i][1], word[i + 1][1]
                    pending.append((coefficient, word[:i] + (word[i + 1], word[i]) + word[i + 2:]))
                    pending.append(
                        (coefficient * xi_table[(created, annihilated)], word[:i] + word[i + 2:])
                    )
                    break
    return OracleReport(total, "word-expansion", _elapsed(start))
