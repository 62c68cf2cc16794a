"""Configuração do motor numérico: limites, tolerâncias e convenções."""

import os

from dotenv import load_dotenv

load_dotenv()

VERSION = "0.1.0"

DEFAULT_MEMORY_CAP_BYTES = 4 * 1024**3

PERMANENT_CAP = 24
NAIVE_PERMANENT_CAP = 9
WORD_CAP = 16
WIGHTMAN_CAP = 12
WIGHTMAN_ORACLE_CAP = 8
PSD_TOL = 1e-8

CONVENTIONS = (
    "metric (+,-,-,-); k.x = k0*t - kvec.xvec; "
    "FT f~(k) = int d4x exp(+i k.x) f(x); eps^{0123} = +1; hbar = 1"
)
"""Convenções citadas em todo arquivo de saída."""


def get_memory_cap() -> int:
    """Retorna o limite de memória (em bytes) para grades.

    Lê a variável de ambiente ``NLFIELD_MEMORY_CAP_BYTES``; se ausente, usa
    ``DEFAULT_MEMORY_CAP_BYTES``.

    Returns:
        Limite de memória em bytes.

    Raises:
        EnvironmentError: Se ``NLFIELD_MEMORY_CAP_BYTES`` não for um inteiro positivo.
    """
    raw = os.getenv("NLFIELD_MEMORY_CAP_BYTES")
    if raw is None or raw.strip() == "":
        return DEFAULT_MEMORY_CAP_BYTES
    try:
        cap = int(raw)
    except ValueError:
        cap = 0
    if cap <= 0:
        raise EnvironmentError(
            "Variável de ambiente NLFIELD_MEMORY_CAP_BYTES inválida: "
            f"{raw!r}. Use um inteiro positivo de bytes."
        )
    return cap


def get_threads() -> int:
    """Retorna o número de *workers* repassado ao ``scipy.fft``.

    Raises:
        EnvironmentError: Se ``NLFIELD_THREADS`` não for um inteiro positivo.
    """
    raw = os.getenv("NLFIELD_THREADS", "1")
    try:
        threads = int(raw)
    except ValueError:
        threads = 0
    if threads <= 0:
        raise EnvironmentError(
            f"Variável de ambiente NLFIELD_THREADS inválida: {raw!r}."
        )
    return threads
