"""Definição do estado compartilhado entre os nós do pipeline de cenário."""

from typing import Any, Optional, TypedDict


class ScenarioState(TypedDict, total=False):
    """Estado compartilhado entre todos os nós do grafo.

    Attributes:
        scenario_path: Arquivo de cenário a executar.
        out_dir: Diretório de saída.
        overrides: Sobrescritas ``chave.pontilhada=valor``.
        settings: Ajustes vindos da CLI (``tol``, ``threads``, ``oracle``).
        only: Tipos ou nomes de saída permitidos; ``None`` executa todas.
        scenario: Cenário validado.
        engine: Motor de ``ξ`` sobre a grade do cenário.
        diagnostics: Vazamento de borda e cobertura da camada.
        files: Arquivos escritos, relativos a ``out_dir``.
        summaries: Resumo de cada saída, por nome.
        failures: Falhas registradas (saída, tipo de erro, mensagem).
        manifest: Manifesto final da execução.
        exit_code: 0 sucesso, 2 erro de entrada, 3 falha numérica.
        should_end: Sinaliza que o pipeline deve pular para o fim.
    """

    scenario_path: str
    out_dir: str
    overrides: list[str]
    settings: dict[str, Any]
    only: Optional[list[str]]
    scenario: Any
    engine: Any
    diagnostics: dict[str, Any]
    files: list[str]
    summaries: dict[str, Any]
    failures: list[dict[str, str]]
    manifest: Any
    exit_code: int
    should_end: bool
