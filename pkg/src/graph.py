"""Pipeline de execução de um cenário.

Orquestra carregamento, diagnósticos da grade, produção das saídas e
escrita do manifesto usando LangGraph com roteamento condicional.
"""

import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

from langgraph.graph import END, START, StateGraph

from src.config import CONVENTIONS, VERSION, get_memory_cap
from src.errors import FieldError, InputError, NumericalError, PsdViolationError
from src.fields.lattice import make_grid
from src.physics.algebra import XiEngine
from src.scenario.loader import OutputSpec, load_scenario
from src.scenario.outputs import OUTPUT_MAP, grid_diagnostics, write_json
from src.state import ScenarioState

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_INPUT = 2
EXIT_NUMERICAL = 3

MANIFEST_FILE = "manifest.json"


@dataclass
class RunManifest:
    """Registro reprodutível de uma execução (sem carimbo de tempo).

    Attributes:
        scenario_path: Arquivo executado.
        scenario_hash: ``sha256`` do arquivo mais as sobrescritas.
        conventions: Convenções de sinal e unidades.
        version: Versão do motor.
        grid: Parâmetros da grade.
        model: Família e rótulos dos termos.
        settings: Ajustes efetivos.
        diagnostics: Vazamento de borda e cobertura da camada.
        outputs: ``nome -> {kind, files, summary}``.
        failures: Falhas registradas.
        exit_code: Código de saída do processo.
    """

    scenario_path: str
    scenario_hash: str = ""
    conventions: str = CONVENTIONS
    version: str = VERSION
    grid: dict = field(default_factory=dict)
    model: dict = field(default_factory=dict)
    settings: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)
    exit_code: int = EXIT_OK

    @property
    def files(self) -> list[str]:
        return [name for output in self.outputs.values() for name in output["files"]]

    def to_dict(self) -> dict:
        return asdict(self)


def _failure(output: str, error: BaseException) -> dict[str, str]:
    return {"output": output, "error": type(error).__name__, "message": str(error)}


def _code_for(error: BaseException) -> int:
    if isinstance(error, (InputError, OSError)):
        return EXIT_INPUT
    if isinstance(error, NumericalError):
        return EXIT_NUMERICAL
    return EXIT_INTERNAL


def _exit_code(codes: list[int]) -> int:
    for code in (EXIT_INPUT, EXIT_NUMERICAL, EXIT_INTERNAL):
        if code in codes:
            return code
    return EXIT_OK


def load_node(state: ScenarioState) -> dict:
    """Lê o cenário, constrói a grade e o motor de ``ξ``."""
    try:
        scenario = load_scenario(
            state["scenario_path"], state.get("overrides", []), state.get("settings") or {}
        )
        components = max(
            [rank.n_components for rank in scenario.model.slot_ranks.values()]
            + [term.kernel.rank.n_components for term in scenario.model.terms]
        )
        grid = make_grid(scenario.grid_spec, components=components, memory_cap=get_memory_cap())
        engine = XiEngine(
            scenario.model, grid, scenario.settings.method, scenario.settings.threads
        )
    except (FieldError, OSError) as e:
        logger.error("Erro ao carregar o cenário %s: %s", state["scenario_path"], e)
        return {
            "failures": [_failure("load", e)],
            "exit_code": _code_for(e),
            "should_end": True,
        }
    return {"scenario": scenario, "engine": engine, "should_end": False}


def diagnostics_node(state: ScenarioState) -> dict:
    """Calcula vazamento de borda por função e cobertura da camada por massa."""
    diagnostics = grid_diagnostics(state["scenario"], state["engine"].grid)
    return {"diagnostics": diagnostics}


def _selected_outputs(state: ScenarioState) -> list[OutputSpec]:
    scenario = state["scenario"]
    only = state.get("only")
    if only is None:
        return list(scenario.outputs)
    selected = [spec for spec in scenario.outputs if spec.kind in only or spec.name in only]
    if not selected and only == ["gram"]:
        names = list(scenario.probes) or list(scenario.functions)
        selected = [OutputSpec("check_gram", "gram", {"functions": names})]
    return selected


def outputs_node(state: ScenarioState) -> dict:
    """Executa cada saída pedida e registra arquivos, resumos e falhas.

    Uma saída que falha é registrada e o pipeline segue para a próxima.
    """
    scenario = state["scenario"]
    engine = state["engine"]
    out_dir = Path(state["out_dir"])
    failures = list(state.get("failures", []))
    summaries: dict = {}
    files: list[str] = []
    codes: list[int] = []

    for spec in _selected_outputs(state):
        output = OUTPUT_MAP.get(spec.kind)
        if output is None:
            logger.warning("Tipo de saída desconhecido: %s", spec.kind)
            failures.append({"output": spec.name, "error": "ScenarioError", "message": spec.kind})
            codes.append(EXIT_INPUT)
            continue

        logger.info("Saída %s (%s)", spec.name, spec.kind)
        try:
            result = output(scenario, spec, engine, out_dir)
        except Exception as e:
            if isinstance(e, FieldError):
                logger.error("Erro na saída %s: %s", spec.name, e)
            else:
                logger.exception("Erro inesperado na saída %s", spec.name)
            failures.append(_failure(spec.name, e))
            codes.append(_code_for(e))
            continue

        files += result.files
        summaries[spec.name] = {"kind": spec.kind, "files": result.files, "summary": result.summary}
        if not result.certified:
            violation = PsdViolationError(
                f"Gram {spec.name} não certificada como semidefinida positiva."
            )
            failures.append(_failure(spec.name, violation))
            codes.append(EXIT_NUMERICAL)

    return {
        "files": files,
        "summaries": summaries,
        "failures": failures,
        "exit_code": _exit_code(codes),
    }


def manifest_node(state: ScenarioState) -> dict:
    """Monta o manifesto e o grava em ``out_dir``."""
    scenario = state.get("scenario")
    manifest = RunManifest(
        scenario_path=str(state["scenario_path"]),
        failures=list(state.get("failures", [])),
        exit_code=state.get("exit_code", EXIT_OK),
        diagnostics=state.get("diagnostics", {}),
        outputs=state.get("summaries", {}),
    )
    if scenario is not None:
        manifest.scenario_hash = scenario.digest
        manifest.grid = asdict(scenario.grid_spec)
        manifest.model = {
            "family": scenario.model_family,
            "terms": [
                {"label": term.label, "kernel": term.kernel.kind.value, "weight": term.weight}
                for term in scenario.model.terms
            ],
        }
        manifest.settings = asdict(scenario.settings)
    out_dir = Path(state["out_dir"])
    try:
        write_json(out_dir / MANIFEST_FILE, manifest.to_dict())
    except OSError as e:
        logger.error("Erro ao gravar o manifesto em %s: %s", out_dir, e)
        manifest.failures.append(_failure("manifest", e))
        manifest.exit_code = manifest.exit_code or EXIT_INPUT
    return {"manifest": manifest, "exit_code": manifest.exit_code}


def route_after_load(state: ScenarioState) -> str:
    """Pula direto para o manifesto se o carregamento falhou."""
    if state.get("should_end", False):
        return "manifest"
    return "diagnostics"


# --- Construção do grafo ---


def build_graph() -> StateGraph:
    """Constrói e compila o grafo de execução de cenários.

    Returns:
        Grafo compilado pronto para ``invoke``.
    """
    builder = StateGraph(ScenarioState)

    builder.add_node("load", load_node)
    builder.add_node("diagnostics", diagnostics_node)
    builder.add_node("outputs", outputs_node)
    builder.add_node("manifest", manifest_node)

    builder.add_edge(START, "load")
    builder.add_conditional_edges(
        "load", route_after_load, {"diagnostics": "diagnostics", "manifest": "manifest"}
    )
    builder.add_edge("diagnostics", "outputs")
    builder.add_edge("outputs", "manifest")
    builder.add_edge("manifest", END)

    return builder.compile()


graph = build_graph()


def run_scenario(
    path,
    out_dir,
    overrides=(),
    settings: dict | None = None,
    only: list[str] | None = None,
) -> RunManifest:
    """Executa um cenário completo e devolve o manifesto.

    Args:
        path: Arquivo YAML do cenário.
        out_dir: Diretório de saída (criado se necessário).
        overrides: Sobrescritas ``chave.pontilhada=valor``.
        settings: Ajustes da CLI com precedência sobre o arquivo.
        only: Restringe as saídas executadas (por tipo ou por nome).

    Returns:
        Manifesto com arquivos, diagnósticos, falhas e código de saída.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    initial: ScenarioState = {
        "scenario_path": str(path),
        "out_dir": str(out),
        "overrides": list(overrides),
        "settings": dict(settings or {}),
        "only": only,
        "failures": [],
        "files": [],
        "summaries": {},
        "diagnostics": {},
        "exit_code": EXIT_OK,
        "should_end": False,
    }
    final = graph.invoke(initial)
    manifest = final["manifest"]
    logger.info(
        "Cenário %s concluído: %d arquivos, %d falhas, código %d.",
        path,
        len(manifest.files),
        len(manifest.failures),
        manifest.exit_code,
    )
    return manifest
