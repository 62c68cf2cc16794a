"""Leitura de cenários YAML: grade, funções, modelo, medições, estado e saídas.

O formato completo está em ``docs/scenario_format.md``. Sobrescritas
``chave.pontilhada=valor`` são aplicadas antes da validação; o valor é
interpretado como um escalar YAML.
"""

import hashlib
import logging
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from src.config import PSD_TOL, WIGHTMAN_CAP
from src.errors import FieldError, ScenarioError
from src.fields.functionals import parse_functional
from src.fields.kernels import Kernel
from src.fields.lattice import SHELL_METHODS, GridSpec, Rank
from src.fields.testfunctions import TestFunction, bump, gaussian_packet, scaled, sum_of, translate
from src.physics.algebra import ModelTerm, NonlinearModel, StatePrep, free_scalar_model
from src.physics.densities import GDescriptor
from src.physics.em_scenarios import EMModelParams, EMProbe, build_em_model

logger = logging.getLogger(__name__)

OUTPUT_KINDS = (
    "gram",
    "wightman",
    "commutator",
    "density",
    "sweep",
    "characteristic",
    "cross_correlation",
)

RANK_NAMES: dict[str, Rank] = {rank.value: rank for rank in Rank}

FUNCTION_KEYS: dict[str, set[str]] = {
    "gaussian": {"family", "rank", "center", "sigma", "q", "profile", "amplitude", "phase"},
    "bump": {"family", "rank", "center", "radius", "profile", "amplitude"},
    "sum": {"family", "parts"},
    "scaled": {"family", "of", "factor"},
    "translate": {"family", "of", "a"},
}

EM_PARAM_KEYS = {
    "lambdas", "kappa1", "kappa2", "kappa3", "mass_v", "sigma_t", "sigma_s",
    "lambda_div", "lambda_curl", "mass_s", "lambda_ext", "kappa_pv", "lambda_pv",
    "mass_overrides", "sigma_overrides",
}


@dataclass(frozen=True)
class RunSettings:
    """Ajustes de execução (seção ``settings`` e flags da CLI).

    Attributes:
        method: Amostragem da camada, ``"direct"`` ou ``"linear"``.
        tol: Tolerância relativa ao traço na certificação de Gram.
        threads: *Workers* do ``scipy.fft``; ``None`` lê ``NLFIELD_THREADS``.
        oracle: Compara saídas com os oráculos de força bruta.
        ridge: Regularização opcional de ``F`` nas densidades.
    """

    method: str = "direct"
    tol: float = PSD_TOL
    threads: int | None = None
    oracle: bool = False
    ridge: float = 0.0


@dataclass(frozen=True)
class OutputSpec:
    name: str
    kind: str
    params: Mapping


@dataclass(frozen=True)
class Scenario:
    """Cenário validado, pronto para execução.

    Attributes:
        path: Arquivo de origem.
        digest: ``sha256`` do arquivo mais as sobrescritas.
        grid_spec: Parâmetros da grade.
        model: Modelo não linear de ``ξ``.
        model_family: ``"free"``, ``"nonlinear"`` ou ``"em"``.
        functions: Funções teste por nome.
        probes: Sondas multi-slot por nome.
        measurements: Listas nomeadas de sondas.
        state: Estado de vácuo ou excitado.
        outputs: Produtos pedidos, na ordem do arquivo.
        settings: Ajustes de execução.
    """

    path: str
    digest: str
    grid_spec: GridSpec
    model: NonlinearModel
    model_family: str
    functions: dict[str, TestFunction]
    probes: dict[str, object] = field(default_factory=dict)
    measurements: dict[str, tuple[str, ...]] = field(default_factory=dict)
    state: StatePrep = field(default_factory=StatePrep.vacuum)
    outputs: tuple[OutputSpec, ...] = ()
    settings: RunSettings = field(default_factory=RunSettings)

    def probe(self, name: str):
        """Resolve um nome de sonda ou de função."""
        if name in self.probes:
            return self.probes[name]
        if name in self.functions:
            return self.functions[name]
        raise ScenarioError(f"Nome desconhecido no cenário: {name!r}.")

    def names(self, ref) -> tuple[str, ...]:
        """Expande uma referência: nome de medição ou lista de nomes."""
        if isinstance(ref, str):
            if ref in self.measurements:
                return self.measurements[ref]
            return (ref,)
        if isinstance(ref, Sequence):
            return tuple(str(item) for item in ref)
        raise ScenarioError(f"Referência inválida a funções: {ref!r}.")

    def resolve(self, ref) -> list:
        return [self.probe(name) for name in self.names(ref)]


# --- Sobrescritas ---


def parse_override(text: str) -> tuple[list[str], object]:
    """Divide ``a.b.c=valor`` e interpreta o valor como escalar YAML."""
    key, sep, raw = text.partition("=")
    if not sep or not key.strip():
        raise ScenarioError(f"Sobrescrita inválida {text!r}: use chave.pontilhada=valor.")
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError as error:
        raise ScenarioError(f"Valor inválido na sobrescrita {text!r}: {error}") from error
    return key.strip().split("."), value


def apply_overrides(data: dict, overrides: Sequence[str]) -> dict:
    for text in overrides:
        path, value = parse_override(text)
        node = data
        for part in path[:-1]:
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise ScenarioError(f"Sobrescrita {text!r} atravessa um valor que não é tabela.")
            node = child
        node[path[-1]] = value
        logger.info("Sobrescrita aplicada: %s", text)
    return data


def scenario_digest(raw: bytes, overrides: Sequence[str]) -> str:
    digest = hashlib.sha256(raw)
    for text in overrides:
        digest.update(b"\n")
        digest.update(text.encode("utf-8"))
    return digest.hexdigest()


# --- Seções ---


def _table(data: Mapping, key: str, required: bool = False) -> dict:
    value = data.get(key)
    if value is None:
        if required:
            raise ScenarioError(f"Seção obrigatória ausente: {key!r}.")
        return {}
    if not isinstance(value, Mapping):
        raise ScenarioError(f"Seção {key!r} deve ser um mapeamento.")
    return dict(value)


def _grid(data: Mapping) -> GridSpec:
    table = _table(data, "grid", required=True)
    unknown = set(table) - {"n_t", "n_s", "dt", "dx", "origin"}
    if unknown:
        raise ScenarioError(f"Chaves desconhecidas em grid: {sorted(unknown)}.")
    try:
        origin = table.get("origin")
        return GridSpec(
            n_t=int(table["n_t"]),
            n_s=int(table["n_s"]),
            dt=float(table["dt"]),
            dx=float(table["dx"]),
            origin=tuple(float(v) for v in origin) if origin is not None else None,
        )
    except KeyError as error:
        raise ScenarioError(f"grid sem a chave {error.args[0]!r}.") from error
    except (TypeError, ValueError) as error:
        raise ScenarioError(f"grid inválida: {error}") from error


def _rank(value, where: str) -> Rank:
    rank = RANK_NAMES.get(str(value or "scalar"))
    if rank is None:
        raise ScenarioError(f"{where}: posto desconhecido {value!r}; use {sorted(RANK_NAMES)}.")
    return rank


class _FunctionBuilder:
    """Resolve as funções nomeadas, incluindo referências entre elas."""

    def __init__(self, tables: Mapping[str, Mapping]) -> None:
        self.tables = tables
        self.built: dict[str, TestFunction] = {}
        self.visiting: set[str] = set()

    def get(self, name: str, where: str) -> TestFunction:
        if name in self.built:
            return self.built[name]
        if name not in self.tables:
            raise ScenarioError(f"{where}: função desconhecida {name!r}.")
        if name in self.visiting:
            raise ScenarioError(f"Referência circular envolvendo a função {name!r}.")
        self.visiting.add(name)
        try:
            self.built[name] = self._build(name, dict(self.tables[name]))
        finally:
            self.visiting.discard(name)
        return self.built[name]

    def _build(self, name: str, table: dict) -> TestFunction:
        where = f"functions.{name}"
        family = table.get("family")
        if family not in FUNCTION_KEYS:
            raise ScenarioError(f"{where}: família desconhecida {family!r}.")
        unknown = set(table) - FUNCTION_KEYS[family]
        if unknown:
            raise ScenarioError(f"{where}: chaves desconhecidas {sorted(unknown)}.")
        try:
            if family == "gaussian":
                return gaussian_packet(
                    center=table.get("center"),
                    sigma=float(table.get("sigma", 1.0)),
                    q=table.get("q"),
                    rank=_rank(table.get("rank"), where),
                    profile=table.get("profile"),
                    amplitude=float(table.get("amplitude", 1.0)),
                    phase=float(table.get("phase", 0.0)),
                )
            if family == "bump":
                return bump(
                    center=table.get("center"),
                    radius=float(table.get("radius", 1.0)),
                    rank=_rank(table.get("rank"), where),
                    profile=table.get("profile"),
                    amplitude=float(table.get("amplitude", 1.0)),
                )
            if family == "sum":
                return sum_of(*(self.get(part, where) for part in table.get("parts", ())))
            if family == "scaled":
                return scaled(self.get(table["of"], where), float(table.get("factor", 1.0)))
            return translate(self.get(table["of"], where), table.get("a"))
        except KeyError as error:
            raise ScenarioError(f"{where}: chave obrigatória {error.args[0]!r} ausente.") from error
        except FieldError as error:
            raise ScenarioError(f"{where}: {error}") from error


def _functions(data: Mapping) -> dict[str, TestFunction]:
    tables = _table(data, "functions", required=True)
    builder = _FunctionBuilder(tables)
    return {name: builder.get(name, "functions") for name in tables}


def _kernel(table: Mapping, where: str) -> Kernel:
    kind = table.get("kernel", "scalar")
    label = str(table.get("label", where))
    if kind == "scalar":
        return Kernel.scalar(float(table.get("mass", 1.0)), label=label)
    if kind == "vector":
        return Kernel.vector(
            float(table.get("mass", 1.0)),
            float(table.get("sigma_t", 1.0)),
            float(table.get("sigma_s", 0.5)),
            label=label,
        )
    if kind == "em":
        return Kernel.em(label)
    raise ScenarioError(f"{where}: núcleo desconhecido {kind!r}.")


def _model(data: Mapping) -> tuple[NonlinearModel, str]:
    table = _table(data, "model", required=True)
    family = table.get("family", "nonlinear")
    try:
        if family == "free":
            return free_scalar_model(float(table.get("mass", 1.0)), str(table.get("slot", "f"))), family
        if family == "nonlinear":
            slots = {
                str(slot): _rank(rank, f"model.slots.{slot}")
                for slot, rank in dict(table.get("slots") or {}).items()
            } or None
            terms = []
            for index, term in enumerate(table.get("terms") or ()):
                where = f"model.terms[{index}]"
                text = term.get("functional")
                if not isinstance(text, str):
                    raise ScenarioError(f"{where}: 'functional' deve ser texto.")
                label = str(term.get("label", text))
                terms.append(
                    ModelTerm(
                        parse_functional(text, slots),
                        _kernel({**term, "label": label}, where),
                        float(term.get("weight", 1.0)),
                        bool(term.get("norm_scaled", False)),
                        label,
                    )
                )
            return NonlinearModel(tuple(terms)), family
        if family == "em":
            params = {key: value for key, value in table.items() if key in EM_PARAM_KEYS}
            if "lambdas" in params:
                params["lambdas"] = tuple(params["lambdas"])
            if "sigma_overrides" in params:
                params["sigma_overrides"] = {
                    label: tuple(pair) for label, pair in params["sigma_overrides"].items()
                }
            model = build_em_model(
                EMModelParams(**params),
                include_axial=bool(table.get("include_axial", False)),
                include_derivative_terms=bool(table.get("include_derivative_terms", False)),
                extended=bool(table.get("extended", False)),
            )
            return model, family
    except (TypeError, ValueError, AttributeError) as error:
        if isinstance(error, FieldError):
            raise
        raise ScenarioError(f"model inválido: {error}") from error
    raise ScenarioError(f"Família de modelo desconhecida: {family!r}.")


def _probes(data: Mapping, functions: dict, model: NonlinearModel, family: str) -> dict:
    probes: dict[str, object] = {}
    for name, table in _table(data, "probes").items():
        if name in functions:
            raise ScenarioError(f"Sonda {name!r} com o mesmo nome de uma função.")
        bindings = {}
        for slot, fn_name in dict(table).items():
            if slot not in model.slots:
                raise ScenarioError(f"probes.{name}: slot {slot!r} fora do modelo {model.slots}.")
            if fn_name not in functions:
                raise ScenarioError(f"probes.{name}: função desconhecida {fn_name!r}.")
            bindings[slot] = functions[fn_name]
        if not bindings:
            raise ScenarioError(f"probes.{name}: sonda sem nenhuma função.")
        probes[name] = EMProbe(**bindings) if family == "em" else bindings
    return probes


def _measurements(data: Mapping, known: set[str]) -> dict[str, tuple[str, ...]]:
    measurements = {}
    for name, items in _table(data, "measurements").items():
        if isinstance(items, str) or not isinstance(items, Sequence):
            raise ScenarioError(f"measurements.{name} deve ser uma lista de nomes.")
        missing = [item for item in items if item not in known]
        if missing:
            raise ScenarioError(f"measurements.{name}: nomes desconhecidos {missing}.")
        measurements[name] = tuple(items)
    return measurements


def _state(data: Mapping, known: Mapping) -> StatePrep:
    table = _table(data, "state")
    kind = table.get("kind", "vacuum")
    if kind == "vacuum":
        return StatePrep.vacuum()
    if kind == "excited":
        creators = table.get("creators") or ()
        missing = [name for name in creators if name not in known]
        if missing or not creators:
            raise ScenarioError(f"state.creators inválido: {list(creators)}.")
        return StatePrep.excited(*(known[name] for name in creators))
    raise ScenarioError(f"Tipo de estado desconhecido: {kind!r}.")


def g_descriptor(value) -> GDescriptor:
    """``"identity"``, ``"x_minus_tanh"`` ou ``{xs: [...], ys: [...]}``."""
    if value in (None, "identity"):
        return GDescriptor.identity()
    if value == "x_minus_tanh":
        return GDescriptor.x_minus_tanh()
    if isinstance(value, Mapping) and "xs" in value and "ys" in value:
        try:
            return GDescriptor.table(value["xs"], value["ys"])
        except FieldError as error:
            raise ScenarioError(f"Tabela de G inválida: {error}") from error
    raise ScenarioError(f"Descritor de G desconhecido: {value!r}.")


def _refs(params: Mapping) -> list:
    refs: list = []
    for key in ("functions", "function", "against", "probe_j", "probe_f"):
        if key in params:
            refs.append(params[key])
    for pair in params.get("pairs") or ():
        refs.extend(pair)
    return refs


def _outputs(data: Mapping, known: set[str], measurements: Mapping) -> tuple[OutputSpec, ...]:
    outputs = []
    for name, table in _table(data, "outputs").items():
        table = dict(table or {})
        kind = table.pop("kind", name)
        if kind not in OUTPUT_KINDS:
            raise ScenarioError(f"outputs.{name}: tipo desconhecido {kind!r}; use {OUTPUT_KINDS}.")
        for ref in _refs(table):
            names = measurements.get(ref, (ref,)) if isinstance(ref, str) else ref
            missing = [item for item in names if item not in known]
            if missing:
                raise ScenarioError(f"outputs.{name}: nomes desconhecidos {missing}.")
        if kind == "wightman":
            ref = table.get("functions") or ()
            count = len(measurements.get(ref, (ref,)) if isinstance(ref, str) else ref)
            if count > WIGHTMAN_CAP:
                raise ScenarioError(
                    f"outputs.{name}: Wightman de ordem {count} acima do limite {WIGHTMAN_CAP}."
                )
        outputs.append(OutputSpec(str(name), kind, table))
    return tuple(outputs)


def _settings(data: Mapping, overrides: Mapping | None) -> RunSettings:
    table = {**_table(data, "settings"), **dict(overrides or {})}
    unknown = set(table) - {"method", "tol", "threads", "oracle", "ridge"}
    if unknown:
        raise ScenarioError(f"Chaves desconhecidas em settings: {sorted(unknown)}.")
    method = table.get("method", "direct")
    if method not in SHELL_METHODS:
        raise ScenarioError(f"settings.method deve ser um de {SHELL_METHODS}, recebido {method!r}.")
    threads = table.get("threads")
    return RunSettings(
        method=method,
        tol=float(table.get("tol", PSD_TOL)),
        threads=int(threads) if threads is not None else None,
        oracle=bool(table.get("oracle", False)),
        ridge=float(table.get("ridge", 0.0)),
    )


def parse_scenario(
    data: Mapping,
    path: str = "<memória>",
    digest: str = "",
    settings: Mapping | None = None,
) -> Scenario:
    """Valida um cenário já lido como mapeamento.

    Raises:
        ScenarioError: Seção ausente, nome desconhecido ou valor inválido.
        InputError: Erros de domínio (grade, funcional, modelo) propagados.
    """
    if not isinstance(data, Mapping):
        raise ScenarioError("O cenário deve ser um mapeamento YAML no nível superior.")
    grid_spec = _grid(data)
    functions = _functions(data)
    model, family = _model(data)
    probes = _probes(data, functions, model, family)
    known = {**functions, **probes}
    measurements = _measurements(data, set(known))
    state = _state(data, known)
    outputs = _outputs(data, set(known), measurements)
    scenario = Scenario(
        path=path,
        digest=digest,
        grid_spec=grid_spec,
        model=model,
        model_family=family,
        functions=functions,
        probes=probes,
        measurements=measurements,
        state=state,
        outputs=outputs,
        settings=_settings(data, settings),
    )
    logger.info(
        "Cenário %s: %d funções, %d sondas, %d saídas, modelo %s com %d termos.",
        path,
        len(functions),
        len(probes),
        len(outputs),
        family,
        len(model.terms),
    )
    return scenario


def load_scenario(
    path: str | Path,
    overrides: Sequence[str] = (),
    settings: Mapping | None = None,
) -> Scenario:
    """Lê, aplica sobrescritas e valida um arquivo de cenário.

    Args:
        path: Arquivo YAML.
        overrides: Lista ``chave.pontilhada=valor``.
        settings: Ajustes vindos da CLI, com precedência sobre ``settings``.

    Raises:
        ScenarioError: Arquivo ausente, YAML inválido ou cenário inválido.
    """
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as error:
        raise ScenarioError(f"Não foi possível ler o cenário {path}: {error}") from error
    try:
        data = yaml.safe_load(raw) or {}
    except yaml.YAMLError as error:
        raise ScenarioError(f"YAML inválido em {path}: {error}") from error
    if not isinstance(data, dict):
        raise ScenarioError("O cenário deve ser um mapeamento YAML no nível superior.")
    data = apply_overrides(data, overrides)
    return parse_scenario(data, str(path), scenario_digest(raw, overrides), settings)
