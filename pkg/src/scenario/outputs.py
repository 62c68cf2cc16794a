"""Produtos de um cenário e escrita determinística de CSV/JSON.

Cada função de ``OUTPUT_MAP`` recebe o cenário, a saída pedida, o motor de
``ξ`` e o diretório de destino, e devolve um :class:`OutputResult`.
Números saem em notação científica com 17 algarismos significativos.
"""

import csv
import json
import logging
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from src.config import CONVENTIONS, NAIVE_PERMANENT_CAP, VERSION, WIGHTMAN_ORACLE_CAP
from src.errors import DimensionError, NumericalError, ScenarioError
from src.fields.lattice import Grid, boundary_leakage, shell_coverage
from src.fields.testfunctions import TestFunction, causal_relation, translate
from src.physics.algebra import (
    XiEngine,
    characteristic_function,
    commutator,
    gram_psd,
    normalized_permanent,
    permanent,
    state_moment,
    wightman,
)
from src.physics.densities import (
    DensitySpec,
    density_spec,
    integrate_density,
    joint_density,
)
from src.physics.em_scenarios import EMProbe, normalized_cross_correlation, vacuum_cross_correlation
from src.physics.oracles import permanent_naive, wightman_oracle
from src.scenario.loader import OutputSpec, Scenario, g_descriptor

logger = logging.getLogger(__name__)

ORACLE_RTOL = 1e-9


@dataclass
class OutputResult:
    """Arquivos escritos e resumo de uma saída.

    Attributes:
        files: Caminhos relativos ao diretório de saída.
        summary: Valores agregados registrados no manifesto.
        certified: ``False`` quando uma Gram não passou na certificação.
    """

    files: list[str] = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    certified: bool = True


# --- Escrita ---


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.16e}"
    return str(value)


def write_csv(
    path: Path,
    columns: Sequence[str],
    rows: Sequence[Sequence],
    comments: Sequence[str] = (),
) -> None:
    """CSV com cabeçalho ``#`` citando as convenções, vírgula e ``\\n``."""
    with open(path, "w", newline="", encoding="utf-8") as handle:
        handle.write(f"# {CONVENTIONS}\n")
        handle.write(f"# nlfield {VERSION}\n")
        for line in comments:
            handle.write(f"# {line}\n")
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([fmt(value) for value in row])
    logger.debug("CSV escrito: %s (%d linhas)", path, len(rows))


def to_jsonable(value):
    if isinstance(value, Mapping):
        return {str(key): to_jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(item) for item in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (complex, np.complexfloating)):
        return [float(value.real), float(value.imag)]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(value)
    return value


def write_json(path: Path, payload: Mapping) -> None:
    text = json.dumps(to_jsonable(payload), sort_keys=True, indent=2, ensure_ascii=False)
    Path(path).write_text(text + "\n", encoding="utf-8")


# --- Diagnósticos ---


def grid_diagnostics(scenario: Scenario, grid: Grid) -> dict:
    """Vazamento de borda por função e cobertura da camada por massa."""
    leakage = {
        name: boundary_leakage(fn.sample(grid)) for name, fn in scenario.functions.items()
    }
    masses = sorted({term.kernel.mass for term in scenario.model.terms})
    coverage = []
    for mass in masses:
        report = shell_coverage(grid, mass)
        coverage.append(
            {
                "mass": report.mass,
                "n_candidates": report.n_candidates,
                "n_in_band": report.n_in_band,
                "n_dropped": report.n_dropped,
                "fraction": report.fraction,
            }
        )
    return {"boundary_leakage": leakage, "shell_coverage": coverage}


# --- Auxiliares ---


def translate_probe(probe, a):
    """Translada cada função de uma sonda por ``a``."""
    if isinstance(probe, TestFunction):
        return translate(probe, a)
    if isinstance(probe, EMProbe):
        return EMProbe(**{slot: translate(fn, a) for slot, fn in probe.as_bindings().items()})
    return {slot: translate(fn, a) for slot, fn in probe.items() if fn is not None}


def _relative_gap(a: complex, b: complex) -> float:
    scale = max(abs(a), abs(b))
    return abs(a - b) / scale if scale > 0 else 0.0


def _header(spec: OutputSpec, scenario: Scenario) -> list[str]:
    return [f"output {spec.name} ({spec.kind})", f"scenario sha256 {scenario.digest}"]


def _count(value, name: str) -> int:
    try:
        count = int(value)
    except (TypeError, ValueError) as error:
        raise ScenarioError(f"{name} deve ser inteiro, recebido {value!r}.") from error
    if count < 1:
        raise ScenarioError(f"{name} deve ser >= 1, recebido {count}.")
    return count


# --- Saídas ---


def gram_output(scenario: Scenario, spec: OutputSpec, engine: XiEngine, out_dir: Path) -> OutputResult:
    """Matriz ``ξ(f_i, f_j)``, autovalores e certificado de positividade."""
    names = scenario.names(spec.params.get("functions", list(scenario.functions)))
    functions = scenario.resolve(names)
    report = gram_psd(engine, functions, tol=scenario.settings.tol)
    n = len(names)
    rows = [
        (i, j, names[i], names[j], report.matrix[i, j].real, report.matrix[i, j].imag)
        for i in range(n)
        for j in range(n)
    ]
    result = OutputResult(certified=report.psd_certified)
    matrix_file = f"{spec.name}.csv"
    write_csv(out_dir / matrix_file, ("i", "j", "f_i", "f_j", "re", "im"), rows, _header(spec, scenario))
    eigen_file = f"{spec.name}_eigenvalues.csv"
    write_csv(
        out_dir / eigen_file,
        ("index", "eigenvalue"),
        list(enumerate(report.eigenvalues)),
        _header(spec, scenario),
    )
    result.files += [matrix_file, eigen_file]
    result.summary = {
        "n": n,
        "min_eigenvalue": report.min_eigenvalue,
        "trace": float(np.trace(report.matrix).real),
        "hermiticity_residual": report.hermiticity_residual,
        "psd_certified": report.psd_certified,
        "tol": report.tol,
    }
    if spec.params.get("permanent"):
        value = permanent(report.matrix)
        result.summary["permanent"] = value
        result.summary["normalized_permanent"] = normalized_permanent(engine, functions)
        if scenario.settings.oracle and n <= NAIVE_PERMANENT_CAP:
            reference = permanent_naive(report.matrix)
            result.summary["permanent_oracle"] = reference.value
            if _relative_gap(value, reference.value) > ORACLE_RTOL:
                raise NumericalError(
                    f"Permanente de Ryser {value} difere do oráculo {reference.value}."
                )
    return result


def wightman_output(scenario: Scenario, spec: OutputSpec, engine: XiEngine, out_dir: Path) -> OutputResult:
    """``⟨φ_{f1}...φ_{fk}⟩`` para cada prefixo ``k = 1..n`` da lista."""
    names = scenario.names(spec.params.get("functions", ()))
    if "n" in spec.params:
        n = _count(spec.params["n"], "n")
        if n > len(names):
            raise ScenarioError(f"n={n} maior que as {len(names)} funções listadas.")
        names = names[:n]
    if not names:
        raise ScenarioError(f"outputs.{spec.name}: lista de funções vazia.")
    functions = scenario.resolve(names)
    vacuum = scenario.state.is_vacuum
    use_oracle = scenario.settings.oracle and vacuum
    columns = ["order", "re", "im"] + (["oracle_re", "oracle_im"] if use_oracle else [])
    rows = []
    worst = 0.0
    for k in range(1, len(functions) + 1):
        prefix = functions[:k]
        value = wightman(prefix, engine) if vacuum else state_moment(scenario.state, prefix, engine)
        row = [k, value.real, value.imag]
        if use_oracle:
            if k > WIGHTMAN_ORACLE_CAP:
                raise ScenarioError(
                    f"Oráculo de Wightman limitado a n <= {WIGHTMAN_ORACLE_CAP}, pedido {k}."
                )
            reference = wightman_oracle(prefix, engine).value
            row += [reference.real, reference.imag]
            worst = max(worst, _relative_gap(value, reference))
        rows.append(row)
    filename = f"{spec.name}.csv"
    comments = _header(spec, scenario) + [f"functions {' '.join(names)}"]
    write_csv(out_dir / filename, columns, rows, comments)
    summary = {"order": len(functions), "value": complex(rows[-1][1], rows[-1][2])}
    if use_oracle:
        summary["oracle_max_relative_gap"] = worst
        if worst > ORACLE_RTOL:
            raise NumericalError(f"Wightman difere do oráculo: gap relativo {worst:.3e}.")
    return OutputResult([filename], summary)


def commutator_output(scenario: Scenario, spec: OutputSpec, engine: XiEngine, out_dir: Path) -> OutputResult:
    """``[φ_f, φ_g]`` normalizado para cada par, com a relação causal certificada."""
    pairs = spec.params.get("pairs") or ()
    if not pairs:
        raise ScenarioError(f"outputs.{spec.name}: nenhum par informado.")
    rows = []
    worst_spacelike = 0.0
    for pair in pairs:
        if len(pair) != 2:
            raise ScenarioError(f"outputs.{spec.name}: par inválido {pair!r}.")
        f_name, g_name = pair
        f, g = scenario.probe(f_name), scenario.probe(g_name)
        value = commutator(f, g, engine)
        relation, margin = "Indeterminate", float("nan")
        if isinstance(f, TestFunction) and isinstance(g, TestFunction):
            causal = causal_relation(f, g)
            relation = causal.relation.value
            margin = causal.margin if causal.margin is not None else float("nan")
            if relation == "SpacelikeSeparated":
                worst_spacelike = max(worst_spacelike, value.normalized)
        rows.append(
            (f_name, g_name, relation, margin, value.value.real, value.value.imag,
             value.normalized, value.symplectic)
        )
    filename = f"{spec.name}.csv"
    columns = ("f", "g", "relation", "margin", "re", "im", "normalized", "symplectic")
    write_csv(out_dir / filename, columns, rows, _header(spec, scenario))
    return OutputResult([filename], {"pairs": len(rows), "max_spacelike_normalized": worst_spacelike})


def _density_points(params: Mapping, n: int) -> np.ndarray:
    if "at" in params:
        points = np.atleast_2d(np.asarray(params["at"], dtype=float))
        if n == 1 and points.shape[0] == 1 and points.shape[1] != 1:
            points = points.T
        if points.shape[1] != n:
            raise DimensionError(f"Pontos com {points.shape[1]} coordenadas para n = {n}.")
        return points
    axis = params.get("axis", (-5.0, 5.0, 101))
    if len(axis) != 3:
        raise ScenarioError("axis deve ser [início, fim, contagem].")
    values = np.linspace(float(axis[0]), float(axis[1]), _count(axis[2], "axis[2]"))
    mesh = np.meshgrid(*([values] * n), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def density_output(scenario: Scenario, spec: OutputSpec, engine: XiEngine, out_dir: Path) -> OutputResult:
    """Densidade conjunta (vácuo, uma partícula ou deformada por ``G``)."""
    names = scenario.names(spec.params.get("functions", ()))
    functions = scenario.resolve(names)
    if not functions:
        raise ScenarioError(f"outputs.{spec.name}: lista de funções vazia.")
    if "g" in spec.params:
        if len(functions) != 1:
            raise DimensionError("A deformação por G está disponível apenas para n = 1.")
        if not scenario.state.is_vacuum:
            raise ScenarioError("A deformação por G é definida sobre o vácuo.")
        if scenario.model_family != "free":
            logger.warning(
                "Deformação por G combinada com modelo %s: ξ(f, f) do modelo não linear "
                "é usado como variância.",
                scenario.model_family,
            )
        variance = complex(engine.xi(functions[0], functions[0])).real
        density = DensitySpec.g_deformed(g_descriptor(spec.params["g"]), variance)
    else:
        density = density_spec(engine, functions, scenario.state, scenario.settings.ridge)
    points = _density_points(spec.params, density.n)
    values = np.atleast_1d(joint_density(density, points))
    rows = [(*point, value) for point, value in zip(points, values)]
    filename = f"{spec.name}.csv"
    columns = [f"x{i + 1}" for i in range(density.n)] + ["density"]
    comments = _header(spec, scenario) + [f"kind {density.kind.value}", f"functions {' '.join(names)}"]
    write_csv(out_dir / filename, columns, rows, comments)
    summary = {"kind": density.kind.value, "n": density.n, "points": len(rows)}
    if spec.params.get("integrate"):
        summary["normalization"] = integrate_density(
            density, resolution=_count(spec.params.get("resolution", 201), "resolution")
        )
    return OutputResult([filename], summary)


def sweep_output(scenario: Scenario, spec: OutputSpec, engine: XiEngine, out_dir: Path) -> OutputResult:
    """Varredura em ``a = s * direção``.

    ``quantity = "autocorrelation"`` dá ``ξ(f, f_a)`` pela forma de fase (e,
    com ``explicit`` ou ``--oracle``, pela translação explícita);
    ``"commutator"`` dá ``[φ_f, φ_{g_a}]`` normalizado.
    """
    params = spec.params
    f = scenario.probe(params.get("function", ""))
    direction = np.asarray(params.get("direction", (0.0, 1.0, 0.0, 0.0)), dtype=float)
    if direction.shape != (4,):
        raise DimensionError(f"direction deve ter 4 componentes, recebido {direction.shape}.")
    start, stop, step = (float(params.get(key, default)) for key, default in
                         (("start", 0.0), ("stop", 5.0), ("step", 0.5)))
    if step <= 0 or stop < start:
        raise ScenarioError(f"Varredura inválida: start={start}, stop={stop}, step={step}.")
    steps = int(round((stop - start) / step)) + 1
    quantity = params.get("quantity", "autocorrelation")
    explicit = bool(params.get("explicit")) or scenario.settings.oracle

    rows = []
    worst = 0.0
    if quantity == "autocorrelation":
        columns = ["s", "a0", "a1", "a2", "a3", "re", "im"] + (["explicit_re", "explicit_im"] if explicit else [])
        for index in range(steps):
            s = start + index * step
            a = s * direction
            value = engine.translated_autocorrelation(f, a).value
            row = [s, *a, value.real, value.imag]
            if explicit:
                reference = engine.xi(f, translate_probe(f, a))
                row += [reference.real, reference.imag]
                worst = max(worst, _relative_gap(value, reference))
            rows.append(row)
    elif quantity == "commutator":
        g = scenario.probe(params.get("against", ""))
        columns = ["s", "a0", "a1", "a2", "a3", "re", "im", "normalized", "relation"]
        for index in range(steps):
            s = start + index * step
            a = s * direction
            moved = translate_probe(g, a)
            value = commutator(f, moved, engine)
            relation = "Indeterminate"
            if isinstance(f, TestFunction) and isinstance(moved, TestFunction):
                relation = causal_relation(f, moved).relation.value
            rows.append([s, *a, value.value.real, value.value.imag, value.normalized, relation])
    else:
        raise ScenarioError(f"Quantidade de varredura desconhecida: {quantity!r}.")

    filename = f"{spec.name}.csv"
    write_csv(out_dir / filename, columns, rows, _header(spec, scenario) + [f"quantity {quantity}"])
    summary = {"quantity": quantity, "steps": steps}
    if quantity == "autocorrelation" and explicit:
        summary["explicit_max_relative_gap"] = worst
    return OutputResult([filename], summary)


def characteristic_output(scenario: Scenario, spec: OutputSpec, engine: XiEngine, out_dir: Path) -> OutputResult:
    """``⟨exp(i Σ λ_i φ_{f_i})⟩`` para cada vetor ``λ`` pedido."""
    names = scenario.names(spec.params.get("functions", ()))
    functions = scenario.resolve(names)
    lambdas = spec.params.get("lambdas") or ()
    rows = []
    for lam in lambdas:
        lam = np.atleast_1d(np.asarray(lam, dtype=float))
        value = characteristic_function(scenario.state, functions, lam, engine)
        rows.append([*lam, value.real, value.imag])
    filename = f"{spec.name}.csv"
    columns = [f"lambda{i + 1}" for i in range(len(functions))] + ["re", "im"]
    write_csv(out_dir / filename, columns, rows, _header(spec, scenario))
    return OutputResult([filename], {"points": len(rows)})


def cross_correlation_output(
    scenario: Scenario, spec: OutputSpec, engine: XiEngine, out_dir: Path
) -> OutputResult:
    """``ξ(sonda J, sonda F)`` no vácuo e sua forma normalizada."""
    if scenario.model_family != "em":
        raise ScenarioError("cross_correlation exige um modelo da família 'em'.")
    probe_j = scenario.probe(spec.params.get("probe_j", ""))
    probe_f = scenario.probe(spec.params.get("probe_f", ""))
    if not (isinstance(probe_j, EMProbe) and isinstance(probe_f, EMProbe)):
        raise ScenarioError("cross_correlation exige nomes de sondas declaradas em 'probes'.")
    value = vacuum_cross_correlation(probe_j, probe_f, engine)
    normalized = normalized_cross_correlation(probe_j, probe_f, engine)
    filename = f"{spec.name}.csv"
    write_csv(
        out_dir / filename,
        ("probe_j", "probe_f", "re", "im", "normalized"),
        [(spec.params["probe_j"], spec.params["probe_f"], value.real, value.imag, normalized)],
        _header(spec, scenario),
    )
    return OutputResult([filename], {"value": value, "normalized": normalized})


OUTPUT_MAP: dict[str, Callable[[Scenario, OutputSpec, XiEngine, Path], OutputResult]] = {
    "gram": gram_output,
    "wightman": wightman_output,
    "commutator": commutator_output,
    "density": density_output,
    "sweep": sweep_output,
    "characteristic": characteristic_output,
    "cross_correlation": cross_correlation_output,
}
"""Mapeia o tipo de saída à função que a produz."""
