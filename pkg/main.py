"""Interface CLI do motor de campos com linearidade enfraquecida."""

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from src.config import PSD_TOL
from src.errors import FieldError, InputError
from src.graph import EXIT_INPUT, EXIT_NUMERICAL, EXIT_OK, run_scenario
from src.physics.densities import DensitySpec, integrate_density, joint_density
from src.scenario.loader import g_descriptor
from src.scenario.outputs import write_csv

logger = logging.getLogger(__name__)

CLI_OUTPUT = "cli_{}"


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("scenario", help="Arquivo YAML do cenário.")
    parser.add_argument("--out", default="out", help="Diretório de saída (padrão: out).")
    parser.add_argument(
        "--override",
        action="append",
        default=[],
        metavar="CHAVE=VALOR",
        help="Sobrescreve uma chave pontilhada do cenário (repetível).",
    )
    parser.add_argument("--tol", type=float, default=None, help=f"Tolerância PSD (padrão {PSD_TOL}).")
    parser.add_argument("--threads", type=int, default=None, help="Workers do scipy.fft.")
    parser.add_argument(
        "--method",
        choices=("direct", "linear"),
        default=None,
        help=(
            "Amostragem da camada de massa: direct (padrão, soma trigonométrica exata em k0 = ω_k) "
            "ou linear (interpolação ao longo do eixo k0 da DFT)."
        ),
    )
    parser.add_argument(
        "--oracle", action="store_true", help="Compara com os oráculos de força bruta (modo teste)."
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nlfield",
        description="Campos quânticos com produto interno não linear: Gram, Wightman, densidades.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="Log em nível DEBUG.")
    sub = parser.add_subparsers(dest="command", required=True)

    _common(sub.add_parser("run", help="Executa todas as saídas do cenário."))
    _common(sub.add_parser("check", help="Diagnósticos da grade e certificação PSD."))

    gram = sub.add_parser("gram", help="Matriz de Gram de funções nomeadas.")
    _common(gram)
    gram.add_argument("--functions", nargs="+", required=True)
    gram.add_argument("--permanent", action="store_true", help="Inclui o permanente da Gram.")

    wight = sub.add_parser("wightman", help="Função de Wightman de funções nomeadas.")
    _common(wight)
    wight.add_argument("--functions", nargs="+", required=True)
    wight.add_argument("--n", type=int, default=None, help="Usa apenas as n primeiras funções.")

    comm = sub.add_parser("commutator", help="Comutador normalizado entre pares.")
    _common(comm)
    comm.add_argument("--pair", nargs=2, action="append", required=True, metavar=("F", "G"))

    sweep = sub.add_parser("sweep-translation", help="Varredura de ξ(f, f_a) ou do comutador.")
    _common(sweep)
    sweep.add_argument("--function", required=True)
    sweep.add_argument("--against", default=None, help="Varre o comutador contra esta função.")
    sweep.add_argument("--direction", nargs=4, type=float, default=[0.0, 1.0, 0.0, 0.0])
    sweep.add_argument("--start", type=float, default=0.0)
    sweep.add_argument("--stop", type=float, default=5.0)
    sweep.add_argument("--step", type=float, default=0.5)
    sweep.add_argument("--explicit", action="store_true", help="Inclui a translação explícita.")

    dens = sub.add_parser("density", help="Densidade conjunta a partir de F, S e G.")
    dens.add_argument("--n", type=int, default=1)
    dens.add_argument("--variance", type=float, default=None, help="F = variância * I.")
    dens.add_argument("--F", type=float, nargs="+", default=None, help="F em ordem de linhas.")
    dens.add_argument("--S", type=float, nargs="+", default=None, help="Sobreposições S (uma partícula).")
    dens.add_argument("--g", default=None, help="identity ou x_minus_tanh (apenas n = 1).")
    dens.add_argument("--at", type=float, nargs="+", required=True, help="Ponto(s), n coordenadas cada.")
    dens.add_argument("--ridge", type=float, default=0.0)
    dens.add_argument("--integrate", action="store_true", help="Imprime também a normalização.")
    dens.add_argument("--out", default=None, help="Grava density.csv neste diretório.")
    return parser


def _settings(args: argparse.Namespace) -> dict:
    settings = {"tol": args.tol, "threads": args.threads, "method": args.method}
    if args.oracle:
        settings["oracle"] = True
    return {key: value for key, value in settings.items() if value is not None}


def _cli_output(kind: str, params: dict) -> tuple[list[str], str]:
    """Converte uma saída pedida na linha de comando em sobrescritas do cenário."""
    name = CLI_OUTPUT.format(kind)
    overrides = [f"outputs.{name}.kind={kind}"]
    for key, value in params.items():
        overrides.append(f"outputs.{name}.{key}={json.dumps(value)}")
    return overrides, name


def _scenario_command(args: argparse.Namespace) -> int:
    only = None
    overrides = list(args.override)
    if args.command == "check":
        only = ["gram"]
    elif args.command == "gram":
        extra, name = _cli_output("gram", {"functions": args.functions, "permanent": args.permanent})
        overrides, only = overrides + extra, [name]
    elif args.command == "wightman":
        params = {"functions": args.functions}
        if args.n is not None:
            params["n"] = args.n
        extra, name = _cli_output("wightman", params)
        overrides, only = overrides + extra, [name]
    elif args.command == "commutator":
        extra, name = _cli_output("commutator", {"pairs": [list(p) for p in args.pair]})
        overrides, only = overrides + extra, [name]
    elif args.command == "sweep-translation":
        params = {
            "function": args.function,
            "direction": args.direction,
            "start": args.start,
            "stop": args.stop,
            "step": args.step,
            "explicit": args.explicit,
        }
        if args.against is not None:
            params.update(quantity="commutator", against=args.against)
        extra, name = _cli_output("sweep", params)
        overrides, only = overrides + extra, [name]

    manifest = run_scenario(args.scenario, args.out, overrides, _settings(args), only)
    for failure in manifest.failures:
        print(f"ERRO [{failure['output']}] {failure['error']}: {failure['message']}", file=sys.stderr)
    for name in manifest.files:
        print(Path(args.out) / name)
    return manifest.exit_code


def _density_command(args: argparse.Namespace) -> int:
    n = args.n
    if args.F is not None:
        if len(args.F) != n * n:
            raise InputError(f"--F exige {n * n} valores para n = {n}, recebidos {len(args.F)}.")
        covariance = np.asarray(args.F, dtype=float).reshape(n, n)
    elif args.variance is not None:
        covariance = args.variance * np.eye(n)
    else:
        raise InputError("Informe --variance ou --F.")

    if args.g is not None:
        if n != 1:
            raise InputError("--g exige n = 1.")
        spec = DensitySpec.g_deformed(g_descriptor(args.g), float(covariance[0, 0]))
    elif args.S is not None:
        spec = DensitySpec.one_particle(covariance, args.S, ridge=args.ridge)
    else:
        spec = DensitySpec.vacuum(covariance, ridge=args.ridge)

    if len(args.at) % n:
        raise InputError(f"--at exige múltiplos de {n} coordenadas.")
    points = np.asarray(args.at, dtype=float).reshape(-1, n)
    values = np.atleast_1d(joint_density(spec, points))
    for value in values:
        print(f"{value:.16e}")
    if args.integrate:
        print(f"normalization {integrate_density(spec):.16e}")
    if args.out is not None:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        columns = [f"x{i + 1}" for i in range(n)] + ["density"]
        write_csv(out / "density.csv", columns, [(*p, v) for p, v in zip(points, values)])
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    """Ponto de entrada: retorna 0 sucesso, 2 erro de entrada, 3 falha numérica."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if args.command == "density":
        try:
            return _density_command(args)
        except InputError as e:
            print(f"ERRO: {e}", file=sys.stderr)
            return EXIT_INPUT
        except FieldError as e:
            print(f"ERRO: {e}", file=sys.stderr)
            return EXIT_NUMERICAL
    return _scenario_command(args)


if __name__ == "__main__":
    sys.exit(main())
