"""Testes para a interface de linha de comando."""

import json

import numpy as np
import pytest

from main import build_parser, main

TINY_SCENARIO = """\
grid: {n_t: 8, n_s: 8, dt: 0.5, dx: 0.5}
functions:
  f1: {family: gaussian, center: [0, 0, 0, 0], sigma: 0.6}
  f2: {family: gaussian, center: [0, 0.4, 0, 0], sigma: 0.6}
model: {family: free, mass: 1.0}
outputs:
  gram: {functions: [f1, f2]}
"""


@pytest.fixture
def scenario_file(tmp_path):
    path = tmp_path / "tiny.yaml"
    path.write_text(TINY_SCENARIO, encoding="utf-8")
    return path


def _printed_values(capsys):
    return [float(line) for line in capsys.readouterr().out.split()]


class TestParser:
    def test_command_is_required(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args([])

    def test_overrides_accumulate(self):
        args = build_parser().parse_args(
            ["run", "c.yaml", "--override", "grid.n_s=16", "--override", "model.mass=2"]
        )
        assert args.override == ["grid.n_s=16", "model.mass=2"]
        assert args.out == "out"

    def test_help_names_default_shell_method(self, capsys):
        with pytest.raises(SystemExit):
            build_parser().parse_args(["run", "--help"])
        text = " ".join(capsys.readouterr().out.split())
        assert "direct (padrão" in text


class TestDensityCommand:
    def test_standard_normal_peak(self, capsys):
        code = main(["density", "--n", "1", "--variance", "1", "--at", "0"])
        assert code == 0
        assert _printed_values(capsys) == [pytest.approx(1 / np.sqrt(2 * np.pi), rel=1e-15)]

    def test_several_points(self, capsys):
        main(["density", "--variance", "2", "--at", "0", "1"])
        values = _printed_values(capsys)
        expected = np.exp(-np.array([0.0, 1.0]) ** 2 / 4) / np.sqrt(4 * np.pi)
        np.testing.assert_allclose(values, expected, rtol=1e-14)

    def test_covariance_matrix(self, capsys):
        main(["density", "--n", "2", "--F", "1", "0", "0", "1", "--at", "0", "0"])
        assert _printed_values(capsys) == [pytest.approx(1 / (2 * np.pi), rel=1e-14)]

    def test_g_identity_integrates_to_one(self, capsys):
        code = main(["density", "--variance", "1", "--g", "identity", "--at", "0", "--integrate"])
        lines = capsys.readouterr().out.splitlines()
        assert code == 0
        assert lines[-1].startswith("normalization ")
        assert float(lines[-1].split()[1]) == pytest.approx(1.0, abs=1e-6)

    def test_writes_csv(self, tmp_path, capsys):
        main(["density", "--variance", "1", "--at", "0", "--out", str(tmp_path)])
        text = (tmp_path / "density.csv").read_text(encoding="utf-8")
        assert "x1,density" in text

    @pytest.mark.parametrize(
        "argv",
        [
            ["density", "--n", "2", "--F", "1", "0", "1", "--at", "0", "0"],
            ["density", "--at", "0"],
            ["density", "--n", "2", "--variance", "1", "--at", "0", "0", "1"],
            ["density", "--n", "2", "--variance", "1", "--g", "identity", "--at", "0", "0"],
            ["density", "--variance", "1", "--g", "tanh", "--at", "0"],
        ],
    )
    def test_input_errors_exit_with_two(self, argv, capsys):
        assert main(argv) == 2
        assert "ERRO" in capsys.readouterr().err

    def test_singular_covariance_is_numerical_failure(self, capsys):
        code = main(["density", "--n", "2", "--F", "1", "1", "1", "1", "--at", "0", "0"])
        assert code == 3
        assert "singular" in capsys.readouterr().err

    def test_negative_g_variance_is_input_error(self, capsys):
        assert main(["density", "--variance", "-1", "--g", "identity", "--at", "0"]) == 2


class TestScenarioCommands:
    def test_run_writes_outputs_and_manifest(self, scenario_file, tmp_path, capsys):
        out = tmp_path / "out"
        code = main(["run", str(scenario_file), "--out", str(out)])

        assert code == 0
        manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
        assert manifest["exit_code"] == 0
        assert (out / "gram.csv").exists()
        assert str(out / "gram.csv") in capsys.readouterr().out

    def test_gram_command_adds_cli_output(self, scenario_file, tmp_path):
        out = tmp_path / "out"
        code = main(["gram", str(scenario_file), "--functions", "f2", "f1", "--permanent", "--out", str(out)])
        assert code == 0
        assert (out / "cli_gram.csv").exists()
        assert not (out / "gram.csv").exists()

    def test_unknown_function_exits_with_two(self, scenario_file, tmp_path, capsys):
        code = main(["wightman", str(scenario_file), "--functions", "f1", "g", "--out", str(tmp_path / "out")])
        assert code == 2
        assert "ERRO" in capsys.readouterr().err

    def test_missing_scenario_exits_with_two(self, tmp_path):
        assert main(["check", str(tmp_path / "nada.yaml"), "--out", str(tmp_path / "out")]) == 2
