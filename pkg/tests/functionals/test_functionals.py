"""Testes para o parser e o avaliador de funcionais locais."""

import numpy as np
import pytest

from src.errors import FunctionalSyntaxError, GridMismatchError, RankError, UnboundSlotError
from src.fields.functionals import eval_functional, parse_functional
from src.fields.lattice import GridSpec, Rank, gradient4, make_grid
from src.fields.testfunctions import gaussian_packet


@pytest.fixture
def grid():
    return make_grid(GridSpec(n_t=8, n_s=8, dt=0.5, dx=0.5))


@pytest.fixture
def scalar(grid):
    return gaussian_packet(sigma=1.0, center=(0.0, 0.3, 0.0, 0.0)).sample(grid)


def _vector(grid, profile):
    return gaussian_packet(sigma=1.0, rank=Rank.VECTOR, profile=profile).sample(grid)


def _tensor(grid, profile):
    return gaussian_packet(sigma=1.0, rank=Rank.ANTISYM2, profile=profile).sample(grid)


class TestParser:
    @pytest.mark.parametrize(
        "text, expected",
        [
            ("f^2", "f^2"),
            ("2*f", "2.0 * f"),
            ("-f", "-1.0 * f"),
            ("f - g", "f + -1.0 * g"),
            ("2 * f * g", "2.0 * f * g"),
            ("(f + g) * h", "(f + g) * h"),
            ("eta( J ,J )", "eta(J, J)"),
            ("deriv(0, f)", "deriv(0, f)"),
        ],
    )
    def test_canonical_text(self, text, expected):
        assert parse_functional(text).text == expected

    @pytest.mark.parametrize(
        "text", ["f^2 + 3 * g", "contract(J, F) + -0.5 * deriv(f)", "(f + g)^3", "eps(F, dual(F))"]
    )
    def test_canonical_text_is_stable(self, text):
        """Imprimir e reler deve dar o mesmo texto."""
        once = parse_functional(text).text
        assert parse_functional(once).text == once

    def test_slots(self):
        functional = parse_functional("f * g + h^2")
        assert functional.slots == frozenset({"f", "g", "h"})

    def test_negative_constant_folds(self):
        assert parse_functional("-2 * f").text == "-2.0 * f"


class TestRankInference:
    @pytest.mark.parametrize(
        "text, rank",
        [
            ("f^2", Rank.SCALAR),
            ("eta(J, J)", Rank.SCALAR),
            ("eta(F, F)", Rank.SCALAR),
            ("contract(J, F)", Rank.VECTOR),
            ("wedge(S, J)", Rank.ANTISYM2),
            ("eps(J, F)", Rank.VECTOR),
            ("eps(F, F)", Rank.SCALAR),
            ("dual(F)", Rank.ANTISYM2),
            ("div(F)", Rank.VECTOR),
            ("div(J)", Rank.SCALAR),
            ("curl(J)", Rank.ANTISYM2),
            ("deriv(f)", Rank.VECTOR),
            ("deriv(2, J)", Rank.VECTOR),
            ("f * J", Rank.VECTOR),
            ("raise(J)", Rank.VECTOR),
        ],
    )
    def test_output_rank(self, text, rank):
        assert parse_functional(text).rank is rank

    @pytest.mark.parametrize(
        "text", ["J * J", "J + f", "J^2", "deriv(J)", "eta(J, F)", "dual(J)", "curl(f)", "lower(f)"]
    )
    def test_rank_errors(self, text):
        with pytest.raises(RankError):
            parse_functional(text)

    def test_custom_slot_ranks(self):
        functional = parse_functional("eta(A, A)", {"A": Rank.VECTOR})
        assert functional.rank is Rank.SCALAR
        assert functional.slot_ranks == (("A", Rank.VECTOR),)


class TestSyntaxErrors:
    @pytest.mark.parametrize(
        "text, position",
        [("f $ g", 2), ("f +", 3), ("", 0), ("f^0", 2), ("f^1.5", 2), ("foo(f)", 0)],
    )
    def test_reports_position(self, text, position):
        with pytest.raises(FunctionalSyntaxError) as info:
            parse_functional(text)
        assert info.value.position == position

    @pytest.mark.parametrize("text", ["(f", "eta(f)", "dual(F, F)", "deriv(4, f)", "f g"])
    def test_rejected(self, text):
        with pytest.raises(FunctionalSyntaxError):
            parse_functional(text)


class TestEvaluation:
    def test_scalar_power(self, scalar):
        result = eval_functional(parse_functional("f^2"), {"f": scalar})
        np.testing.assert_allclose(result.samples, scalar.samples**2)

    def test_scale_and_sum(self, scalar):
        result = eval_functional(parse_functional("3 * f - f"), {"f": scalar})
        np.testing.assert_allclose(result.samples, 2.0 * scalar.samples)

    def test_metric_contraction(self, grid):
        """eta(J, J) = J0² - J1² - J2² - J3²."""
        J = _vector(grid, (2.0, 1.0, 0.5, 0.0))
        result = eval_functional(parse_functional("eta(J, J)"), {"J": J})
        profile = J.samples[0] / 2.0
        np.testing.assert_allclose(result.samples[0], (4.0 - 1.0 - 0.25) * profile**2)

    def test_contract(self, grid):
        """J^μ F_{μα} com apenas J_1 e F_{01} não nulos."""
        J = _vector(grid, (0.0, 1.0, 0.0, 0.0))
        F = _tensor(grid, (1.0, 0.0, 0.0, 0.0, 0.0, 0.0))
        result = eval_functional(parse_functional("contract(J, F)"), {"J": J, "F": F})
        profile = J.samples[1]
        # J^1 F_{10} = -J_1 * (-F_01)
        np.testing.assert_allclose(result.samples[0], profile**2)
        np.testing.assert_allclose(result.samples[1:], 0.0)

    def test_wedge(self, grid):
        S = _vector(grid, (1.0, 0.0, 0.0, 0.0))
        J = _vector(grid, (0.0, 2.0, 0.0, 0.0))
        result = eval_functional(parse_functional("wedge(S, J)"), {"S": S, "J": J})
        profile = S.samples[0]
        np.testing.assert_allclose(result.samples[0], profile**2)
        np.testing.assert_allclose(result.samples[1:], 0.0)

    def test_eps_of_two_tensors(self, grid):
        """ε^{μνρσ} F_{μν} F_{ρσ} = 8 F_01 F_23."""
        F = _tensor(grid, (1.0, 0.0, 0.0, 0.0, 0.0, 3.0))
        result = eval_functional(parse_functional("eps(F, F)"), {"F": F})
        profile = F.samples[0]
        np.testing.assert_allclose(result.samples[0], 8.0 * 3.0 * profile**2)

    def test_dual_is_involution_up_to_sign(self, grid):
        """Em assinatura lorentziana o dual duplo de F é -4 F com esta normalização."""
        F = _tensor(grid, (1.0, -0.5, 0.2, 0.7, 0.0, 1.3))
        result = eval_functional(parse_functional("dual(dual(F))"), {"F": F})
        np.testing.assert_allclose(result.samples, -4.0 * F.samples, atol=1e-12)

    def test_deriv_matches_gradient(self, scalar):
        result = eval_functional(parse_functional("deriv(f)"), {"f": scalar})
        for mu in range(4):
            np.testing.assert_allclose(result.samples[mu], gradient4(scalar, mu).samples[0])

    def test_div_of_deriv_is_wave_operator(self, scalar):
        """div(deriv(f)) = ∂^μ∂_μ f, igual à soma das segundas diferenças com a métrica."""
        result = eval_functional(parse_functional("div(deriv(f))"), {"f": scalar})
        expected = sum(
            (1.0 if mu == 0 else -1.0) * gradient4(gradient4(scalar, mu), mu).samples[0]
            for mu in range(4)
        )
        np.testing.assert_allclose(result.samples[0], expected, atol=1e-12)

    def test_curl_of_gradient_vanishes(self, scalar):
        result = eval_functional(parse_functional("curl(deriv(f))"), {"f": scalar})
        np.testing.assert_allclose(result.samples, 0.0, atol=1e-12)

    def test_unbound_slot(self, scalar):
        with pytest.raises(UnboundSlotError):
            eval_functional(parse_functional("f * g"), {"f": scalar})

    def test_bound_rank_mismatch(self, scalar):
        with pytest.raises(RankError):
            eval_functional(parse_functional("eta(J, J)"), {"J": scalar})

    def test_grid_mismatch(self, scalar):
        other = gaussian_packet().sample(make_grid(GridSpec(8, 10, 0.5, 0.5)))
        with pytest.raises(GridMismatchError):
            eval_functional(parse_functional("f * g"), {"f": scalar, "g": other})
