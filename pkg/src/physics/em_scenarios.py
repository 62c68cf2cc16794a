"""Modelos de eletromagnetismo deformado sobre slots ``J`` (corrente),
``S`` (corrente axial) e ``F`` (tensor de campo).

Os valores padrão de λ e κ são arbitrários: servem só para exercitar os
termos de interação.
"""

import logging
from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np

from src.errors import InputError, ModelError, RankError
from src.fields.functionals import parse_functional
from src.fields.kernels import Kernel
from src.fields.lattice import Rank
from src.fields.testfunctions import TestFunction
from src.physics.algebra import ModelTerm, NonlinearModel, XiEngine

logger = logging.getLogger(__name__)

EM_SLOTS: dict[str, Rank] = {"J": Rank.VECTOR, "S": Rank.VECTOR, "F": Rank.ANTISYM2}


@dataclass(frozen=True)
class EMModelParams:
    """Parâmetros do modelo EM deformado.

    Attributes:
        lambdas: ``λ1..λ7 >= 0``; ``λ4..λ7`` só entram com o termo axial.
        kappa1: Acoplamento de ``J^μ f_{μα}`` no termo λ1.
        kappa2: Acoplamento de ``ε J f`` (λ5) e de ``∂_μ f^{μα}`` (termo de divergência).
        kappa3: Acoplamento do dual de ``f`` (λ6) e de ``f`` no termo de rotacional.
        mass_v: Massa do núcleo vetorial.
        sigma_t: ``σT`` do núcleo vetorial.
        sigma_s: ``σS`` do núcleo vetorial.
        lambda_div: Peso do termo ``(J + κ2 ∂f)_V``.
        lambda_curl: Peso do termo ``(∂_{[α}J_{μ]} + κ3 f)_EM``.
        mass_s: Massa do núcleo escalar dos termos estendidos.
        lambda_ext: Peso dos invariantes escalares estendidos.
        kappa_pv: Acoplamento do termo que viola paridade.
        lambda_pv: Peso do termo que viola paridade.
        mass_overrides: ``rótulo -> massa`` por termo vetorial ou escalar.
        sigma_overrides: ``rótulo -> (σT, σS)`` por termo vetorial.
    """

    lambdas: tuple[float, ...] = (0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1)
    kappa1: float = 1.0
    kappa2: float = 1.0
    kappa3: float = 1.0
    mass_v: float = 1.0
    sigma_t: float = 1.0
    sigma_s: float = 0.5
    lambda_div: float = 0.1
    lambda_curl: float = 0.1
    mass_s: float = 1.0
    lambda_ext: float = 0.1
    kappa_pv: float = 1.0
    lambda_pv: float = 0.1
    mass_overrides: Mapping[str, float] = field(default_factory=dict)
    sigma_overrides: Mapping[str, tuple[float, float]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        lambdas = tuple(float(v) for v in self.lambdas)
        if len(lambdas) != 7:
            raise ModelError(f"São necessários 7 valores de λ, recebidos {len(lambdas)}.")
        object.__setattr__(self, "lambdas", lambdas)
        weights = (*lambdas, self.lambda_div, self.lambda_curl, self.lambda_ext, self.lambda_pv)
        if not all(np.isfinite(w) and w >= 0 for w in weights):
            raise ModelError(f"Pesos λ devem ser >= 0: {weights}.")
        if not all(np.isfinite(k) for k in (self.kappa1, self.kappa2, self.kappa3, self.kappa_pv)):
            raise ModelError("Acoplamentos κ devem ser finitos.")
        if not self.mass_v > 0:
            raise ModelError(f"m_V deve ser positiva, recebido {self.mass_v}.")
        if not (self.sigma_t >= self.sigma_s >= 0):
            raise ModelError(f"Exige σT >= σS >= 0 (σT={self.sigma_t}, σS={self.sigma_s}).")

    def vector_kernel(self, label: str) -> Kernel:
        mass = self.mass_overrides.get(label, self.mass_v)
        sigma_t, sigma_s = self.sigma_overrides.get(label, (self.sigma_t, self.sigma_s))
        return Kernel.vector(mass, sigma_t, sigma_s, label=label)

    def scalar_kernel(self, label: str) -> Kernel:
        return Kernel.scalar(self.mass_overrides.get(label, self.mass_s), label=label)


def _term(text: str, kernel: Kernel, weight: float) -> ModelTerm:
    return ModelTerm(parse_functional(text, EM_SLOTS), kernel, float(weight), label=kernel.label)


def build_em_model(
    params: EMModelParams,
    include_axial: bool = False,
    include_derivative_terms: bool = False,
    extended: bool = False,
) -> NonlinearModel:
    """Monta o modelo EM com os termos selecionados.

    Termos (na ordem): ``F`` (EM), ``J`` (V), ``S`` (V, axial), λ1..λ3,
    λ4..λ7 (axial), divergência e rotacional (derivadas), invariantes
    escalares e termo de paridade (estendido).
    """
    k1, k2, k3 = params.kappa1, params.kappa2, params.kappa3
    lam = params.lambdas
    terms = [
        _term("F", Kernel.em("base_F"), 1.0),
        _term("J", params.vector_kernel("base_J"), 1.0),
    ]
    if include_axial:
        terms.append(_term("S", params.vector_kernel("base_S"), 1.0))
    terms += [
        _term(f"J + {k1!r} * contract(J, F)", params.vector_kernel("lambda1"), lam[0]),
        _term("contract(J, F)", params.vector_kernel("lambda2"), lam[1]),
        _term("eps(J, F)", params.vector_kernel("lambda3"), lam[2]),
    ]
    if include_axial:
        terms += [
            _term("contract(S, F)", params.vector_kernel("lambda4"), lam[3]),
            _term(f"contract(S, F) + {k2!r} * eps(J, F)", params.vector_kernel("lambda5"), lam[4]),
            _term(f"wedge(S, J) + {k3!r} * dual(F)", Kernel.em("lambda6"), lam[5]),
            _term("wedge(S, J)", Kernel.em("lambda7"), lam[6]),
        ]
    if include_derivative_terms:
        terms += [
            _term(f"J + {k2!r} * div(F)", params.vector_kernel("div"), params.lambda_div),
            _term(f"curl(J) + {k3!r} * F", Kernel.em("curl"), params.lambda_curl),
        ]
    if extended:
        terms += [
            _term("eta(J, J)", params.scalar_kernel("eta_JJ"), params.lambda_ext),
            _term("eta(F, F)", params.scalar_kernel("eta_FF"), params.lambda_ext),
        ]
        if include_axial:
            terms += [
                _term("eta(S, S)", params.scalar_kernel("eta_SS"), params.lambda_ext),
                _term("eta(J, S)", params.scalar_kernel("eta_JS"), params.lambda_ext),
            ]
        terms.append(
            _term(f"J + {params.kappa_pv!r} * eps(J, F)", params.vector_kernel("parity"), params.lambda_pv)
        )
    logger.debug("Modelo EM com %d termos.", len(terms))
    return NonlinearModel(tuple(terms))


@dataclass(frozen=True)
class EMProbe:
    """Trio ``(J, S, F)`` de funções teste; ao menos uma presente."""

    J: TestFunction | None = None
    S: TestFunction | None = None
    F: TestFunction | None = None

    def __post_init__(self) -> None:
        present = self.as_bindings()
        if not present:
            raise InputError("Sonda EM sem nenhuma função.")
        for slot, fn in present.items():
            if fn.rank is not EM_SLOTS[slot]:
                raise RankError(
                    f"Slot {slot} exige posto {EM_SLOTS[slot].value}, recebeu {fn.rank.value}."
                )

    def as_bindings(self) -> dict[str, TestFunction]:
        slots = {"J": self.J, "S": self.S, "F": self.F}
        return {slot: fn for slot, fn in slots.items() if fn is not None}


def vacuum_cross_correlation(probe_j: EMProbe, probe_f: EMProbe, engine: XiEngine) -> complex:
    """Termo de 2 pontos ``ξ(probe_J, probe_F)`` entre corrente e campo no vácuo.

    Raises:
        InputError: ``probe_j`` sem ``J`` ou com ``F``; ``probe_f`` com algo além de ``F``.
    """
    if probe_j.J is None or probe_j.F is not None:
        raise InputError("A sonda de corrente deve ter J e não ter F.")
    if probe_f.F is None or probe_f.J is not None or probe_f.S is not None:
        raise InputError("A sonda de campo deve conter apenas F.")
    return engine.xi(probe_j, probe_f)


def normalized_cross_correlation(probe_j: EMProbe, probe_f: EMProbe, engine: XiEngine) -> float:
    """``|ξ(J, F)| / sqrt(ξ(J, J) ξ(F, F))``."""
    cross = vacuum_cross_correlation(probe_j, probe_f, engine)
    scale = np.sqrt(engine.xi(probe_j, probe_j).real * engine.xi(probe_f, probe_f).real)
    return float(abs(cross) / scale) if scale > 0 else 0.0
