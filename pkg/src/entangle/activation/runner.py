"""Search for (rho, sigma, lambda, d) instances where sigma lifts E_d(rho) above lambda."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ..filters import SeesawConfig, SeesawResult, e_d_seesaw, filter_fidelity
from ..states import bound_entangled_33
from ..tensor_core import DensityOperator
from .core import (
    activation_condition,
    activation_filter,
    activation_filter_fidelity,
    as_sigma,
    joint_state,
    rho_dims,
    witness_from_rho,
)
from .families import (
    DEFAULT_CHOI_WEIGHTS,
    DEFAULT_NOISE,
    DEMO_ALPHA,
    DEMO_LAMBDA,
    EBoundCertificate,
    certify_decomposition,
    certify_separable_floor,
    choi_flagged_state,
    design_choi_weights,
    separable_floor_state,
)

FAMILIES = ("auto", "separable-floor", "choi-flagged")
INCONCLUSIVE_NOTE = (
    "not-found under a finite family and budget is inconclusive: it does not show that sigma is separable"
)


@dataclass(frozen=True)
class ActivationBudget:
    restarts: int = 16
    max_iterations: int = 500
    seed: int = 0
    threads: int = 1
    max_dim: int = 1024
    design: bool = False
    witness_samples: int = 10_000
    noise: float = DEFAULT_NOISE
    solver: str = "SCS"

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class ActivationInstance:
    rho: DensityOperator
    sigma: DensityOperator
    lam: float
    d: int
    e_rho_bound: EBoundCertificate
    e_joint_lower: SeesawResult
    condition: float
    family: str
    reverified_fidelity: float
    activation_filter_fidelity: float
    witness_min_over_products: float | None = None
    e_rho_seesaw: float | None = None
    found: bool = True

    def to_dict(self) -> dict:
        return {
            "found": True,
            "lambda": self.lam,
            "d": self.d,
            "family": self.family,
            "certificate": self.e_rho_bound.to_dict(),
            "activation_condition": self.condition,
            "activation_filter_fidelity": self.activation_filter_fidelity,
            "joint_seesaw": self.e_joint_lower.to_dict(),
            "reverified_fidelity": self.reverified_fidelity,
            "witness_min_over_products": self.witness_min_over_products,
            "e_rho_seesaw": self.e_rho_seesaw,
        }


@dataclass
class NotFoundReport:
    lam: float
    d: int
    min_condition: float
    best_joint: float | None
    tried: list[dict] = field(default_factory=list)
    note: str = INCONCLUSIVE_NOTE
    found: bool = False

    def to_dict(self) -> dict:
        return {
            "found": False,
            "lambda": self.lam,
            "d": self.d,
            "min_activation_condition": self.min_condition,
            "best_joint_e_lower": self.best_joint,
            "tried": self.tried,
            "note": self.note,
        }


def candidates(family: str, sigma: DensityOperator, lam: float, d: int,
               budget: ActivationBudget) -> list[tuple[str, DensityOperator]]:
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}; expected one of {FAMILIES}")
    p, r = sigma.factorization.dims
    out = []
    choi_ok = (p, r) == (3, 3) and d == 2
    if family == "choi-flagged" and not choi_ok:
        raise ValueError("the choi-flagged family needs a 3x3 sigma and d = 2")
    if family in ("auto", "choi-flagged") and choi_ok:
        out.append(("choi-flagged", choi_flagged_state(DEFAULT_CHOI_WEIGHTS, budget.noise)))
        if budget.design and np.max(np.abs(sigma.matrix.imag)) < 1e-14:
            w, _ = design_choi_weights(sigma, lam, solver=budget.solver)
            out.append(("choi-flagged", choi_flagged_state(w, budget.noise)))
    if family in ("auto", "separable-floor"):
        out.append(("separable-floor", separable_floor_state(p, r, d)))
    return out


def certify(label: str, rho: DensityOperator, lam: float, d: int, solver: str = "SCS") -> EBoundCertificate:
    if label == "separable-floor":
        return certify_separable_floor(rho, lam, d)
    return certify_decomposition(rho, lam, d, solver=solver)


def run_activation_experiment(sigma, lam: float, d: int, family: str = "auto",
                              budget: ActivationBudget | None = None):
    """Try each family candidate: certify E_d(rho) <= lambda, then seesaw on sigma (x) rho.

    Candidates are visited in order of increasing activation condition. The
    seesaw is seeded with the activation filter before its random restarts.
    Returns an :class:`ActivationInstance` or a :class:`NotFoundReport`.
    """
    budget = budget or ActivationBudget()
    if not 0 < lam < 1:
        raise ValueError("lambda must lie in (0, 1)")
    sigma = as_sigma(sigma)
    cands = candidates(family, sigma, lam, d, budget)
    scored = sorted(((activation_condition(rho, sigma, lam, d), i, label, rho)
                     for i, (label, rho) in enumerate(cands)), key=lambda t: (t[0], t[1]))
    cfg = SeesawConfig(restarts=budget.restarts, max_iterations=budget.max_iterations,
                       seed=budget.seed, threads=budget.threads)
    tried = []
    best_joint = None
    for cond, _, label, rho in scored:
        entry = {"family": label, "activation_condition": cond}
        tried.append(entry)
        if lam < 1 / d:
            entry["certificate"] = "lambda below 1/d"
            continue
        cert = certify(label, rho, lam, d, budget.solver)
        entry["certificate"] = cert.to_dict()
        if not cert.valid:
            continue
        joint = joint_state(sigma, rho, d, max_dim=budget.max_dim)
        p, r = rho_dims(rho, d)
        res = e_d_seesaw(joint, d, cfg, initial_filters=[activation_filter(p, r, d)])
        entry["joint_e_lower"] = res.e_lower
        best_joint = res.e_lower if best_joint is None else max(best_joint, res.e_lower)
        if res.e_lower <= lam:
            continue
        recheck = filter_fidelity(joint, res.best_filter)
        if abs(recheck - res.e_lower) > 1e-8:
            entry["reverify_mismatch"] = recheck
            continue
        wit = witness_from_rho(rho, lam, d, cert)
        return ActivationInstance(
            rho=rho, sigma=sigma, lam=lam, d=d, e_rho_bound=cert, e_joint_lower=res,
            condition=cond, family=label, reverified_fidelity=recheck,
            activation_filter_fidelity=activation_filter_fidelity(rho, sigma, d),
            witness_min_over_products=wit.min_over_products(budget.witness_samples, budget.seed),
        )
    return NotFoundReport(lam, d, min(t[0] for t in scored), best_joint, tried)


def demo_instance(budget: ActivationBudget | None = None) -> tuple[ActivationInstance | NotFoundReport, float]:
    """Run the shipped demo: 3x3 PPT entangled sigma (alpha = 4), lambda = 0.8, d = 2.

    Returns the outcome and the wall-clock time in seconds.
    """
    t0 = time.perf_counter()
    out = run_activation_experiment(bound_entangled_33(DEMO_ALPHA), DEMO_LAMBDA, 2, "choi-flagged", budget)
    return out, time.perf_counter() - t0
