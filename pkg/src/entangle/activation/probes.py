"""Randomized probes of the threshold-operator lemma and of Werner-parameter monotonicity."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..filters import FilterAnnihilationError, LocalFilterPair, SeparableMapSpec
from ..states import _werner_matrix, haar_random_unitary, sym_projectors
from .core import threshold_operator

PSD_HOLDS_TOL = 1e-9
GAP_TOL = 1e-6


def threshold_probe(spec: SeparableMapSpec, lam: float, d: int) -> tuple[bool, float]:
    """Return ``(psd_holds, trace_gap)`` for X - $(X) with X = lambda I - phi_d.

    Whenever the difference is PSD its trace must vanish.
    """
    if not 1 / d - 1e-12 <= lam < 1:
        raise ValueError("lambda must lie in [1/d, 1)")
    x = threshold_operator(lam, d)
    diff = x - spec.apply(x)
    diff = (diff + diff.conj().T) / 2
    lmin = float(np.linalg.eigvalsh(diff)[0])
    return lmin >= -PSD_HOLDS_TOL, float(np.real(np.trace(diff)))


def random_threshold_map(rng: np.random.Generator, d: int, n_terms: int = 1) -> SeparableMapSpec:
    """Random separable map for the lemma probe.

    Most draws are complex-Gaussian pairs scaled to unit operator norm; a
    quarter are local unitaries U (x) conj(U) with a contraction factor
    close to one, which keeps the PSD branch populated.
    """
    terms = []
    for _ in range(n_terms):
        if rng.random() < 0.25:
            u = haar_random_unitary(d, rng)
            s = 1 - abs(rng.normal(scale=1e-3)) if rng.random() < 0.5 else 1.0
            terms.append(LocalFilterPair(np.sqrt(s) * u, np.sqrt(s) * u.conj(), d))
        else:
            a = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
            b = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
            terms.append(LocalFilterPair(a / np.linalg.norm(a, 2), b / np.linalg.norm(b, 2), d))
    return SeparableMapSpec(tuple(terms))


@dataclass
class ProbeSummary:
    trials: int
    psd_count: int
    counterexamples: int
    max_gap_when_psd: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def threshold_suite(lam: float, d: int, trials: int, seed: int = 0) -> ProbeSummary:
    rng = np.random.default_rng(seed)
    psd_count = bad = 0
    worst = 0.0
    for _ in range(trials):
        ok, gap = threshold_probe(random_threshold_map(rng, d), lam, d)
        if ok:
            psd_count += 1
            worst = max(worst, abs(gap))
            if abs(gap) > GAP_TOL:
                bad += 1
    return ProbeSummary(trials, psd_count, bad, worst)


def werner_mu_monotonicity_probe(mu: float, d: int, spec: SeparableMapSpec | LocalFilterPair) -> tuple[float, bool]:
    """Filter a Werner state, twirl it back and compare the new parameter mu' with mu."""
    spec = spec if isinstance(spec, SeparableMapSpec) else SeparableMapSpec((spec,))
    out = spec.apply(_werner_matrix(mu, d))
    tr = float(np.real(np.trace(out)))
    if tr <= 1e-14:
        raise FilterAnnihilationError("map annihilates the Werner state")
    _, pa = sym_projectors(d)
    mu_new = float(np.real(np.trace(out @ pa))) / tr
    return mu_new, mu_new <= mu + 1e-9


def werner_suite(mu: float, d: int, trials: int, seed: int = 0) -> tuple[int, float]:
    """Number of violations and the largest mu' - mu over random Gaussian filters."""
    rng = np.random.default_rng(seed)
    bad = 0
    worst = -np.inf
    for _ in range(trials):
        a = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        b = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        mu_new, ok = werner_mu_monotonicity_probe(mu, d, LocalFilterPair(a, b, d))
        bad += not ok
        worst = max(worst, mu_new - mu)
    return bad, float(worst)
