"""SLOCC filtering, overlap with phi_d and the seesaw estimate of E_d.

A single-term filter is a pair ``(A, B)`` of ``d x dA`` and ``d x dB``
matrices. The filtered state is ``(A (x) B) rho (A (x) B)^dag`` and its
normalized overlap with ``phi_d`` is the quantity maximized by
:func:`e_d_seesaw`. With ``B`` fixed the objective is a ratio of quadratic
forms in ``vec(conj A)``, so each half step is a generalized eigenproblem.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .states import phi_vector
from .tensor_core import (
    DensityOperator,
    HilbertFactorization,
    Operator,
    bipartite_matrix,
    matrix_to_dict,
    rayleigh_max,
)

DEGENERATE_REL = 1e-14


class FilterAnnihilationError(ValueError):
    """The filter maps the state to zero, so no normalized output exists."""


@dataclass(frozen=True)
class LocalFilterPair:
    a: np.ndarray
    b: np.ndarray
    d: int

    def __post_init__(self):
        a = np.array(self.a, dtype=complex)
        b = np.array(self.b, dtype=complex)
        if a.ndim != 2 or b.ndim != 2 or a.shape[0] != self.d or b.shape[0] != self.d:
            raise ValueError(f"filters must have {self.d} rows, got {a.shape} and {b.shape}")
        if not (np.any(a) and np.any(b)):
            raise ValueError("filter matrices must be nonzero")
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def kraus(self) -> np.ndarray:
        return np.kron(self.a, self.b)

    def normalized(self) -> "LocalFilterPair":
        """Rescale each side to unit operator norm, the largest admissible success rate."""
        return LocalFilterPair(self.a / np.linalg.norm(self.a, 2),
                               self.b / np.linalg.norm(self.b, 2), self.d)

    def to_dict(self) -> dict:
        return {"d": self.d, "a": matrix_to_dict(self.a), "b": matrix_to_dict(self.b)}


@dataclass(frozen=True)
class SeparableMapSpec:
    terms: tuple[LocalFilterPair, ...]

    def __post_init__(self):
        terms = tuple(self.terms)
        if not terms:
            raise ValueError("a separable map needs at least one term")
        shapes = {(t.a.shape, t.b.shape, t.d) for t in terms}
        if len(shapes) != 1:
            raise ValueError("all terms must have the same shapes")
        object.__setattr__(self, "terms", terms)

    @property
    def d(self) -> int:
        return self.terms[0].d

    def apply(self, m: np.ndarray) -> np.ndarray:
        out = 0
        for t in self.terms:
            k = t.kraus
            out = out + k @ m @ k.conj().T
        return out


def _state_array(rho) -> tuple[np.ndarray, int, int]:
    if isinstance(rho, Operator):
        return bipartite_matrix(rho)
    m = np.asarray(rho, dtype=complex)
    k = int(round(np.sqrt(m.shape[0])))
    if k * k != m.shape[0]:
        raise ValueError("raw arrays must act on an equal-sided bipartition")
    return m, k, k


def apply_filter(rho, f: LocalFilterPair | SeparableMapSpec) -> tuple[DensityOperator, float]:
    """Unnormalized filtered state on C^d (x) C^d and its trace (the success weight)."""
    m, da, db = _state_array(rho)
    spec = f if isinstance(f, SeparableMapSpec) else SeparableMapSpec((f,))
    t0 = spec.terms[0]
    if t0.a.shape[1] != da or t0.b.shape[1] != db:
        raise ValueError(f"filter columns {t0.a.shape[1]}, {t0.b.shape[1]} do not match party dims {da}, {db}")
    out = spec.apply(m)
    tr = float(np.real(np.trace(out)))
    if tr <= DEGENERATE_REL * float(np.real(np.trace(m))):
        raise FilterAnnihilationError("filter annihilates the state")
    d = spec.d
    return DensityOperator(out, HilbertFactorization.bipartite(d)), tr


def fidelity_with_phid(rho, d: int) -> float:
    """tr[rho phi_d] / tr[rho] for an operator on C^d (x) C^d."""
    m = rho.matrix if isinstance(rho, Operator) else np.asarray(rho, dtype=complex)
    if m.shape != (d * d, d * d):
        raise ValueError(f"expected a {d * d}x{d * d} operator, got {m.shape}")
    v = phi_vector(d)
    return float(np.real(v.conj() @ m @ v) / np.real(np.trace(m)))


def f_d_from_e(e: float, d: int) -> float:
    """Conclusive teleportation fidelity (1 + d e)/(1 + d)."""
    if not 1 / d - 1e-9 <= e <= 1 + 1e-9:
        raise ValueError(f"e = {e} lies outside [1/d, 1]")
    return (1 + d * e) / (1 + d)


def single_term_dominance_check(rho, spec: SeparableMapSpec, d: int, tol: float = 1e-10) -> bool:
    """True iff the best single term does at least as well as the whole map."""
    m, _, _ = _state_array(rho)
    v = phi_vector(d)
    nums, dens = [], []
    for t in spec.terms:
        k = t.kraus
        o = k @ m @ k.conj().T
        nums.append(np.real(v.conj() @ o @ v))
        dens.append(np.real(np.trace(o)))
    nums, dens = np.array(nums), np.array(dens)
    total = nums.sum() / dens.sum()
    ok = dens > DEGENERATE_REL * np.real(np.trace(m))
    best = np.max(nums[ok] / dens[ok])
    return bool(best >= total - tol)


# -- seesaw -------------------------------------------------------------------

@dataclass(frozen=True)
class SeesawConfig:
    restarts: int = 64
    max_iterations: int = 500
    tolerance: float = 1e-9
    regularization: float = 1e-12
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if min(self.restarts, self.max_iterations) < 1 or self.tolerance <= 0 or self.regularization <= 0:
            raise ValueError("seesaw settings must be positive")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")

    def to_dict(self) -> dict:
        return dict(restarts=self.restarts, max_iterations=self.max_iterations,
                    tolerance=self.tolerance, regularization=self.regularization,
                    seed=self.seed, threads=self.threads)


@dataclass
class SeesawResult:
    e_lower: float
    best_filter: LocalFilterPair
    success_probability: float
    trace_of_filtered: float
    converged: bool
    objective_trace: list[float]
    best_restart: int = 0
    config: SeesawConfig | None = None
    restart_values: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "e_lower": self.e_lower,
            "success_probability": self.success_probability,
            "trace_of_filtered": self.trace_of_filtered,
            "converged": self.converged,
            "best_restart": self.best_restart,
            "objective_trace": list(self.objective_trace),
            "best_filter": self.best_filter.to_dict(),
            "config": None if self.config is None else self.config.to_dict(),
        }


class _Objective:
    """Quadratic-form bookkeeping for one bipartite state."""

    def __init__(self, m: np.ndarray, da: int, db: int, d: int, reg: float):
        self.m = m
        self.da, self.db, self.d = da, db, d
        self.r = m.reshape(da, db, da, db)
        self.r_swap = self.r.transpose(1, 0, 3, 2)
        self.tr = float(np.real(np.trace(m)))
        self.phi = phi_vector(d)
        self.reg = reg

    def value(self, a: np.ndarray, b: np.ndarray) -> tuple[float, float]:
        k = np.kron(a, b)
        o = k @ self.m @ k.conj().T
        tr = float(np.real(np.trace(o)))
        num = float(np.real(self.phi.conj() @ o @ self.phi))
        return (num / tr if tr > 0 else -np.inf), tr

    def best_response(self, fixed: np.ndarray, swap: bool) -> np.ndarray:
        r = self.r_swap if swap else self.r
        d = self.d
        t = np.einsum("bj,ijkl,el->ibke", fixed, r, fixed.conj(), optimize=True)
        n = t.shape[0]
        num = t.transpose(1, 0, 3, 2).reshape(d * n, d * n) / d
        den = np.kron(np.eye(d), np.einsum("ibkb->ik", t))
        _, x = rayleigh_max(num, den, self.reg * float(np.real(np.trace(den))))
        return x.conj().reshape(d, n)


def _random_filter(rng: np.random.Generator, d: int, n: int) -> np.ndarray:
    return rng.standard_normal((d, n)) + 1j * rng.standard_normal((d, n))


def _floor_filter(obj: _Objective) -> tuple[np.ndarray, np.ndarray]:
    """Project onto the heaviest product basis state and output |00>: fidelity exactly 1/d."""
    diag = np.real(np.diag(obj.m)).reshape(obj.da, obj.db)
    i, j = np.unravel_index(np.argmax(diag), diag.shape)
    a = np.zeros((obj.d, obj.da), dtype=complex)
    b = np.zeros((obj.d, obj.db), dtype=complex)
    a[0, i] = 1
    b[0, j] = 1
    return a, b


def _run_one(obj: _Objective, cfg: SeesawConfig, index: int, init) -> tuple[float, np.ndarray, np.ndarray, bool, list]:
    rng = np.random.default_rng([cfg.seed, index])
    for _ in range(100):
        if init is not None:
            a, b = init
            init = None
        else:
            a = _random_filter(rng, obj.d, obj.da)
            b = _random_filter(rng, obj.d, obj.db)
        val, tr = obj.value(a, b)
        scale = np.linalg.norm(a, 2) ** 2 * np.linalg.norm(b, 2) ** 2
        if tr > DEGENERATE_REL * obj.tr * scale:
            break
    else:
        return -np.inf, a, b, False, []
    trace = [val]
    converged = False
    for _ in range(cfg.max_iterations):
        prev = val
        a_new = obj.best_response(b, swap=False)
        v1, t1 = obj.value(a_new, b)
        if v1 >= val and t1 > 0:
            a, val = a_new, v1
        b_new = obj.best_response(a, swap=True)
        v2, t2 = obj.value(a, b_new)
        if v2 >= val and t2 > 0:
            b, val = b_new, v2
        trace.append(val)
        if abs(val - prev) < cfg.tolerance:
            converged = True
            break
    _, tr = obj.value(a, b)
    scale = np.linalg.norm(a, 2) ** 2 * np.linalg.norm(b, 2) ** 2
    if tr <= DEGENERATE_REL * obj.tr * scale:
        return -np.inf, a, b, False, trace
    return val, a, b, converged, trace


def e_d_seesaw(rho, d: int, cfg: SeesawConfig | None = None,
               initial_filters: list[LocalFilterPair] | None = None) -> SeesawResult:
    """Lower bound on E_d(rho) by alternating maximization over single-term filters.

    ``initial_filters`` are tried first, then ``cfg.restarts`` complex-Gaussian
    starts; ties go to the lowest index. Each restart draws from its own
    generator seeded by ``(cfg.seed, index)``.
    """
    cfg = cfg or SeesawConfig()
    if d < 2:
        raise ValueError("d must be >= 2")
    m, da, db = _state_array(rho)
    if not np.any(m) or np.real(np.trace(m)) <= 0:
        raise ValueError("state must be nonzero")
    obj = _Objective(m, da, db, d, cfg.regularization)
    inits = [(f.a, f.b) for f in (initial_filters or [])]
    n_total = len(inits) + cfg.restarts

    def job(i):
        return _run_one(obj, cfg, i, inits[i] if i < len(inits) else None)

    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as ex:
            runs = list(ex.map(job, range(n_total)))
    else:
        runs = [job(i) for i in range(n_total)]

    values = [r[0] for r in runs]
    best = int(np.argmax(values))  # argmax returns the first maximal index
    val, a, b, converged, trace = runs[best]
    if not val >= 1 / d:
        a, b = _floor_filter(obj)
        val, _ = obj.value(a, b)
        converged, trace, best = True, [val], -1
    filt = LocalFilterPair(a, b, d).normalized()
    val, tr = obj.value(filt.a, filt.b)
    return SeesawResult(
        e_lower=float(val),
        best_filter=filt,
        success_probability=float(tr / obj.tr),
        trace_of_filtered=float(tr),
        converged=bool(converged),
        objective_trace=[float(x) for x in trace],
        best_restart=best,
        config=cfg,
        restart_values=[float(x) for x in values],
    )


def filter_fidelity(rho, f: LocalFilterPair) -> float:
    """Re-evaluate the normalized phi_d overlap reached by ``f``."""
    out, _ = apply_filter(rho, f)
    return fidelity_with_phid(out, f.d)


def random_filter_pair(rng: np.random.Generator, d: int, da: int, db: int | None = None) -> LocalFilterPair:
    db = da if db is None else db
    return LocalFilterPair(_random_filter(rng, d, da), _random_filter(rng, d, db), d)
