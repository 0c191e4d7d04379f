"""Canonical state families, twirls, PPT tests and Haar sampling."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .tensor_core import (
    PSD_TOL,
    DensityOperator,
    HilbertFactorization,
    Operator,
    as_density,
    load_density,
    partial_transpose,
)


def _bip(d: int) -> HilbertFactorization:
    return HilbertFactorization.bipartite(d)


def phi_vector(d: int) -> np.ndarray:
    if d < 2:
        raise ValueError("d must be >= 2")
    v = np.zeros(d * d, dtype=complex)
    v[:: d + 1] = 1 / np.sqrt(d)
    return v


def phi_projector(d: int) -> np.ndarray:
    v = phi_vector(d)
    return np.outer(v, v.conj())


def max_entangled(d: int) -> tuple[DensityOperator, np.ndarray]:
    """Projector onto (1/sqrt d) sum_s |ss> and the vector itself."""
    v = phi_vector(d)
    return DensityOperator(np.outer(v, v.conj()), _bip(d), normalized=True), v


def swap_operator(d: int) -> np.ndarray:
    s = np.zeros((d * d, d * d))
    for i in range(d):
        for j in range(d):
            s[j * d + i, i * d + j] = 1
    return s


def sym_projectors(d: int) -> tuple[np.ndarray, np.ndarray]:
    """Unnormalized symmetric and antisymmetric projectors ``(P_s, P_a)``."""
    f = swap_operator(d)
    eye = np.eye(d * d)
    return (eye + f) / 2, (eye - f) / 2


@dataclass(frozen=True)
class WernerParam:
    mu: float
    d: int = 2

    def __post_init__(self):
        if not 0 <= self.mu <= 1:
            raise ValueError(f"mu must lie in [0, 1], got {self.mu}")
        if self.d < 2:
            raise ValueError("d must be >= 2")

    @property
    def entangled(self) -> bool:
        return self.mu > 0.5


def _werner_matrix(mu: float, d: int) -> np.ndarray:
    ps, pa = sym_projectors(d)
    wm = pa / (d * (d - 1) / 2)
    wp = ps / (d * (d + 1) / 2)
    return mu * wm + (1 - mu) * wp


def werner(p: WernerParam) -> DensityOperator:
    """mu * omega_minus + (1 - mu) * omega_plus with normalized (anti)symmetric projectors."""
    return DensityOperator(_werner_matrix(p.mu, p.d), _bip(p.d), normalized=True)


def isotropic(f: float, d: int) -> DensityOperator:
    """f * phi_d + (1 - f) * (I - phi_d) / (d^2 - 1)."""
    if not 0 <= f <= 1:
        raise ValueError(f"fidelity must lie in [0, 1], got {f}")
    phi = phi_projector(d)
    m = f * phi + (1 - f) * (np.eye(d * d) - phi) / (d * d - 1)
    return DensityOperator(m, _bip(d), normalized=True)


def product_basis(d: int, i: int = 1, j: int | None = None, db: int | None = None) -> DensityOperator:
    """|i><i| (x) |j><j|; defaults to |1>|1>."""
    db = d if db is None else db
    j = i if j is None else j
    if not (0 <= i < d and 0 <= j < db):
        raise ValueError("basis index out of range")
    v = np.zeros(d * db)
    v[i * db + j] = 1
    return DensityOperator(np.outer(v, v), HilbertFactorization.bipartite(d, db), normalized=True)


def schmidt_state(theta: float) -> tuple[DensityOperator, np.ndarray]:
    """cos(theta)|00> + sin(theta)|11> on two qubits."""
    v = np.array([np.cos(theta), 0, 0, np.sin(theta)], dtype=complex)
    return DensityOperator(np.outer(v, v.conj()), _bip(2), normalized=True), v


def bound_entangled_33(alpha: float) -> DensityOperator:
    """Three-parameter 3x3 family 2/7 P+ + alpha/7 s+ + (5 - alpha)/7 s-.

    PPT for 2 <= alpha <= 4 (alpha <= 3 separable), entangled for alpha > 3.
    """
    if not 2 <= alpha <= 5:
        raise ValueError("alpha must lie in [2, 5]")
    sp, sm = cyclic_projectors()
    m = 2 / 7 * phi_projector(3) + alpha / 7 * sp / 3 + (5 - alpha) / 7 * sm / 3
    return DensityOperator(m.astype(complex), _bip(3), normalized=True)


def cyclic_projectors() -> tuple[np.ndarray, np.ndarray]:
    """Sums of |i, i+1><i, i+1| and |i+1, i><i+1, i| on 3x3 (indices mod 3)."""
    sp = np.zeros((9, 9))
    sm = np.zeros((9, 9))
    for i in range(3):
        a = 3 * i + (i + 1) % 3
        b = 3 * ((i + 1) % 3) + i
        sp[a, a] = 1
        sm[b, b] = 1
    return sp, sm


def _as_array_2party(rho) -> tuple[np.ndarray, int, HilbertFactorization | None]:
    if isinstance(rho, Operator):
        m, fac = rho.matrix, rho.factorization
    else:
        m, fac = np.asarray(rho, dtype=complex), None
    n = m.shape[0]
    d = int(round(np.sqrt(n)))
    if m.ndim != 2 or m.shape[1] != n or d * d != n:
        raise ValueError("twirls act on square operators on C^d (x) C^d")
    if fac is not None and fac.dims != (d, d):
        raise ValueError(f"twirls need a d x d factorization, got {fac.dims}")
    return m, d, fac


def _wrap(rho, m, d, fac):
    if isinstance(rho, DensityOperator):
        return DensityOperator(m, fac)
    if isinstance(rho, Operator):
        return Operator(m, fac)
    return m


def twirl_werner(rho):
    """U (x) U twirl in closed form: tr[rho P_a] omega_minus + tr[rho P_s] omega_plus."""
    m, d, fac = _as_array_2party(rho)
    ps, pa = sym_projectors(d)
    ta = np.trace(m @ pa)
    ts = np.trace(m @ ps)
    out = ta * pa / (d * (d - 1) / 2) + ts * ps / (d * (d + 1) / 2)
    return _wrap(rho, out, d, fac)


def twirl_isotropic(rho):
    """U (x) conj(U) twirl: f phi_d + (tr rho - f)(I - phi_d)/(d^2 - 1), f = tr[rho phi_d]."""
    m, d, fac = _as_array_2party(rho)
    phi = phi_projector(d)
    f = np.trace(m @ phi)
    tr = np.trace(m)
    out = f * phi + (tr - f) * (np.eye(d * d) - phi) / (d * d - 1)
    return _wrap(rho, out, d, fac)


def twirl_by_sampling(rho, n_unitaries: int, rng: np.random.Generator, conjugate: bool = False):
    """Monte Carlo average of (U (x) U) rho (U (x) U)^dag (or U (x) conj U)."""
    m, d, _ = _as_array_2party(rho)
    acc = np.zeros_like(m)
    for _ in range(n_unitaries):
        u = haar_random_unitary(d, rng)
        k = np.kron(u, u.conj() if conjugate else u)
        acc += k @ m @ k.conj().T
    return acc / n_unitaries


def ppt_check(rho, cut=None) -> tuple[bool, float]:
    """PPT test with the transpose on the labelled factors (default: B side)."""
    rho = as_density(rho)
    pt = partial_transpose(rho, cut)
    lmin = float(np.linalg.eigvalsh(pt.matrix)[0])
    return lmin >= -PSD_TOL * rho.trace, lmin


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def haar_random_pure(d: int, seed=None) -> np.ndarray:
    """Unit vector from a normalized complex Gaussian."""
    if d < 1:
        raise ValueError("d must be >= 1")
    rng = _rng(seed)
    v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return v / np.linalg.norm(v)


def haar_random_pures(d: int, n: int, seed=None) -> np.ndarray:
    """``n`` Haar vectors as rows of an ``(n, d)`` array."""
    rng = _rng(seed)
    v = rng.standard_normal((n, d)) + 1j * rng.standard_normal((n, d))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def haar_random_unitary(d: int, seed=None) -> np.ndarray:
    """QR of a complex Gaussian matrix with the phases of R's diagonal fixed."""
    rng = _rng(seed)
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def random_density(n: int, seed=None, rank: int | None = None) -> np.ndarray:
    """Trace-one G G^dag with a complex Gaussian ``n x rank`` matrix G."""
    rng = _rng(seed)
    k = n if rank is None else rank
    g = rng.standard_normal((n, k)) + 1j * rng.standard_normal((n, k))
    m = g @ g.conj().T
    return m / np.trace(m).real


def random_separable(da: int, db: int, n_terms: int, seed=None) -> np.ndarray:
    """Random mixture of ``n_terms`` Haar product pure states."""
    rng = _rng(seed)
    w = rng.dirichlet(np.ones(n_terms))
    a = haar_random_pures(da, n_terms, rng)
    b = haar_random_pures(db, n_terms, rng)
    m = np.zeros((da * db, da * db), dtype=complex)
    for k in range(n_terms):
        v = np.kron(a[k], b[k])
        m += w[k] * np.outer(v, v.conj())
    return m


# -- state addressing ---------------------------------------------------------

KINDS = ("max_entangled", "werner", "isotropic", "product_basis", "product", "schmidt",
         "bound_entangled", "file")


@dataclass(frozen=True)
class StateSpec:
    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown state kind {self.kind!r}; expected one of {KINDS}")

    @classmethod
    def parse(cls, text: str) -> "StateSpec":
        """Parse ``kind=K,key=val,...``."""
        items = {}
        for part in filter(None, (p.strip() for p in text.split(","))):
            if "=" not in part:
                raise ValueError(f"malformed state token {part!r} (expected key=value)")
            key, val = part.split("=", 1)
            items[key.strip()] = val.strip()
        if "kind" not in items:
            raise ValueError("state spec needs kind=...")
        kind = items.pop("kind")
        return cls(kind, items)

    def __str__(self) -> str:
        return ",".join([f"kind={self.kind}"] + [f"{k}={v}" for k, v in self.params.items()])

    def build(self) -> DensityOperator:
        p = self.params
        d = int(p.get("d", 2))
        if self.kind == "max_entangled":
            return max_entangled(d)[0]
        if self.kind == "werner":
            return werner(WernerParam(float(p["mu"]), d))
        if self.kind == "isotropic":
            return isotropic(float(p["f"]), d)
        if self.kind in ("product_basis", "product"):
            i = int(p.get("i", 1))
            return product_basis(d, i, int(p.get("j", i)))
        if self.kind == "schmidt":
            return schmidt_state(float(p["theta"]))[0]
        if self.kind == "bound_entangled":
            return bound_entangled_33(float(p.get("alpha", 4)))
        path = p.get("path")
        if not path:
            raise ValueError("kind=file needs path=...")
        return load_density(Path(path))
