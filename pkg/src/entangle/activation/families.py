"""Partner-state families with certified upper bounds E_d(rho) <= lambda.

Why a certificate is a block-positivity statement
------------------------------------------------
For a single-term filter K = A (x) B the bound
``tr[K rho K^dag phi_d] <= lambda tr[K rho K^dag]`` reads
``tr[rho K^dag M K] >= 0`` with ``M = lambda I - phi_d``. Writing
``a = vec(A)`` and ``b = vec(B)`` (row-major), the left side equals
``<a (x) b| T |a (x) b>`` with ``T`` the reordering of ``M (x) rho^T`` onto
``(A3' A) | (B3' B)``. Hence E_d(rho) <= lambda iff ``T`` is block-positive.

Two sufficient conditions are used:

separable-floor
    rho is a product across the A|B cut. Every filtered output is then a
    product state, whose overlap with phi_d is at most 1/d.

decomposition
    ``T = P0 + P1^Gamma + c X`` with ``P0, P1 >= 0``, ``c >= 0`` and ``X`` a fixed
    block-positive operator (the Choi witness on A2 B2 tensored with a
    separable PSD operator). The SDP only proposes ``c`` and ``P1``; ``P0`` is
    recomputed from them and checked to be PSD with numpy, after moving a
    strictly positive slack from ``P1`` to ``P0`` (identity is invariant under
    partial transposition).

Choi-flagged family
-------------------
On A2 B2 (3x3) use the projector onto phi_3, the rest of the diagonal span
span{|ii>}, and the cyclic diagonal projectors S+ = sum |i,i+1><i,i+1| and
S- = sum |i+1,i><i+1,i|. On A3 B3 (qubits) use the Bell projectors
phi+ and phi-. The family is

    rho ~ sum_{g, s} w[g, s] G_g (x) Bell_s  mixed with white noise q.

S- is flagged by the positive (but not completely positive) Choi map, which
is what lets rho keep E_2 below lambda while still reacting strongly to a 3x3
PPT entangled sigma with a large S+ component.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..states import cyclic_projectors, phi_projector
from ..tensor_core import DensityOperator, HilbertFactorization, ptranspose_array
from .core import as_rho, rho_dims, threshold_operator

DEFAULT_CHOI_WEIGHTS = (3.0, 0.0, 2.0, 2.0, 0.5, 0.125, 1.0, 1.0)
DEFAULT_NOISE = 0.02
DEMO_LAMBDA = 0.8
DEMO_ALPHA = 4.0


@dataclass
class EBoundCertificate:
    kind: str
    value: float
    valid: bool
    details: dict = field(default_factory=dict)
    # numerical witnesses of the decomposition, kept for re-verification
    c: float | None = None
    p1: np.ndarray | None = None

    def to_dict(self) -> dict:
        return {"kind": self.kind, "value": self.value, "valid": self.valid, "details": self.details}


# -- block-positivity helpers --------------------------------------------------

def block_operator(rho, lam: float, d: int) -> tuple[np.ndarray, int, int]:
    """T on (A3' A) | (B3' B): reordering of (lambda I - phi_d) (x) rho^T."""
    rho = as_rho(rho, d)
    p, r = rho_dims(rho, d)
    na, nb = p * d, r * d
    m = threshold_operator(lam, d)
    t = np.kron(m, rho.matrix.T).reshape(d, d, na, nb, d, d, na, nb)
    t = t.transpose(0, 2, 1, 3, 4, 6, 5, 7).reshape(d * na * d * nb, -1)
    return t, d * na, d * nb


def choi_witness() -> np.ndarray:
    """Choi matrix of X -> sum_i (2 x_ii + x_{i+1,i+1}) |i><i| - X on 3x3.

    The map is positive but not completely positive, so this 9x9 operator is
    block-positive with a negative eigenvalue.
    """
    _, sm = cyclic_projectors()
    diag = np.zeros((9, 9))
    for i in range(3):
        diag[4 * i, 4 * i] = 2
    return diag + sm - 3 * phi_projector(3).real


def flag_operator(d: int) -> np.ndarray:
    """Choi witness on A2 B2 (x) I_{A3'} (x) I_{B3'} (x) sum_u |uu><uu| on A3 B3, in T's layout."""
    delta = np.diag(phi_projector(d).real.diagonal() * d)
    x = np.kron(np.kron(choi_witness(), np.eye(d * d)), delta)
    x = x.reshape(3, 3, d, d, d, d, 3, 3, d, d, d, d)
    # (A2, B2, A3', B3', A3, B3) -> (A3', A2, A3, B3', B2, B3)
    x = x.transpose(2, 0, 4, 3, 1, 5, 8, 6, 10, 9, 7, 11)
    n = 3 * d * d
    return x.reshape(n * n, n * n)


def _clip_psd(m: np.ndarray) -> tuple[np.ndarray, float]:
    m = (m + m.conj().T) / 2
    w, v = np.linalg.eigh(m)
    w = np.clip(w, 0, None)
    return (v * w) @ v.conj().T, float(w[0])


def verify_decomposition(t: np.ndarray, x: np.ndarray, c: float, p1: np.ndarray,
                         na: int, nb: int) -> dict:
    """Check T - c X - (P1 - eps I)^Gamma >= 0 with eps = lambda_min(P1)/2."""
    p1c, lmin = _clip_psd(p1)
    eps = lmin / 2
    shifted = p1c - eps * np.eye(p1c.shape[0])
    p0 = t - c * x - ptranspose_array(shifted, [na, nb], [1])
    p0 = (p0 + p0.conj().T) / 2
    p0_min = float(np.linalg.eigvalsh(p0)[0])
    shifted_min = float(np.linalg.eigvalsh(shifted)[0])
    scale = float(np.max(np.abs(t)))
    ok = c >= 0 and p0_min >= 1e-12 * scale and shifted_min >= -1e-12 * scale
    return {"c": float(c), "slack": eps, "p0_min_eig": p0_min, "p1_min_eig": shifted_min, "ok": bool(ok)}


def certify_separable_floor(rho, lam: float, d: int, tol: float = 1e-12) -> EBoundCertificate:
    """Certify E_d(rho) = 1/d when rho is a product across the A|B cut."""
    rho = as_rho(rho, d)
    p, r = rho_dims(rho, d)
    na, nb = p * d, r * d
    m = rho.matrix.reshape(p, d, r, d, p, d, r, d).transpose(0, 1, 4, 5, 2, 3, 6, 7)
    # reshape to (A A') x (B B') and test rank one (operator Schmidt rank)
    m = m.reshape(na * na, nb * nb)
    s = np.linalg.svd(m, compute_uv=False)
    resid = float(np.sqrt(np.sum(s[1:] ** 2)) / s[0]) if s[0] > 0 else np.inf
    ok = resid <= tol and lam >= 1 / d
    return EBoundCertificate("separable-floor", 1 / d, bool(ok), {"product_residual": resid})


def certify_decomposition(rho, lam: float, d: int = 2, solver: str = "SCS") -> EBoundCertificate:
    """Prove E_d(rho) <= lambda by a block-positivity decomposition (A2 = B2 = 3 only)."""
    import cvxpy as cp

    rho = as_rho(rho, d)
    p, r = rho_dims(rho, d)
    if (p, r) != (3, 3):
        raise ValueError("the decomposition certificate needs A2 = B2 = 3")
    t, na, nb = block_operator(rho, lam, d)
    x = flag_operator(d)
    n = t.shape[0]
    real = np.max(np.abs(t.imag)) < 1e-14
    scale = float(np.max(np.abs(t)))
    tt = t.real / scale if real else t / scale
    if real:
        q = cp.Variable((n, n), symmetric=True)
    else:
        q = cp.Variable((n, n), hermitian=True)
    c = cp.Variable(nonneg=True)
    slack = cp.Variable()
    cons = [
        tt - c * x - cp.partial_transpose(q, [na, nb], 1) >> 0,
        q - slack * np.eye(n) >> 0,
        slack <= 1,
    ]
    prob = cp.Problem(cp.Maximize(slack), cons)
    kwargs = {"eps": 1e-9, "max_iters": 100_000} if solver == "SCS" else {}
    try:
        prob.solve(solver=solver, **kwargs)
    except cp.error.SolverError as exc:
        return EBoundCertificate("decomposition", lam, False, {"error": str(exc)})
    if q.value is None or c.value is None:
        return EBoundCertificate("decomposition", lam, False, {"status": prob.status})
    c_val = float(c.value) * scale
    p1 = np.asarray(q.value) * scale
    check = verify_decomposition(t, x, max(c_val, 0.0), p1, na, nb)
    check.update(status=prob.status, solver=solver)
    return EBoundCertificate("decomposition", lam, check["ok"], check, c=max(c_val, 0.0), p1=p1)


def reverify(rho, cert: EBoundCertificate, d: int) -> bool:
    """Recheck a stored certificate against rho without solving anything."""
    if cert.kind == "separable-floor":
        return certify_separable_floor(rho, cert.value, d).valid
    t, na, nb = block_operator(rho, cert.value, d)
    return verify_decomposition(t, flag_operator(d), cert.c, cert.p1, na, nb)["ok"]


# -- families -------------------------------------------------------------------

def _rho_factorization(p: int, r: int, d: int) -> HilbertFactorization:
    return HilbertFactorization((("A2", p), ("A3", d), ("B2", r), ("B3", d)))


def _to_rho_layout(x_ab: np.ndarray, y: np.ndarray, p: int, r: int, d: int) -> np.ndarray:
    """(A2 B2 operator) (x) (A3 B3 operator) reordered to A2 A3 B2 B3."""
    m = np.kron(x_ab, y).reshape(p, r, d, d, p, r, d, d)
    return m.transpose(0, 2, 1, 3, 4, 6, 5, 7).reshape(p * d * r * d, -1)


def bell_pair() -> tuple[np.ndarray, np.ndarray]:
    plus = phi_projector(2).real
    v = np.array([1, 0, 0, -1]) / np.sqrt(2)
    return plus, np.outer(v, v)


def choi_flagged_generators() -> list[np.ndarray]:
    """The eight generators G_g (x) Bell_s in the order (phi3, rest, S+, S-) x (phi+, phi-)."""
    phi3 = phi_projector(3).real
    diag = np.zeros((9, 9))
    for i in range(3):
        diag[4 * i, 4 * i] = 1
    sp, sm = cyclic_projectors()
    plus, minus = bell_pair()
    gens = []
    for g in (phi3, diag - phi3, sp, sm):
        for bell in (plus, minus):
            gens.append(_to_rho_layout(g, bell, 3, 3, 2))
    return gens


def choi_flagged_state(weights=DEFAULT_CHOI_WEIGHTS, q: float = DEFAULT_NOISE) -> DensityOperator:
    """Trace-one member of the Choi-flagged family (d = 2, A2 = B2 = 3)."""
    w = np.asarray(weights, dtype=float)
    if w.shape != (8,) or np.any(w < 0) or not np.any(w):
        raise ValueError("need eight nonnegative weights, not all zero")
    if not 0 <= q <= 1:
        raise ValueError("noise q must lie in [0, 1]")
    m = sum(wk * g for wk, g in zip(w, choi_flagged_generators()))
    m = m / np.trace(m)
    m = (1 - q) * m + q * np.eye(36) / 36
    return DensityOperator(m.astype(complex), _rho_factorization(3, 3, 2), normalized=True)


def separable_floor_state(p: int, r: int, d: int) -> DensityOperator:
    """psi_{A2A3} (x) psi_{B2B3} with psi maximally entangled on its smaller side."""

    def local(k):
        m = min(k, d)
        v = np.zeros(k * d)
        for s in range(m):
            v[s * d + s] = 1 / np.sqrt(m)
        return np.outer(v, v)

    m = np.kron(local(p), local(r))
    return DensityOperator(m.astype(complex), _rho_factorization(p, r, d), normalized=True)


def design_choi_weights(sigma, lam: float, solver: str = "SCS") -> tuple[np.ndarray, float]:
    """Family weights minimizing the activation condition subject to a decomposition certificate.

    Returns ``(weights, optimum)``. The weights are only a proposal: the
    caller still mixes in noise and certifies the resulting state.
    """
    import cvxpy as cp

    from .core import as_sigma

    sigma = as_sigma(sigma)
    if sigma.factorization.dims != (3, 3):
        raise ValueError("the Choi-flagged family needs a 3x3 sigma")
    d = 2
    gens = choi_flagged_generators()
    s_t = sigma.matrix.T.real if np.max(np.abs(sigma.matrix.imag)) < 1e-14 else None
    if s_t is None:
        raise ValueError("design currently supports real sigma only")
    z = _to_rho_layout(s_t, threshold_operator(lam, d), 3, 3, d)
    blocks = []
    for g in gens:
        t, na, nb = block_operator(g, lam, d)
        blocks.append(t.real)
    x = flag_operator(d)
    n = blocks[0].shape[0]
    w = cp.Variable(8, nonneg=True)
    c = cp.Variable(nonneg=True)
    p0 = cp.Variable((n, n), PSD=True)
    p1 = cp.Variable((n, n), PSD=True)
    t_expr = sum(w[k] * blocks[k] for k in range(8))
    cons = [
        sum(w[k] * np.trace(gens[k]) for k in range(8)) == 1,
        t_expr == p0 + cp.partial_transpose(p1, [na, nb], 1) + c * x,
    ]
    obj = cp.Minimize(sum(w[k] * float(np.sum(gens[k] * z.T)) for k in range(8)))
    prob = cp.Problem(obj, cons)
    kwargs = {"eps": 1e-8, "max_iters": 100_000} if solver == "SCS" else {}
    prob.solve(solver=solver, **kwargs)
    if w.value is None:
        raise RuntimeError(f"design problem failed: {prob.status}")
    return np.clip(w.value, 0, None), float(prob.value)
