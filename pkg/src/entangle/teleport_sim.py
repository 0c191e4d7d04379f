"""Monte Carlo simulation of standard and conclusive teleportation over a resource state.

The measurement uses the generalized Bell basis ``(W_jk (x) I)|phi_d>`` with
Weyl operators ``W_jk = X^j Z^k``; on outcome ``jk`` Bob applies ``W_jk``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .filters import (
    LocalFilterPair,
    SeesawConfig,
    apply_filter,
    e_d_seesaw,
    f_d_from_e,
    fidelity_with_phid,
)
from .states import haar_random_pures, phi_vector
from .tensor_core import Operator


def weyl_operators(d: int) -> list[np.ndarray]:
    x = np.roll(np.eye(d), 1, axis=0)
    z = np.diag(np.exp(2j * np.pi * np.arange(d) / d))
    return [np.linalg.matrix_power(x, j) @ np.linalg.matrix_power(z, k) for j in range(d) for k in range(d)]


def _resource_array(rho, d: int) -> np.ndarray:
    m = rho.matrix if isinstance(rho, Operator) else np.asarray(rho, dtype=complex)
    if m.shape != (d * d, d * d):
        raise ValueError(f"resource must act on C^{d} (x) C^{d}")
    tr = np.real(np.trace(m))
    if abs(tr - 1) > 1e-10:
        raise ValueError("resource state must be normalized")
    return m


def standard_teleport(rho_resource, psi_in: np.ndarray, d: int | None = None) -> np.ndarray:
    """Bob's output state for input ``psi_in`` (vector or density matrix)."""
    psi_in = np.asarray(psi_in, dtype=complex)
    d = d or psi_in.shape[0]
    inp = np.outer(psi_in, psi_in.conj()) if psi_in.ndim == 1 else psi_in
    if inp.shape != (d, d):
        raise ValueError("input dimension does not match the resource")
    return _linear_teleport(rho_resource, inp, d)


def teleport_channel(rho_resource, d: int) -> np.ndarray:
    """Superoperator S with vec(out) = S vec(in) (row-major vec)."""
    s = np.zeros((d * d, d * d), dtype=complex)
    for i in range(d):
        for j in range(d):
            e = np.zeros((d, d), dtype=complex)
            e[i, j] = 1
            s[:, i * d + j] = _linear_teleport(rho_resource, e, d).ravel()
    return s


def _linear_teleport(rho_resource, x: np.ndarray, d: int) -> np.ndarray:
    m = _resource_array(rho_resource, d)
    phi = phi_vector(d)
    full = np.kron(x, m)
    out = np.zeros((d, d), dtype=complex)
    for w in weyl_operators(d):
        bell = np.kron(w, np.eye(d)) @ phi
        proj = np.kron(bell.conj()[None, :], np.eye(d))
        out += w @ (proj @ full @ proj.conj().T) @ w.conj().T
    return out


@dataclass(frozen=True)
class TeleportConfig:
    d: int = 2
    n_samples: int = 20_000
    seed: int = 0
    mode: str = "standard"
    filter: LocalFilterPair | None = None
    chunk: int = 4096

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if self.mode not in ("standard", "conclusive"):
            raise ValueError("mode must be 'standard' or 'conclusive'")
        if self.mode == "conclusive" and self.filter is None:
            raise ValueError("conclusive mode needs a filter")


@dataclass
class TeleportResult:
    mean: float
    standard_error: float
    n_samples: int
    success_probability: float = 1.0
    predicted: float | None = None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {"mean": self.mean, "standard_error": self.standard_error, "n_samples": self.n_samples,
               "success_probability": self.success_probability}
        if self.predicted is not None:
            out["predicted"] = self.predicted
        out.update(self.extra)
        return out


def average_fidelity_mc(rho_resource, cfg: TeleportConfig) -> TeleportResult:
    """Haar-averaged output fidelity, estimated from ``cfg.n_samples`` inputs.

    In conclusive mode the resource is first filtered and renormalized; the
    success probability is reported rather than sampled.
    """
    d = cfg.d
    success = 1.0
    predicted = None
    if cfg.mode == "conclusive":
        m = rho_resource.matrix if isinstance(rho_resource, Operator) else np.asarray(rho_resource)
        out, tr = apply_filter(rho_resource, cfg.filter)
        success = tr / float(np.real(np.trace(m)))
        resource = out.matrix / tr
        predicted = (1 + d * fidelity_with_phid(resource, d)) / (1 + d)
    else:
        resource = rho_resource
    chan = teleport_channel(resource, d)
    rng = np.random.default_rng(cfg.seed)
    vals = []
    remaining = cfg.n_samples
    while remaining > 0:
        k = min(cfg.chunk, remaining)
        psi = haar_random_pures(d, k, rng)
        vec_in = (psi[:, :, None] * psi.conj()[:, None, :]).reshape(k, d * d)
        vec_out = vec_in @ chan.T
        # fidelity <psi| out |psi> = sum_ij conj(psi_i) out_ij psi_j
        fid = np.real(np.einsum("ni,nij,nj->n", psi.conj(), vec_out.reshape(k, d, d), psi))
        vals.append(fid)
        remaining -= k
    vals = np.concatenate(vals)
    se = float(np.std(vals, ddof=1) / np.sqrt(vals.size)) if vals.size > 1 else 0.0
    return TeleportResult(float(np.mean(vals)), se, cfg.n_samples, success, predicted)


def standard_fidelity_closed_form(rho_resource, d: int) -> float:
    """(d f + 1)/(d + 1) with f = tr[rho phi_d]."""
    return (d * fidelity_with_phid(rho_resource, d) + 1) / (d + 1)


def verify_conclusive_fidelity(rho, d: int, seesaw_cfg: SeesawConfig | None = None,
               mc_cfg: TeleportConfig | None = None) -> dict:
    """Seesaw, predicted conclusive fidelity, and its Monte Carlo realization with the best filter."""
    res = e_d_seesaw(rho, d, seesaw_cfg)
    mc_cfg = mc_cfg or TeleportConfig(d=d)
    cfg = TeleportConfig(d=d, n_samples=mc_cfg.n_samples, seed=mc_cfg.seed, mode="conclusive",
                         filter=res.best_filter, chunk=mc_cfg.chunk)
    mc = average_fidelity_mc(rho, cfg)
    predicted = f_d_from_e(min(max(res.e_lower, 1 / d), 1.0), d)
    tol = max(3 * mc.standard_error, 1e-9)
    return {
        "e_lower": res.e_lower,
        "predicted": predicted,
        "filter_prediction": mc.predicted,
        "mc_mean": mc.mean,
        "mc_standard_error": mc.standard_error,
        "success_probability": mc.success_probability,
        "lower_check": bool(mc.mean >= predicted - 3 * mc.standard_error - 1e-3 and mc.mean <= 1 + 1e-12),
        "match_within_3se": bool(abs(mc.mean - mc.predicted) <= tol),
    }
