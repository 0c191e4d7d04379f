"""Activation filter, the contraction identity, the activation condition and witnesses.

Layout conventions used throughout this subpackage:

* ``sigma`` acts on ``A1 (x) B1`` with dims ``(p, r)``.
* ``rho`` acts on ``A2 (x) A3 (x) B2 (x) B3`` (in that order) with
  ``A2 ~ A1``, ``B2 ~ B1`` and ``A3 = B3 = C^d``.
* The joint state is ``sigma (x) rho`` with factors ``A1 B1 A2 A3 B2 B3``;
  grouped by party this is ``(A1 A2 A3) | (B1 B2 B3)``.
* ``sigma^T`` is the full transpose in the computational basis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..filters import LocalFilterPair, apply_filter
from ..states import haar_random_pures, phi_projector
from ..tensor_core import (
    DensityOperator,
    HilbertFactorization,
    Operator,
    as_density,
    matrix_to_dict,
    tensor_product,
)

RHO_LABELS = ("A2", "A3", "B2", "B3")
SIGMA_LABELS = ("A1", "B1")


class PreconditionError(ValueError):
    """An operation was called without the guarantee it relies on."""


def threshold_operator(lam: float, d: int) -> np.ndarray:
    """lambda I - phi_d."""
    return lam * np.eye(d * d) - phi_projector(d).real


def rho_dims(rho, d: int) -> tuple[int, int]:
    """Return ``(p, r)`` = dims of A2, B2 after checking the A2 A3 B2 B3 layout."""
    if isinstance(rho, Operator):
        dims = rho.factorization.dims
        labels = rho.factorization.labels
        if len(dims) != 4:
            raise ValueError(f"rho must have four factors {RHO_LABELS}, got {labels}")
        if labels != RHO_LABELS:
            raise ValueError(f"rho factors must be labelled {RHO_LABELS}, got {labels}")
        if dims[1] != d or dims[3] != d:
            raise ValueError(f"A3 and B3 must have dimension d={d}, got {dims}")
        return dims[0], dims[2]
    n = np.asarray(rho).shape[0]
    p = int(round(np.sqrt(n) / d))
    if p * p * d * d != n:
        raise ValueError("cannot infer the A2 A3 B2 B3 layout of a raw array")
    return p, p


def as_rho(rho, d: int) -> DensityOperator:
    if isinstance(rho, Operator):
        return as_density(rho)
    p, r = rho_dims(rho, d)
    fac = HilbertFactorization((("A2", p), ("A3", d), ("B2", r), ("B3", d)))
    return as_density(np.asarray(rho, dtype=complex), fac)


def as_sigma(sigma, dims: tuple[int, int] | None = None) -> DensityOperator:
    if isinstance(sigma, Operator):
        if len(sigma.factorization.dims) != 2:
            raise ValueError("sigma must be bipartite with two factors")
        return DensityOperator(sigma.matrix, HilbertFactorization(tuple(
            zip(SIGMA_LABELS, sigma.factorization.dims))))
    m = np.asarray(sigma, dtype=complex)
    if dims is None:
        k = int(round(np.sqrt(m.shape[0])))
        dims = (k, k)
    return DensityOperator(m, HilbertFactorization(tuple(zip(SIGMA_LABELS, dims))))


def _split(rho: DensityOperator, sigma: DensityOperator, d: int):
    p, r = rho_dims(rho, d)
    if sigma.factorization.dims != (p, r):
        raise ValueError(f"sigma dims {sigma.factorization.dims} do not match A2, B2 dims {(p, r)}")
    big_r = rho.matrix.reshape(p, d, r, d, p, d, r, d)
    s_t = sigma.matrix.T.reshape(p, r, p, r)
    return big_r, s_t, p, r


def joint_state(sigma, rho, d: int, max_dim: int | None = None) -> DensityOperator:
    """sigma (x) rho with factors A1 B1 A2 A3 B2 B3."""
    rho = as_rho(rho, d)
    sigma = as_sigma(sigma)
    return tensor_product(sigma, rho, max_dim=max_dim)


def activation_filter(p: int, r: int, d: int) -> LocalFilterPair:
    """A = <phi_{A1A2}| (x) I_{A3}, B = <phi_{B1B2}| (x) I_{B3}, with normalized phi.

    Columns are ordered (A1, A2, A3) and (B1, B2, B3).
    """
    if min(p, r) < 1 or d < 2:
        raise ValueError("invalid dimensions")

    def side(k):
        bra = np.eye(k).ravel() / np.sqrt(k)
        return np.kron(bra[None, :], np.eye(d))

    return LocalFilterPair(side(p), side(r), d)


def contraction_identity_check(rho, sigma, d: int) -> tuple[float, float]:
    """Compare the activation-filtered joint state with tr_{A2B2}[rho (sigma^T (x) I)].

    Returns the relative max residual after fitting the scalar ``z``, and ``z``.
    """
    rho = as_rho(rho, d)
    sigma = as_sigma(sigma)
    big_r, s_t, p, r = _split(rho, sigma, d)
    lhs, _ = apply_filter(joint_state(sigma, rho, d, max_dim=4096), activation_filter(p, r, d))
    lhs = lhs.matrix
    rhs = np.einsum("ijklIJKL,IKik->jlJL", big_r, s_t).reshape(d * d, d * d)
    z = float(np.real(np.vdot(rhs, lhs) / np.vdot(rhs, rhs)))
    resid = float(np.max(np.abs(lhs - z * rhs)) / np.max(np.abs(lhs)))
    return resid, z


def activation_condition(rho, sigma, lam: float, d: int) -> float:
    """tr[rho (sigma^T (x) (lambda I - phi_d))]; negative values imply E_d(rho (x) sigma) > lambda."""
    rho = as_rho(rho, d)
    sigma = as_sigma(sigma)
    big_r, s_t, _, _ = _split(rho, sigma, d)
    m = threshold_operator(lam, d).reshape(d, d, d, d)
    return float(np.real(np.einsum("ijklIJKL,IKik,JLjl->", big_r, s_t, m, optimize=True)))


def activation_filter_fidelity(rho, sigma, d: int) -> float:
    """phi_d overlap reached on rho (x) sigma by the activation filter alone."""
    rho = as_rho(rho, d)
    sigma = as_sigma(sigma)
    big_r, s_t, _, _ = _split(rho, sigma, d)
    out = np.einsum("ijklIJKL,IKik->jlJL", big_r, s_t).reshape(d * d, d * d)
    return float(np.real(np.trace(out @ phi_projector(d)) / np.trace(out)))


@dataclass(frozen=True)
class WitnessOperator:
    """Witness on A1 (x) B1 detecting sigma when tr[w sigma] < 0.

    ``w`` is the transpose of tr_{A3B3}[rho (I (x) (lambda I - phi_d))], so that
    tr[w sigma] reproduces :func:`activation_condition` directly.
    """

    w: np.ndarray
    lam: float
    d: int
    provenance: dict

    def __post_init__(self):
        w = np.array(self.w, dtype=complex)
        if np.max(np.abs(w - w.conj().T)) > 1e-10 * max(1.0, np.max(np.abs(w))):
            raise ValueError("witness must be Hermitian")
        w = (w + w.conj().T) / 2
        w.setflags(write=False)
        object.__setattr__(self, "w", w)

    def value(self, sigma) -> float:
        s = sigma.matrix if isinstance(sigma, Operator) else np.asarray(sigma)
        return float(np.real(np.trace(self.w @ s)))

    def min_over_products(self, n_samples: int = 10_000, seed=0, dims: tuple[int, int] | None = None) -> float:
        """Smallest tr[w (a a^dag (x) b b^dag)] over Haar-sampled unit product vectors."""
        p, r = dims or self.provenance.get("dims", (None, None))
        rng = np.random.default_rng(seed)
        a = haar_random_pures(p, n_samples, rng)
        b = haar_random_pures(r, n_samples, rng)
        w4 = self.w.reshape(p, r, p, r)
        vals = np.einsum("ni,nj,ijkl,nk,nl->n", a.conj(), b.conj(), w4, a, b, optimize=True)
        return float(np.min(np.real(vals)))

    def to_dict(self) -> dict:
        return {"lambda": self.lam, "d": self.d, "w": matrix_to_dict(self.w), "provenance": self.provenance}


def witness_from_rho(rho, lam: float, d: int, certificate) -> WitnessOperator:
    """Witness built from a rho whose E_d is certified to be at most lambda."""
    if certificate is None or not getattr(certificate, "valid", False):
        raise PreconditionError("witness construction needs a valid E_d(rho) <= lambda certificate")
    if certificate.value > lam + 1e-12:
        raise PreconditionError(f"certificate bound {certificate.value} exceeds lambda {lam}")
    rho = as_rho(rho, d)
    p, r = rho_dims(rho, d)
    big_r = rho.matrix.reshape(p, d, r, d, p, d, r, d)
    m = threshold_operator(lam, d).reshape(d, d, d, d)
    w = np.einsum("ijklIJKL,JLjl->ikIK", big_r, m, optimize=True).reshape(p * r, p * r)
    prov = {"certificate": certificate.kind, "dims": (p, r), "rho_trace": rho.trace}
    return WitnessOperator(w.T, lam, d, prov)
