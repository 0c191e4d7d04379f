"""Dense linear algebra on tensor-factored Hilbert spaces.

Operators are plain complex numpy arrays paired with a
:class:`HilbertFactorization`, an ordered tuple of ``(label, dim)`` pairs.
Labels starting with ``"A"`` belong to the first party and labels starting
with ``"B"`` to the second; the partial transpose defaults to the B side.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg

HERMITIAN_TOL = 1e-10
PSD_TOL = 1e-9
DEFAULT_MAX_DIM = 256


class CapacityError(ValueError):
    """Raised when an operator would exceed the configured total dimension."""


def _check_capacity(n: int, max_dim: int | None) -> None:
    cap = DEFAULT_MAX_DIM if max_dim is None else max_dim
    if n > cap:
        raise CapacityError(f"total dimension {n} exceeds the cap {cap}")


@dataclass(frozen=True)
class HilbertFactorization:
    factors: tuple[tuple[str, int], ...]

    def __post_init__(self):
        facs = tuple((str(lab), int(dim)) for lab, dim in self.factors)
        labels = [lab for lab, _ in facs]
        if len(set(labels)) != len(labels):
            raise ValueError(f"factor labels must be unique, got {labels}")
        if any(dim < 1 for _, dim in facs):
            raise ValueError("factor dimensions must be >= 1")
        object.__setattr__(self, "factors", facs)

    @classmethod
    def of(cls, *pairs: tuple[str, int]) -> "HilbertFactorization":
        return cls(tuple(pairs))

    @classmethod
    def bipartite(cls, da: int, db: int | None = None) -> "HilbertFactorization":
        return cls((("A", da), ("B", da if db is None else db)))

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(lab for lab, _ in self.factors)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(dim for _, dim in self.factors)

    @property
    def total(self) -> int:
        return int(np.prod(self.dims, dtype=np.int64))

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise ValueError(f"unknown factor label {label!r}; have {self.labels}") from None

    def indices(self, labels: Iterable[str]) -> list[int]:
        return [self.index(lab) for lab in labels]

    def party(self, prefix: str) -> list[int]:
        """Positions of factors whose label starts with ``prefix``."""
        return [i for i, lab in enumerate(self.labels) if lab.startswith(prefix)]

    def subset(self, idx: Sequence[int]) -> "HilbertFactorization":
        return HilbertFactorization(tuple(self.factors[i] for i in idx))

    def relabel(self, mapping: dict[str, str]) -> "HilbertFactorization":
        return HilbertFactorization(tuple((mapping.get(lab, lab), dim) for lab, dim in self.factors))

    def to_json(self) -> list[dict]:
        return [{"label": lab, "dim": dim} for lab, dim in self.factors]


def _hermitize(m: np.ndarray, tol: float = HERMITIAN_TOL) -> np.ndarray:
    dev = np.max(np.abs(m - m.conj().T)) if m.size else 0.0
    if dev > tol:
        raise ValueError(f"matrix is not Hermitian (max |M - M^dag| = {dev:.3e})")
    return (m + m.conj().T) / 2


@dataclass(frozen=True)
class Operator:
    """Hermitian operator with a tensor structure (no positivity required)."""

    matrix: np.ndarray
    factorization: HilbertFactorization

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"operator must be square, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValueError("operator has non-finite entries")
        if m.shape[0] != self.factorization.total:
            raise ValueError(
                f"factorization {self.factorization.dims} does not match side length {m.shape[0]}"
            )
        m = _hermitize(m, HERMITIAN_TOL * max(1.0, np.max(np.abs(m))))
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def trace(self) -> float:
        return float(np.real(np.trace(self.matrix)))

    def eigvalsh(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)


@dataclass(frozen=True)
class DensityOperator(Operator):
    """Positive semidefinite operator, possibly unnormalized."""

    normalized: bool = field(default=False)

    def __post_init__(self):
        super().__post_init__()
        tr = self.trace
        if not tr > 0:
            raise ValueError("density operator must have positive trace")
        lmin = float(np.linalg.eigvalsh(self.matrix)[0])
        if lmin < -PSD_TOL * tr:
            raise ValueError(f"operator is not PSD (min eigenvalue {lmin:.3e})")
        if self.normalized and abs(tr - 1) > 1e-10:
            raise ValueError(f"normalized flag set but trace is {tr!r}")

    def normalize(self) -> "DensityOperator":
        return DensityOperator(self.matrix / self.trace, self.factorization, normalized=True)

    def scaled(self, tau: float) -> "DensityOperator":
        return DensityOperator(self.matrix * tau, self.factorization)


def as_density(m, factorization: HilbertFactorization | None = None) -> DensityOperator:
    """Coerce an array or operator to a :class:`DensityOperator`.

    Raw arrays get a two-party factorization with equal sides.
    """
    if isinstance(m, DensityOperator):
        return m
    if isinstance(m, Operator):
        return DensityOperator(m.matrix, m.factorization)
    m = np.asarray(m, dtype=complex)
    if factorization is None:
        factorization = _square_bipartition(m.shape[0])
    return DensityOperator(m, factorization)


def _square_bipartition(n: int) -> HilbertFactorization:
    k = int(round(np.sqrt(n)))
    if k * k != n:
        raise ValueError(f"cannot infer an equal bipartition for side length {n}")
    return HilbertFactorization.bipartite(k)


def _like(op: Operator, m: np.ndarray, fac: HilbertFactorization, psd: bool) -> Operator:
    if psd and isinstance(op, DensityOperator):
        return DensityOperator(m, fac)
    return Operator(m, fac)


def tensor_product(a, b, max_dim: int | None = None):
    """Kronecker product with concatenated factorization.

    Works on :class:`Operator` values (result keeps the stronger type when both
    are density operators) and on raw arrays.
    """
    if isinstance(a, Operator) and isinstance(b, Operator):
        fac = HilbertFactorization(a.factorization.factors + b.factorization.factors)
        _check_capacity(fac.total, max_dim)
        m = np.kron(a.matrix, b.matrix)
        if isinstance(a, DensityOperator) and isinstance(b, DensityOperator):
            return DensityOperator(m, fac)
        return Operator(m, fac)
    a = np.asarray(a)
    b = np.asarray(b)
    _check_capacity(max(a.shape[0] * b.shape[0], a.shape[-1] * b.shape[-1]), max_dim)
    return np.kron(a, b)


# -- raw array versions ------------------------------------------------------

def ptrace_array(m: np.ndarray, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    """Partial trace of a square array, keeping the factors at positions ``keep``."""
    dims = list(dims)
    n = len(dims)
    keep = sorted(keep)
    t = m.reshape(dims + dims)
    traced = [i for i in range(n) if i not in keep]
    letters = "abcdefghijklmnopqrstuvwxyz"
    row = list(letters[:n])
    col = list(letters[n:2 * n])
    for i in traced:
        col[i] = row[i]
    out = "".join(row[i] for i in keep) + "".join(col[i] for i in keep)
    res = np.einsum("".join(row) + "".join(col) + "->" + out, t)
    k = int(np.prod([dims[i] for i in keep], dtype=np.int64))
    return res.reshape(k, k)


def ptranspose_array(m: np.ndarray, dims: Sequence[int], sys_idx: Sequence[int]) -> np.ndarray:
    """Partial transpose on the factors at positions ``sys_idx``."""
    dims = list(dims)
    n = len(dims)
    t = m.reshape(dims + dims)
    perm = list(range(2 * n))
    for i in sys_idx:
        perm[i], perm[n + i] = perm[n + i], perm[i]
    return t.transpose(perm).reshape(m.shape)


def permute_array(m: np.ndarray, dims: Sequence[int], order: Sequence[int]) -> np.ndarray:
    """Reorder tensor factors of a square array."""
    dims = list(dims)
    n = len(dims)
    t = m.reshape(dims + dims)
    t = t.transpose(list(order) + [n + i for i in order])
    return t.reshape(m.shape)


# -- typed operations --------------------------------------------------------

def partial_trace(op: Operator, keep: Iterable[str]):
    """Trace out every factor not listed in ``keep``; kept factors stay in order."""
    fac = op.factorization
    keep_idx = sorted(fac.indices(keep))
    if not keep_idx:
        return op.trace
    m = ptrace_array(op.matrix, fac.dims, keep_idx)
    return _like(op, m, fac.subset(keep_idx), psd=True)


def partial_transpose(op: Operator, party: Iterable[str] | None = None) -> Operator:
    """Partial transpose on the labelled factors (default: all B-labelled factors).

    The result is returned as a plain :class:`Operator` since positivity is not
    preserved in general.
    """
    fac = op.factorization
    idx = fac.party("B") if party is None else fac.indices(party)
    return Operator(ptranspose_array(op.matrix, fac.dims, idx), fac)


def permute(op: Operator, labels: Sequence[str]) -> Operator:
    fac = op.factorization
    order = fac.indices(labels)
    if sorted(order) != list(range(len(fac.dims))):
        raise ValueError("permutation must list every factor exactly once")
    m = permute_array(op.matrix, fac.dims, order)
    return _like(op, m, fac.subset(order), psd=True)


def bipartite_matrix(op: Operator) -> tuple[np.ndarray, int, int]:
    """Matrix with all A-labelled factors first, then B-labelled ones.

    Relative order within each party is kept. Returns ``(matrix, dA, dB)``.
    """
    fac = op.factorization
    a_idx, b_idx = fac.party("A"), fac.party("B")
    if len(a_idx) + len(b_idx) != len(fac.dims) or not a_idx or not b_idx:
        raise ValueError(f"labels {fac.labels} do not split into an A party and a B party")
    m = permute_array(op.matrix, fac.dims, a_idx + b_idx)
    da = int(np.prod([fac.dims[i] for i in a_idx]))
    db = int(np.prod([fac.dims[i] for i in b_idx]))
    return m, da, db


def hermitian_eigensystem(m) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues in descending order with matching orthonormal eigenvectors (columns)."""
    m = m.matrix if isinstance(m, Operator) else np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("matrix must be square")
    m = _hermitize(m, HERMITIAN_TOL * max(1.0, float(np.max(np.abs(m))) if m.size else 1.0))
    w, v = np.linalg.eigh(m)
    return w[::-1], v[:, ::-1]


def rayleigh_max(n, d, eps: float | None = None) -> tuple[float, np.ndarray]:
    """Maximize ``x^dag n x / x^dag (d + eps I) x``.

    Returns the top generalized eigenvalue and a unit-norm maximizer.
    ``eps`` defaults to ``1e-12 * tr(d)``.
    """
    n = _hermitize(np.asarray(n, dtype=complex), HERMITIAN_TOL * max(1.0, float(np.max(np.abs(n)))))
    d = _hermitize(np.asarray(d, dtype=complex), HERMITIAN_TOL * max(1.0, float(np.max(np.abs(d)))))
    if n.shape != d.shape:
        raise ValueError("numerator and denominator must have the same shape")
    tr = float(np.real(np.trace(d)))
    lmin = float(np.linalg.eigvalsh(d)[0])
    if lmin < -PSD_TOL * max(tr, 0.0) or tr <= 0:
        raise ValueError(f"denominator is not PSD (min eigenvalue {lmin:.3e})")
    if eps is None:
        eps = 1e-12 * tr
    if eps <= 0:
        raise ValueError("eps must be positive")
    k = n.shape[0]
    w, v = scipy.linalg.eigh(n, d + eps * np.eye(k), subset_by_index=[k - 1, k - 1])
    x = v[:, 0]
    return float(w[0]), x / np.linalg.norm(x)


def schmidt_rank(v, dims: tuple[int, int], tol: float = 1e-9) -> int:
    """Number of Schmidt coefficients above ``tol`` for the cut ``dims = (dA, dB)``."""
    v = np.asarray(v, dtype=complex).ravel()
    if abs(np.linalg.norm(v) - 1) > 1e-10:
        raise ValueError("state vector must be normalized")
    if dims[0] * dims[1] != v.size:
        raise ValueError(f"cut {dims} does not match vector length {v.size}")
    s = np.linalg.svd(v.reshape(dims), compute_uv=False)
    return int(np.sum(s > tol))


def min_eigenvalue(m: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(m)[0])


# -- matrix file format ------------------------------------------------------

def matrix_to_dict(m, factorization: HilbertFactorization | None = None) -> dict:
    if isinstance(m, Operator):
        factorization = m.factorization
        m = m.matrix
    m = np.asarray(m, dtype=complex)
    if m.ndim == 1:
        m = m[:, None]
    out = {
        "rows": int(m.shape[0]),
        "cols": int(m.shape[1]),
        "re": m.real.ravel().tolist(),
        "im": m.imag.ravel().tolist(),
    }
    if factorization is not None:
        out["factors"] = factorization.to_json()
    return out


def matrix_from_dict(obj: dict) -> tuple[np.ndarray, HilbertFactorization | None]:
    rows, cols = int(obj["rows"]), int(obj["cols"])
    re = np.asarray(obj["re"], dtype=float)
    im = np.asarray(obj.get("im", np.zeros(rows * cols)), dtype=float)
    if re.size != rows * cols or im.size != rows * cols:
        raise ValueError(f"matrix payload length does not match {rows}x{cols}")
    m = (re + 1j * im).reshape(rows, cols)
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix payload has non-finite entries")
    fac = None
    if obj.get("factors"):
        fac = HilbertFactorization(tuple((f["label"], f["dim"]) for f in obj["factors"]))
        if rows == cols and fac.total != rows:
            raise ValueError("factor dimensions do not match the matrix size")
    return m, fac


def save_matrix(path, m, factorization: HilbertFactorization | None = None) -> None:
    Path(path).write_text(json.dumps(matrix_to_dict(m, factorization)))


def load_density(path) -> DensityOperator:
    m, fac = matrix_from_dict(json.loads(Path(path).read_text()))
    return as_density(m, fac)
