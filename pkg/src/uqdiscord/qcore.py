"""Labeled multipartite states, tensor/trace calculus and entropic functionals.

All entropies are in bits.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

HERMITIAN_TOL = 1e-10
EIG_TOL = 1e-10
TRACE_TOL = 1e-10
NORM_TOL = 1e-10
RANK_TOL = 1e-12


class InvalidStateError(ValueError):
    """Raised when a matrix or vector violates a state invariant."""


class LabelError(ValueError):
    """Raised on unknown, duplicated or colliding subsystem labels."""


@dataclass(frozen=True)
class CompositeSpace:
    labels: tuple[str, ...]
    dims: tuple[int, ...]

    def __post_init__(self):
        labels = tuple(self.labels)
        dims = tuple(int(d) for d in self.dims)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "dims", dims)
        if len(labels) != len(dims):
            raise LabelError(f"{len(labels)} labels but {len(dims)} dims")
        if len(set(labels)) != len(labels):
            raise LabelError(f"duplicate labels in {labels}")
        if any(d < 1 for d in dims):
            raise ValueError(f"dimensions must be >= 1, got {dims}")

    @property
    def total_dim(self) -> int:
        return int(np.prod(self.dims, dtype=np.int64))

    def dim_of(self, labels: Iterable[str]) -> int:
        return int(np.prod([self.dims[self.index(l)] for l in labels], dtype=np.int64))

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise LabelError(f"unknown label {label!r}; space has {self.labels}") from None

    def subspace(self, labels: Iterable[str]) -> "CompositeSpace":
        """Subspace on ``labels``, kept in this space's order."""
        keep = set(_as_labels(labels))
        for l in keep:
            self.index(l)
        idx = [i for i, l in enumerate(self.labels) if l in keep]
        return CompositeSpace(tuple(self.labels[i] for i in idx), tuple(self.dims[i] for i in idx))

    def join(self, other: "CompositeSpace") -> "CompositeSpace":
        clash = set(self.labels) & set(other.labels)
        if clash:
            raise LabelError(f"label collision: {sorted(clash)}")
        return CompositeSpace(self.labels + other.labels, self.dims + other.dims)


def _as_labels(labels) -> tuple[str, ...]:
    if isinstance(labels, str):
        return (labels,)
    return tuple(labels)


def _space(space, dims=None) -> CompositeSpace:
    if isinstance(space, CompositeSpace):
        return space
    return CompositeSpace(_as_labels(space), tuple(dims))


@dataclass(frozen=True, eq=False)
class DensityOperator:
    space: CompositeSpace
    matrix: np.ndarray

    def __init__(self, space, matrix, dims=None, validate: bool = True):
        space = _space(space, dims)
        m = np.array(matrix, dtype=complex)
        n = space.total_dim
        if m.shape != (n, n):
            raise InvalidStateError(f"matrix shape {m.shape} does not match dimension {n}")
        m.setflags(write=False)
        object.__setattr__(self, "space", space)
        object.__setattr__(self, "matrix", m)
        if validate:
            self.validate()

    def validate(self) -> None:
        m = self.matrix
        dev = np.max(np.abs(m - m.conj().T)) if m.size else 0.0
        if dev > HERMITIAN_TOL:
            raise InvalidStateError(f"not Hermitian (max deviation {dev:.3g})")
        tr = np.trace(m).real
        if abs(tr - 1.0) > TRACE_TOL:
            raise InvalidStateError(f"trace {tr:.12g} is not 1")
        lmin = np.linalg.eigvalsh(m).min()
        if lmin < -EIG_TOL:
            raise InvalidStateError(f"negative eigenvalue {lmin:.3g}")

    @property
    def labels(self) -> tuple[str, ...]:
        return self.space.labels

    @property
    def dims(self) -> tuple[int, ...]:
        return self.space.dims

    def eigvals(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)

    def rank(self, tol: float = RANK_TOL) -> int:
        return int(np.sum(self.eigvals() > tol))

    def ptrace(self, discard) -> "DensityOperator":
        return partial_trace(self, discard)

    def reduce(self, keep) -> "DensityOperator":
        keep = set(_as_labels(keep))
        for l in keep:
            self.space.index(l)
        discard = [l for l in self.labels if l not in keep]
        return partial_trace(self, discard) if discard else self

    def relabel(self, mapping: dict) -> "DensityOperator":
        labels = tuple(mapping.get(l, l) for l in self.labels)
        return DensityOperator(CompositeSpace(labels, self.dims), self.matrix, validate=False)

    def permute(self, order: Sequence[str]) -> "DensityOperator":
        """Reorder subsystems so that labels appear in ``order``."""
        order = tuple(order)
        if sorted(order) != sorted(self.labels):
            raise LabelError(f"{order} is not a permutation of {self.labels}")
        perm = [self.space.index(l) for l in order]
        k = len(self.dims)
        t = self.matrix.reshape(self.dims * 2)
        t = t.transpose(perm + [p + k for p in perm])
        dims = tuple(self.dims[p] for p in perm)
        n = self.space.total_dim
        return DensityOperator(CompositeSpace(order, dims), t.reshape(n, n), validate=False)

    def __repr__(self):
        return f"DensityOperator(labels={self.labels}, dims={self.dims})"


@dataclass(frozen=True, eq=False)
class PureState:
    space: CompositeSpace
    vector: np.ndarray

    def __init__(self, space, vector, dims=None, validate: bool = True):
        space = _space(space, dims)
        v = np.array(vector, dtype=complex).reshape(-1)
        if v.shape != (space.total_dim,):
            raise InvalidStateError(f"vector length {v.size} does not match dimension {space.total_dim}")
        v.setflags(write=False)
        object.__setattr__(self, "space", space)
        object.__setattr__(self, "vector", v)
        if validate:
            nrm = np.linalg.norm(v)
            if abs(nrm - 1.0) > NORM_TOL:
                raise InvalidStateError(f"norm {nrm:.12g} is not 1")

    @property
    def labels(self) -> tuple[str, ...]:
        return self.space.labels

    @property
    def dims(self) -> tuple[int, ...]:
        return self.space.dims

    def density(self) -> DensityOperator:
        v = self.vector
        return DensityOperator(self.space, np.outer(v, v.conj()), validate=False)

    def reduce(self, keep) -> DensityOperator:
        return self.density().reduce(keep)

    def permute(self, order: Sequence[str]) -> "PureState":
        order = tuple(order)
        if sorted(order) != sorted(self.labels):
            raise LabelError(f"{order} is not a permutation of {self.labels}")
        perm = [self.space.index(l) for l in order]
        t = self.vector.reshape(self.dims).transpose(perm)
        dims = tuple(self.dims[p] for p in perm)
        return PureState(CompositeSpace(order, dims), t.reshape(-1), validate=False)

    def __repr__(self):
        return f"PureState(labels={self.labels}, dims={self.dims})"


def as_density(state) -> DensityOperator:
    if isinstance(state, PureState):
        return state.density()
    if isinstance(state, DensityOperator):
        return state
    raise TypeError(f"expected a state, got {type(state).__name__}")


def ket(labels, dims, amplitudes) -> PureState:
    """Normalized pure state from raw amplitudes."""
    v = np.asarray(amplitudes, dtype=complex).reshape(-1)
    return PureState(_space(labels, dims), v / np.linalg.norm(v))


def tensor(a, b):
    """Kronecker product on the concatenated space.

    Two pure states give a pure state; any density input gives a density.
    """
    space = a.space.join(b.space)
    if isinstance(a, PureState) and isinstance(b, PureState):
        return PureState(space, np.kron(a.vector, b.vector), validate=False)
    a, b = as_density(a), as_density(b)
    return DensityOperator(space, np.kron(a.matrix, b.matrix), validate=False)


def partial_trace(rho, discard) -> DensityOperator:
    rho = as_density(rho)
    discard = set(_as_labels(discard))
    for l in discard:
        rho.space.index(l)
    if discard == set(rho.labels):
        raise LabelError("cannot trace out every subsystem")
    if not discard:
        return rho
    keep_idx = [i for i, l in enumerate(rho.labels) if l not in discard]
    tr_idx = [i for i, l in enumerate(rho.labels) if l in discard]
    k = len(rho.dims)
    t = rho.matrix.reshape(rho.dims * 2)
    t = t.transpose(keep_idx + tr_idx + [i + k for i in keep_idx] + [i + k for i in tr_idx])
    dk = int(np.prod([rho.dims[i] for i in keep_idx]))
    dt = int(np.prod([rho.dims[i] for i in tr_idx]))
    red = np.einsum("ajbj->ab", t.reshape(dk, dt, dk, dt))
    space = CompositeSpace(tuple(rho.labels[i] for i in keep_idx), tuple(rho.dims[i] for i in keep_idx))
    return DensityOperator(space, red, validate=False)


def purify(rho, ancilla_label: str = "R") -> PureState:
    """Eigen-purification sum_j sqrt(lam_j) |e_j>|j> with a rank-sized ancilla appended last."""
    rho = as_density(rho)
    if ancilla_label in rho.labels:
        raise LabelError(f"label collision: {ancilla_label!r}")
    lam, vecs = np.linalg.eigh(rho.matrix)
    keep = lam > RANK_TOL
    lam, vecs = lam[keep], vecs[:, keep]
    # largest weight first so a pure input keeps its own phase convention
    order = np.argsort(lam)[::-1]
    lam, vecs = lam[order], vecs[:, order]
    psi = (vecs * np.sqrt(lam)).reshape(-1)
    psi = psi / np.linalg.norm(psi)
    space = CompositeSpace(rho.labels + (ancilla_label,), rho.dims + (len(lam),))
    return PureState(space, psi)


def spectrum_entropy(eigs) -> np.ndarray:
    """-sum x log2 x along the last axis with 0 log 0 := 0. Works on stacks."""
    x = np.clip(np.real(eigs), 0.0, None)
    safe = np.where(x > 0, x, 1.0)
    return -(x * np.log2(safe)).sum(axis=-1)


def entropy(rho) -> float:
    """von Neumann entropy in bits."""
    if isinstance(rho, PureState):
        return 0.0
    rho = as_density(rho)
    lam = np.linalg.eigvalsh(rho.matrix)
    if lam.min() < -EIG_TOL:
        raise InvalidStateError(f"negative eigenvalue {lam.min():.3g}")
    return float(spectrum_entropy(lam))


def _entropy_of(rho, labels) -> float:
    return entropy(rho.reduce(labels))


def _cut(rho, cut):
    a, b = (_as_labels(c) for c in cut)
    if not a or not b or set(a) & set(b):
        raise LabelError(f"bad partition {cut}")
    for l in a + b:
        rho.space.index(l)
    return a, b


def mutual_information(rho, cut) -> float:
    """S(A) + S(B) - S(AB) for ``cut = (labels_A, labels_B)``."""
    rho = as_density(rho)
    a, b = _cut(rho, cut)
    return _entropy_of(rho, a) + _entropy_of(rho, b) - _entropy_of(rho, a + b)


def conditional_entropy(rho, conditioned_on, of=None) -> float:
    """S(AB) - S(B) where B is ``conditioned_on`` and A defaults to every other label."""
    rho = as_density(rho)
    b = _as_labels(conditioned_on)
    a = _as_labels(of) if of is not None else tuple(l for l in rho.labels if l not in b)
    a, b = _cut(rho, (a, b))
    return _entropy_of(rho, a + b) - _entropy_of(rho, b)


def coherent_information(rho, source, target) -> float:
    """S(target) - S(source + target)."""
    rho = as_density(rho)
    y, z = _cut(rho, (source, target))
    return _entropy_of(rho, z) - _entropy_of(rho, y + z)
