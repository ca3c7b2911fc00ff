"""Rank-1 measurements on one subsystem and what they induce.

Covers outcome ensembles, the correspondence between measurements on a
purifying system and pure-state decompositions, and the dilated
post-measurement state used for disturbance and information gain.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .qcore import (
    RANK_TOL,
    CompositeSpace,
    DensityOperator,
    InvalidStateError,
    LabelError,
    PureState,
    _as_labels,
    as_density,
    coherent_information,
    entropy,
    mutual_information,
    purify,
    spectrum_entropy,
)

COMPLETENESS_TOL = 1e-9
PROB_TOL = 1e-12


class MeasurementError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class RankOneMeasurement:
    """Measurement with operators M_k = |w_k><w_k| on ``subsystem``.

    ``vectors`` is a d x m matrix whose columns are the (unnormalized) w_k.
    ``subsystem`` may name several labels, measured jointly in their order
    within the state.
    """

    subsystem: tuple[str, ...]
    vectors: np.ndarray

    def __init__(self, subsystem, vectors, validate: bool = True):
        w = np.array(vectors, dtype=complex)
        if w.ndim != 2:
            raise MeasurementError("vectors must be a d x m matrix")
        object.__setattr__(self, "subsystem", _as_labels(subsystem))
        object.__setattr__(self, "vectors", w)
        if validate:
            dev = np.max(np.abs(w @ w.conj().T - np.eye(w.shape[0])))
            if dev > COMPLETENESS_TOL:
                raise MeasurementError(f"operators do not sum to identity (deviation {dev:.3g})")

    @classmethod
    def from_basis(cls, subsystem, unitary) -> "RankOneMeasurement":
        """Von Neumann measurement onto the columns of ``unitary``."""
        return cls(subsystem, unitary)

    @classmethod
    def from_isometry(cls, subsystem, isometry) -> "RankOneMeasurement":
        """Naimark-style POVM: with V (m x d) isometric, M_k = V^dag |k><k| V."""
        return cls(subsystem, np.asarray(isometry).conj().T)

    @classmethod
    def from_operators(cls, subsystem, operators) -> "RankOneMeasurement":
        cols = []
        for k, op in enumerate(operators):
            op = np.asarray(op, dtype=complex)
            lam, vec = np.linalg.eigh(op)
            if lam[-1] < -COMPLETENESS_TOL or (len(lam) > 1 and abs(lam[-2]) > 1e-10) or lam[0] < -1e-10:
                raise MeasurementError(f"operator {k} is not a rank-1 positive operator")
            cols.append(vec[:, -1] * np.sqrt(max(lam[-1], 0.0)))
        return cls(subsystem, np.stack(cols, axis=1))

    @classmethod
    def computational(cls, subsystem, d: int) -> "RankOneMeasurement":
        return cls(subsystem, np.eye(d))

    @property
    def dim(self) -> int:
        return self.vectors.shape[0]

    @property
    def outcomes(self) -> int:
        return self.vectors.shape[1]

    @property
    def operators(self) -> list[np.ndarray]:
        w = self.vectors
        return [np.outer(w[:, k], w[:, k].conj()) for k in range(self.outcomes)]

    @property
    def is_von_neumann(self) -> bool:
        if self.outcomes != self.dim:
            return False
        w = self.vectors
        return bool(np.max(np.abs(w.conj().T @ w - np.eye(self.dim))) <= COMPLETENESS_TOL)


@dataclass(frozen=True)
class OutcomeEnsemble:
    probabilities: np.ndarray
    states: tuple[DensityOperator, ...]

    def average(self) -> DensityOperator:
        mix = sum(p * s.matrix for p, s in zip(self.probabilities, self.states))
        return DensityOperator(self.states[0].space, mix, validate=False)

    def average_entropy(self) -> float:
        return float(sum(p * entropy(s) for p, s in zip(self.probabilities, self.states) if p > 0))


@dataclass(frozen=True)
class DecompositionEnsemble:
    weights: np.ndarray
    states: tuple[PureState, ...]

    def mixture(self) -> DensityOperator:
        n = self.states[0].space.total_dim
        mix = np.zeros((n, n), dtype=complex)
        for p, s in zip(self.weights, self.states):
            mix += p * np.outer(s.vector, s.vector.conj())
        return DensityOperator(self.states[0].space, mix, validate=False)

    def average_entropy(self, party=None) -> float:
        """Mean entanglement entropy of the members across ``party`` | rest."""
        total = 0.0
        for p, s in zip(self.weights, self.states):
            if p <= 0:
                continue
            keep = _as_labels(party) if party is not None else s.labels[:1]
            total += p * entropy(s.reduce(keep))
        return float(total)


def split_measured(rho, measured):
    """Return (rest labels, measured labels, rho as a (dA, dB, dA, dB) tensor)."""
    rho = as_density(rho)
    measured = _as_labels(measured)
    for l in measured:
        rho.space.index(l)
    rest = tuple(l for l in rho.labels if l not in measured)
    if not rest:
        raise LabelError("the measured subsystem cannot be the whole system")
    measured = tuple(l for l in rho.labels if l in measured)
    perm = rho.permute(rest + measured)
    da, db = rho.space.dim_of(rest), rho.space.dim_of(measured)
    return rest, measured, perm.matrix.reshape(da, db, da, db)


def conditional_blocks(tensor: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    """Unnormalized p_k rho_k = <w_k| rho |w_k>_B for a stack of measurement matrices.

    ``vectors`` has shape (..., dB, m); the result has shape (..., m, dA, dA).
    """
    big = vectors.ndim > 2 and vectors.shape[0] > 64
    return np.einsum("...bk,abcd,...dk->...kac", vectors.conj(), tensor, vectors, optimize=big)


def weighted_entropy(blocks: np.ndarray) -> np.ndarray:
    """sum_k p_k S(blocks_k / p_k) for stacked unnormalized blocks (..., m, d, d)."""
    lam = np.linalg.eigvalsh(blocks)
    p = np.clip(np.real(np.trace(blocks, axis1=-2, axis2=-1)), 0.0, None)
    return (spectrum_entropy(lam) - spectrum_entropy(p[..., None])).sum(axis=-1)


def _check_dims(rho_space: CompositeSpace, m: RankOneMeasurement):
    d = rho_space.dim_of(m.subsystem)
    if d != m.dim:
        raise MeasurementError(f"measurement acts on dimension {m.dim}, subsystem {m.subsystem} has {d}")


def measure_subsystem(rho, m: RankOneMeasurement) -> OutcomeEnsemble:
    """Outcome probabilities and conditional states of the unmeasured part."""
    rho = as_density(rho)
    _check_dims(rho.space, m)
    rest, _, t = split_measured(rho, m.subsystem)
    blocks = conditional_blocks(t, m.vectors)
    space = rho.space.subspace(rest)
    probs, states = [], []
    for blk in blocks:
        p = float(np.real(np.trace(blk)))
        if p < PROB_TOL:
            probs.append(0.0)
            states.append(DensityOperator(space, np.eye(space.total_dim) / space.total_dim, validate=False))
        else:
            probs.append(p)
            blk = blk / p
            states.append(DensityOperator(space, (blk + blk.conj().T) / 2, validate=False))
    return OutcomeEnsemble(np.array(probs), tuple(states))


def decomposition_from_measurement(psi: PureState, m: RankOneMeasurement) -> DecompositionEnsemble:
    """Pure-state decomposition of Tr_B |psi><psi| induced by measuring B."""
    if not isinstance(psi, PureState):
        raise TypeError("decomposition_from_measurement needs a PureState")
    _check_dims(psi.space, m)
    rest = tuple(l for l in psi.labels if l not in m.subsystem)
    if not rest:
        raise LabelError("the measured subsystem cannot be the whole system")
    measured = tuple(l for l in psi.labels if l in m.subsystem)
    v = psi.permute(rest + measured).vector.reshape(psi.space.dim_of(rest), -1)
    amps = v @ m.vectors.conj()  # column x is <w_x|_B psi
    weights = np.sum(np.abs(amps) ** 2, axis=0)
    return _ensemble_from_columns(psi.space.subspace(rest), amps, weights)


def _ensemble_from_columns(space, amps, weights):
    states = []
    for x, p in enumerate(weights):
        if p < PROB_TOL:
            e = np.zeros(space.total_dim, dtype=complex)
            e[0] = 1.0
            states.append(PureState(space, e, validate=False))
        else:
            states.append(PureState(space, amps[:, x] / np.sqrt(p), validate=False))
    weights = np.where(weights < PROB_TOL, 0.0, weights)
    return DecompositionEnsemble(weights, tuple(states))


def eigen_ensemble(rho, tol: float = RANK_TOL):
    """Eigenvalues (descending) and eigenvectors of the support of rho."""
    rho = as_density(rho)
    lam, vec = np.linalg.eigh(rho.matrix)
    keep = lam > tol
    lam, vec = lam[keep][::-1], vec[:, keep][:, ::-1]
    return lam, vec


def hjw_amplitudes(lam: np.ndarray, vec: np.ndarray, mixing: np.ndarray) -> np.ndarray:
    """Columns sum_j V_xj sqrt(lam_j) |e_j>; ``mixing`` may be a stack (..., m, r)."""
    scaled = vec * np.sqrt(lam)
    return np.einsum("nj,...xj->...nx", scaled, mixing)


def hjw_decompositions(rho, mixing, tol: float = 1e-9) -> DecompositionEnsemble:
    """Decomposition of rho from an m x r isometric mixing block (r = rank)."""
    rho = as_density(rho)
    lam, vec = eigen_ensemble(rho)
    mixing = np.asarray(mixing, dtype=complex)
    r = len(lam)
    if mixing.ndim != 2 or mixing.shape[1] != r or mixing.shape[0] < r:
        raise MeasurementError(f"mixing block must be m x {r} with m >= {r}, got {mixing.shape}")
    dev = np.max(np.abs(mixing.conj().T @ mixing - np.eye(r)))
    if dev > tol:
        raise MeasurementError(f"mixing block is not an isometry (deviation {dev:.3g})")
    amps = hjw_amplitudes(lam, vec, mixing)
    weights = np.sum(np.abs(amps) ** 2, axis=0)
    return _ensemble_from_columns(rho.space, amps, weights)


def decomposition_entropy(amps: np.ndarray, da: int) -> np.ndarray:
    """sum_x ||phi_x||^2 S(A) of unnormalized columns; amps has shape (..., dA*dC, m)."""
    lead = amps.shape[:-2]
    m = amps.shape[-1]
    mats = np.moveaxis(amps, -1, -2).reshape(*lead, m, da, -1)
    sv2 = np.linalg.svd(mats, compute_uv=False) ** 2
    p = sv2.sum(axis=-1)
    return (spectrum_entropy(sv2) - spectrum_entropy(p[..., None])).sum(axis=-1)


def _primed(label):
    return label + "'"


def dilate_measurement(rho_ab, m: RankOneMeasurement, reference: str = "R", register: str = "X",
                       purification: PureState | None = None) -> DensityOperator:
    """Post-measurement state on R, A, B', X of a von Neumann measurement on B.

    rho^{RAB'X} = sum_x (I (x) P_x)|Psi><Psi|(I (x) P_x) (x) |x><x|, with
    |Psi>^{RAB} the eigen-purification of rho^{AB}.  A precomputed
    ``purification`` (ordered R, rest, measured) may be passed to skip the
    eigendecomposition.
    """
    rho = as_density(rho_ab)
    if not m.is_von_neumann:
        raise MeasurementError("dilation requires a complete von Neumann measurement")
    _check_dims(rho.space, m)
    for l in (reference, register):
        if l in rho.labels:
            raise LabelError(f"label collision: {l!r}")
    rest, measured, _ = split_measured(rho, m.subsystem)
    psi = purification if purification is not None else reference_purification(rho, measured, reference)
    dr = psi.dims[0]
    da, db = rho.space.dim_of(rest), rho.space.dim_of(measured)
    v = psi.vector.reshape(dr * da, db)
    w = m.vectors
    k = m.outcomes
    # branch x: (I (x) |w_x><w_x|) Psi, with the register |x> attached
    branches = np.einsum("nb,bx,cx->xnc", v, w.conj(), w).reshape(k, -1)
    vecs = np.zeros((k, dr * da * db, k), dtype=complex)
    vecs[np.arange(k), :, np.arange(k)] = branches
    vecs = vecs.reshape(k, -1)
    full = vecs.T @ vecs.conj()
    labels = (reference,) + rest + tuple(_primed(l) for l in measured) + (register,)
    dims = (dr,) + tuple(rho.dims[rho.space.index(l)] for l in rest) \
        + tuple(rho.dims[rho.space.index(l)] for l in measured) + (k,)
    return DensityOperator(CompositeSpace(labels, dims), full, validate=False)


def reference_purification(rho_ab, measured, reference: str = "R") -> PureState:
    """Purification of rho^{AB} ordered as (reference, unmeasured labels, measured labels)."""
    rest, measured, _ = split_measured(rho_ab, measured)
    psi = purify(as_density(rho_ab).permute(rest + measured), reference)
    return psi.permute((reference,) + rest + measured)


@dataclass(frozen=True)
class DilationQuantities:
    disturbance_b: float
    disturbance_ab: float
    gain_b: float
    gain_ab: float


def dilation_quantities(rho_ab, m: RankOneMeasurement, purification: PureState | None = None) -> DilationQuantities:
    """Disturbances and information gains of measuring B, from one dilated state.

    disturbance on rho^B:     S(B)  - [S(B'X) - S(RAB'X)]
    disturbance on rho^{AB}:  S(AB) - [S(AB'X) - S(RAB'X)]
    gain on rho^B:            I(RA : X)
    gain on rho^{AB}:         I(R : X)
    """
    rho = as_density(rho_ab)
    measured = tuple(l for l in rho.labels if l in m.subsystem)
    rest = tuple(l for l in rho.labels if l not in measured)
    primed = tuple(_primed(l) for l in measured)
    out = dilate_measurement(rho, m, purification=purification)
    return DilationQuantities(
        disturbance_b=entropy(rho.reduce(measured)) - coherent_information(out, ("R",) + rest, primed + ("X",)),
        disturbance_ab=entropy(rho) - coherent_information(out, ("R",), rest + primed + ("X",)),
        gain_b=mutual_information(out, (("R",) + rest, ("X",))),
        gain_ab=mutual_information(out, (("R",), ("X",))),
    )


def disturbance(rho_ab, m: RankOneMeasurement, scope: str = "B") -> float:
    """Quantum disturbance of measuring B, on rho^B (scope "B") or on rho^{AB} (scope "AB")."""
    if scope not in ("B", "AB"):
        raise ValueError(f"scope must be 'B' or 'AB', got {scope!r}")
    q = dilation_quantities(rho_ab, m)
    return float(q.disturbance_b if scope == "B" else q.disturbance_ab)


def information_gain(rho_ab, m: RankOneMeasurement, scope: str = "B") -> float:
    """Information gain I(RA:X) (scope "B") or I(R:X) (scope "AB") of the dilated state."""
    if scope not in ("B", "AB"):
        raise ValueError(f"scope must be 'B' or 'AB', got {scope!r}")
    q = dilation_quantities(rho_ab, m)
    return float(q.gain_b if scope == "B" else q.gain_ab)


def disturbance_identity_rhs(rho_ab, m: RankOneMeasurement) -> float:
    """S(rho^B) - S(rho^{AB}) + sum_x p_x S(rho^A_x)."""
    rho = as_density(rho_ab)
    ens = measure_subsystem(rho, m)
    return float(entropy(rho.reduce(m.subsystem)) - entropy(rho) + ens.average_entropy())


_PAULI = np.array([[[0, 1], [1, 0]], [[0, -1j], [1j, 0]], [[1, 0], [0, -1]]], dtype=complex)


def _xlog(x: float) -> float:
    return -x * math.log2(x) if x > 0.0 else 0.0


class ConditionalEntropy:
    """sum_k p_k S(rho^A_k) as a function of the measurement on B.

    Calling the object evaluates a stack of measurement matrices (columns are
    effect vectors).  When both A and B are qubits, :meth:`bloch` evaluates a
    von Neumann measurement from the polar/azimuth angles of its first basis
    vector in closed form: each block is
    ((1 +- n.s) I + (r +- C n).sigma) / 4 with r, s the local Bloch vectors
    and C the correlation matrix.
    """

    def __init__(self, tensor: np.ndarray, frame_to_vectors=None):
        self.tensor = tensor
        self.frame_to_vectors = frame_to_vectors
        da, db = tensor.shape[:2]
        # rows indexed by (b, d), columns by (a, c): blocks are one matmul away
        self._flat = np.ascontiguousarray(tensor.transpose(1, 3, 0, 2).reshape(db * db, da * da))
        self._da, self._db = da, db
        if tensor.shape == (2, 2, 2, 2):
            rho = tensor.reshape(4, 4)
            eye = np.eye(2)
            self._r = [float(np.real(np.trace(rho @ np.kron(p, eye)))) for p in _PAULI]
            self._s = [float(np.real(np.trace(rho @ np.kron(eye, p)))) for p in _PAULI]
            self._c = [[float(np.real(np.trace(rho @ np.kron(pa, pb)))) for pb in _PAULI] for pa in _PAULI]
        else:
            self.bloch = self.bloch_batch = None

    def __call__(self, frames: np.ndarray) -> np.ndarray:
        vectors = frames if self.frame_to_vectors is None else self.frame_to_vectors(frames)
        n, db, m = vectors.shape
        outer = (vectors.conj()[:, :, None, :] * vectors[:, None, :, :]).reshape(n, db * db, m)
        blocks = (np.swapaxes(outer, 1, 2) @ self._flat).reshape(n, m, self._da, self._da)
        return weighted_entropy(blocks)

    def bloch_batch(self, theta: np.ndarray, phi: np.ndarray) -> np.ndarray:
        st = np.sin(theta)
        n = np.stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta)], axis=-1)
        ns = n @ np.array(self._s)
        cn = n @ np.array(self._c).T
        r = np.array(self._r)
        total = 0.0
        for sign in (1.0, -1.0):
            tr = 1.0 + sign * ns
            length = np.linalg.norm(r + sign * cn, axis=-1)
            mu = np.stack([(tr + length) / 4, (tr - length) / 4], axis=-1)
            total = total + spectrum_entropy(mu) - spectrum_entropy((tr / 2)[..., None])
        return total

    def bloch(self, theta: float, phi: float) -> float:
        st = math.sin(theta)
        n = (st * math.cos(phi), st * math.sin(phi), math.cos(theta))
        r, s, c = self._r, self._s, self._c
        ns = s[0] * n[0] + s[1] * n[1] + s[2] * n[2]
        cn = [c[j][0] * n[0] + c[j][1] * n[1] + c[j][2] * n[2] for j in range(3)]
        total = 0.0
        for sign in (1.0, -1.0):
            tr = 1.0 + sign * ns
            length = math.sqrt(sum((r[j] + sign * cn[j]) ** 2 for j in range(3)))
            total += _xlog((tr + length) / 4) + _xlog((tr - length) / 4) - _xlog(tr / 2)
        return total
