"""Correlation measures built on measurement and decomposition optimization.

Each optimized measure returns a :class:`MeasureResult`.  Maxima found by
the optimizer are lower bounds of the true maxima and minima are upper
bounds of the true minima.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .measops import (
    ConditionalEntropy,
    RankOneMeasurement,
    conditional_blocks,
    decomposition_entropy,
    dilation_quantities,
    reference_purification,
    eigen_ensemble,
    hjw_amplitudes,
    split_measured,
    weighted_entropy,
)
from .optimizer import OptimizerConfig, extremize
from .qcore import DensityOperator, PureState, as_density, entropy, mutual_information, purify, spectrum_entropy

CLIP_TOL = 1e-6


class MeasureError(ArithmeticError):
    """A measure that must be nonnegative came out clearly negative."""


@dataclass
class MeasureResult:
    value: float
    optimum: np.ndarray | None = None
    restarts: int = 0
    converged: bool = True
    evaluations: int = 0
    diagnostics: dict = field(default_factory=dict)

    def __float__(self):
        return self.value


def _clip(value: float, name: str) -> float:
    if value < -CLIP_TOL:
        raise MeasureError(f"{name} = {value:.3g} is negative beyond {CLIP_TOL}")
    return max(value, 0.0)


def _measured_kind(config: OptimizerConfig, d: int):
    m = config.outcomes or d
    return (m, "projective") if m == d else (m, "povm")


def _frame_vectors(frames: np.ndarray, kind: str) -> np.ndarray:
    # povm frames are m x d isometries; effect vectors are columns of V^dag
    if kind == "projective":
        return frames
    return np.conj(np.swapaxes(frames, -1, -2))


def _optimize_conditional_entropy(rho, measured, config, mode, initial_frames=()):
    """Extremize sum_k p_k S(rho^A_k) over rank-1 measurements on ``measured``."""
    rest, measured, t = split_measured(rho, measured)
    db = t.shape[1]
    m, kind = _measured_kind(config, db)

    if kind == "projective":
        objective = ConditionalEntropy(t)
    else:
        objective = ConditionalEntropy(t, lambda frames: _frame_vectors(frames, kind))
    res = extremize(objective, db, m, kind, config.with_mode(mode), initial_frames=initial_frames)
    return res, rest, measured, kind


def _result(value, res, kind, **diag):
    vectors = _frame_vectors(res.frame, kind)
    diag.setdefault("measurement", vectors)
    return MeasureResult(
        value=float(value),
        optimum=res.params,
        restarts=res.restarts,
        converged=res.converged,
        evaluations=res.evaluations,
        diagnostics=diag,
    )


def classical_correlation(rho_ab, measured="B", config: OptimizerConfig | None = None) -> MeasureResult:
    """One-way classical correlation: max over measurements on B of S(A) - sum p_k S(A_k)."""
    config = config or OptimizerConfig()
    rho = as_density(rho_ab)
    res, rest, _, kind = _optimize_conditional_entropy(rho, measured, config, "minimize")
    s_a = entropy(rho.reduce(rest))
    return _result(_clip(s_a - res.value, "J"), res, kind, s_a=s_a)


def quantum_discord(rho_ab, measured="B", config: OptimizerConfig | None = None) -> MeasureResult:
    """Mutual information minus the one-way classical correlation."""
    rho = as_density(rho_ab)
    j = classical_correlation(rho, measured, config)
    rest = tuple(l for l in rho.labels if l not in _labels(measured))
    mi = mutual_information(rho, (rest, _labels(measured)))
    out = MeasureResult(_clip(mi - j.value, "discord"), j.optimum, j.restarts, j.converged, j.evaluations,
                        dict(j.diagnostics, mutual_information=mi, classical_correlation=j.value))
    return out


def _labels(x):
    return (x,) if isinstance(x, str) else tuple(x)


def unlocalizable_entanglement(rho_ab, measured="B", config: OptimizerConfig | None = None,
                               initial_frames=()) -> MeasureResult:
    """One-way unlocalizable entanglement: min over measurements on B of S(A) - sum p_k S(A_k)."""
    config = config or OptimizerConfig()
    rho = as_density(rho_ab)
    res, rest, meas, kind = _optimize_conditional_entropy(rho, measured, config, "maximize", initial_frames)
    s_a = entropy(rho.reduce(rest))
    mi = mutual_information(rho, (rest, meas))
    return _result(_clip(s_a - res.value, "E_u"), res, kind, s_a=s_a, half_mutual_information=mi / 2,
                   assisted_entropy=res.value)


def unlocalizable_discord(rho_ab, measured="B", config: OptimizerConfig | None = None,
                          initial_frames=()) -> MeasureResult:
    """Mutual information minus the one-way unlocalizable entanglement."""
    rho = as_density(rho_ab)
    eu = unlocalizable_entanglement(rho, measured, config, initial_frames)
    meas = _labels(measured)
    rest = tuple(l for l in rho.labels if l not in meas)
    mi = mutual_information(rho, (rest, meas))
    return MeasureResult(_clip(mi - eu.value, "unlocalizable discord"), eu.optimum, eu.restarts, eu.converged,
                         eu.evaluations, dict(eu.diagnostics, mutual_information=mi, unlocalizable_entanglement=eu.value,
                                              s_b=entropy(rho.reduce(meas))))


def _optimize_decompositions(rho, party, config, mode):
    rho = as_density(rho)
    party = _labels(party)
    other = tuple(l for l in rho.labels if l not in party)
    rho = rho.permute(party + other)
    lam, vec = eigen_ensemble(rho)
    r = len(lam)
    da = rho.space.dim_of(party)
    m = max(config.outcomes or r, r)

    def objective(frames):
        return decomposition_entropy(hjw_amplitudes(lam, vec, frames), da)

    return extremize(objective, r, m, "hjw-isometry", config.with_mode(mode)), r, m


def entanglement_of_assistance(rho_ac, party=None, config: OptimizerConfig | None = None,
                               routes=("measurement", "hjw")) -> MeasureResult:
    """Maximal average entanglement over pure-state decompositions of rho^{AC}.

    Route "measurement" optimizes bases on the purifying system; route
    "hjw" optimizes mixing isometries on the eigen-ensemble.  The larger
    value is returned and a warning is recorded if they differ by > 2e-3.
    """
    config = config or OptimizerConfig()
    rho = as_density(rho_ac)
    party = _labels(party) if party is not None else rho.labels[:1]
    values, runs = {}, {}
    if rho.rank() == 1:
        s = entropy(rho.reduce(party))
        return MeasureResult(s, None, 0, True, 0, {"routes": {"pure": s}})
    if "measurement" in routes:
        anc = "__purifier__"
        psi = purify(rho, anc)
        # conditional states on AC are pure, so entropy of A given the purifier outcome suffices
        rho_ab = psi.reduce(party + (anc,))
        res, _, _, kind = _optimize_conditional_entropy(rho_ab, anc, config, "maximize")
        values["measurement"], runs["measurement"] = res.value, (res, kind)
    if "hjw" in routes:
        res, r, m = _optimize_decompositions(rho, party, config, "maximize")
        values["hjw"], runs["hjw"] = res.value, (res, "hjw-isometry")
    if not values:
        raise ValueError("at least one route is required")
    best = max(values, key=values.get)
    res, kind = runs[best]
    spread = max(values.values()) - min(values.values())
    diag = {"routes": dict(values), "route": best, "cross_check_ok": spread <= 2e-3}
    if spread > 2e-3:
        warnings.warn(f"assistance routes disagree by {spread:.3g}", RuntimeWarning, stacklevel=2)
    out = MeasureResult(_clip(values[best], "E_a"), res.params, sum(r.restarts for r, _ in runs.values()),
                        all(r.converged for r, _ in runs.values()), sum(r.evaluations for r, _ in runs.values()), diag)
    out.diagnostics["frame"] = res.frame
    return out


def _binary_entropy(x: float) -> float:
    return float(spectrum_entropy(np.array([x, 1.0 - x])))


def concurrence(rho_ab) -> float:
    """Two-qubit concurrence from the spin-flipped spectrum."""
    rho = as_density(rho_ab)
    if rho.dims != (2, 2):
        raise ValueError(f"concurrence needs a 2x2 state, got dims {rho.dims}")
    yy = np.kron([[0, -1j], [1j, 0]], [[0, -1j], [1j, 0]])
    w, v = np.linalg.eigh(rho.matrix)
    root = (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T
    # singular values of sqrt(rho) sqrt(rho~) avoid square roots of tiny eigenvalues
    lam = np.linalg.svd(root @ yy @ root.conj(), compute_uv=False)
    return float(max(0.0, lam[0] - lam[1] - lam[2] - lam[3]))


def eof_two_qubit(rho_ab) -> float:
    """Closed-form two-qubit entanglement of formation (bits)."""
    c = min(concurrence(rho_ab), 1.0)
    return _binary_entropy((1 + np.sqrt(1 - c * c)) / 2) + 0.0


def eof_convex_roof(rho_ab, party=None, config: OptimizerConfig | None = None) -> MeasureResult:
    """Upper bound on the entanglement of formation by minimizing over decompositions.

    The default number of members is the total dimension (at least the rank).
    """
    config = config or OptimizerConfig()
    rho = as_density(rho_ab)
    party = _labels(party) if party is not None else rho.labels[:1]
    if rho.rank() == 1:
        s = entropy(rho.reduce(party))
        return MeasureResult(s, None, 0, True, 0, {})
    if config.outcomes is None:
        config = replace(config, outcomes=max(rho.space.total_dim, rho.rank()))
    res, r, m = _optimize_decompositions(rho, party, config, "minimize")
    return MeasureResult(_clip(res.value, "E_f"), res.params, res.restarts, res.converged, res.evaluations,
                         {"members": m, "rank": r})


# each evaluation builds a dilated state on R, A, B', X, so use a lighter search
DILATION_CONFIG = OptimizerConfig(restarts=6, grid=(12, 24))


def _dilation_search(rho_ab, measured, config, which):
    config = config or DILATION_CONFIG
    rho = as_density(rho_ab)
    meas = _labels(measured)
    db = rho.space.dim_of(meas)
    psi = reference_purification(rho, meas)

    def objective(frames):
        out = []
        for u in frames:
            q = dilation_quantities(rho, RankOneMeasurement(meas, u, validate=False), purification=psi)
            out.append(which(q))
        return np.array(out)

    return extremize(objective, db, db, "projective", config.with_mode("maximize"))


def uqd_via_disturbance(rho_ab, measured="B", config: OptimizerConfig | None = None) -> MeasureResult:
    """Max over von Neumann bases of the disturbance on rho^B minus the disturbance on rho^{AB}."""
    res = _dilation_search(rho_ab, measured, config, lambda q: q.disturbance_b - q.disturbance_ab)
    return _result(_clip(res.value, "disturbance discord"), res, "projective")


def uqd_info_gain_bound(rho_ab, measured="B", config: OptimizerConfig | None = None) -> MeasureResult:
    """Max over von Neumann bases of the information-gain difference; a lower bound on the unlocalizable discord."""
    res = _dilation_search(rho_ab, measured, config, lambda q: q.gain_b - q.gain_ab)
    return _result(_clip(res.value, "information-gain bound"), res, "projective")


MEASURES = {
    "cc": classical_correlation,
    "discord": quantum_discord,
    "ue": unlocalizable_entanglement,
    "uqd": unlocalizable_discord,
    "eoa": entanglement_of_assistance,
    "eof": eof_convex_roof,
    "uqd-disturbance": uqd_via_disturbance,
    "uqd-gain-bound": uqd_info_gain_bound,
}
