"""Multi-start simplex search over measurement bases and mixing isometries.

Bases and isometries are built from a product of complex two-level
rotations followed by column phases, so any parameter vector maps to an
exactly orthonormal frame.
"""
from __future__ import annotations

import cmath
import functools
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize

from .randgen import rng

KINDS = ("projective", "povm", "hjw-isometry")


class OptimizerError(RuntimeError):
    pass


@dataclass(frozen=True)
class OptimizerConfig:
    restarts: int = 24
    max_iter: int | None = None
    tol: float = 1e-8
    identity_tol: float = 1e-3
    seed: int = 0
    mode: str = "maximize"
    grid: tuple[int, int] | None = (60, 120)
    outcomes: int | None = None

    def __post_init__(self):
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.tol <= 0 or self.identity_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.mode not in ("maximize", "minimize"):
            raise ValueError(f"mode must be maximize or minimize, got {self.mode!r}")
        if self.max_iter is not None and self.max_iter < 1:
            raise ValueError("max_iter must be positive")
        if self.grid is not None and min(self.grid) < 2:
            raise ValueError("grid needs at least 2 points per axis")

    def with_mode(self, mode: str) -> "OptimizerConfig":
        return replace(self, mode=mode)


@dataclass
class OptimizerResult:
    value: float
    params: np.ndarray
    frame: np.ndarray
    restarts: int
    converged: bool
    evaluations: int
    restart_values: list = field(default_factory=list)


def _pairs(rows: int, cols: int) -> list[tuple[int, int]]:
    return [(i, j) for i in range(min(cols, rows)) for j in range(i + 1, rows)]


def param_count(d: int, m: int | None = None, kind: str = "projective") -> int:
    """Number of real parameters: d**2 for a basis, 2*m*d - d**2 for an m x d isometry."""
    if kind not in KINDS:
        raise ValueError(f"unknown kind {kind!r}")
    if kind == "projective":
        m = d
    if m is None or m < d:
        raise ValueError(f"isometry needs m >= d (m={m}, d={d})")
    return 2 * m * d - d * d


def parameterize_basis(params, d: int, m: int | None = None, kind: str = "projective") -> np.ndarray:
    """Map real parameters to a matrix with orthonormal columns.

    ``projective`` returns a d x d unitary whose columns are the measurement
    basis.  ``povm`` and ``hjw-isometry`` return an m x d isometry.  The
    parameters are (theta, phi) for each two-level rotation on the row pairs
    (i, j), i < d, i < j, followed by d column phases.  For d = 2 the first
    column is cos(theta/2)|0> + e^{i phi} sin(theta/2)|1>.
    """
    if kind == "projective":
        m = d
    params = np.asarray(params, dtype=float)
    n = param_count(d, m, kind)
    if params.shape != (n,):
        raise ValueError(f"expected {n} parameters for kind={kind} d={d} m={m}, got {params.shape}")
    pairs = _pairs(m, d)
    flat = params.tolist()
    k = 2 * len(pairs)
    # plain complex arithmetic: at these sizes numpy call overhead dominates
    rows = [[0j] * d for _ in range(m)]
    for c, ph in enumerate(flat[k:]):
        rows[c][c] = cmath.exp(1j * ph)
    for n in range(len(pairs) - 1, -1, -1):
        i, j = pairs[n]
        theta, phi = flat[2 * n], flat[2 * n + 1]
        c, s = math.cos(theta / 2), math.sin(theta / 2)
        e = cmath.exp(1j * phi) * s
        ec = e.conjugate()
        ri, rj = rows[i], rows[j]
        rows[i] = [c * a - ec * b for a, b in zip(ri, rj)]
        rows[j] = [e * a + c * b for a, b in zip(ri, rj)]
    return np.array(rows, dtype=complex)


def _active_count(d, m, kind):
    # column phases leave rank-1 projectors unchanged
    if kind == "projective":
        return d * (d - 1)
    return param_count(d, m, kind)


def _full_params(x, d, m, kind):
    if kind == "projective":
        return np.concatenate([x, np.zeros(d)])
    return x


@functools.lru_cache(maxsize=8)
def bloch_grid(n_theta: int, n_phi: int):
    """(theta, phi) grid over the Bloch sphere and the matching qubit bases (read-only, cached)."""
    theta = np.linspace(0.0, np.pi, n_theta)
    phi = np.linspace(0.0, 2 * np.pi, n_phi, endpoint=False)
    tt, pp = np.meshgrid(theta, phi, indexing="ij")
    tt, pp = tt.ravel(), pp.ravel()
    c, s = np.cos(tt / 2), np.sin(tt / 2)
    e = np.exp(1j * pp)
    frames = np.empty((tt.size, 2, 2), dtype=complex)
    frames[:, 0, 0], frames[:, 1, 0] = c, e * s
    frames[:, 0, 1], frames[:, 1, 1] = -np.conj(e) * s, c
    points = np.stack([tt, pp], axis=1)
    points.setflags(write=False)
    frames.setflags(write=False)
    return points, frames


def _grid_seeds(values, points, frames, count):
    """Best grid points whose first basis vectors are pairwise distinct axes."""
    order = np.argsort(values, kind="stable")
    seeds, vecs = [], []
    for k in order:
        v = frames[k][:, 0]
        if all(abs(np.vdot(u, v)) ** 2 < 0.98 for u in vecs):
            seeds.append(points[k])
            vecs.append(v)
            if len(seeds) == count:
                break
    return seeds


def extremize(
    objective: Callable[[np.ndarray], np.ndarray],
    d: int,
    m: int | None = None,
    kind: str = "projective",
    config: OptimizerConfig | None = None,
    initial_frames: Sequence[np.ndarray] = (),
) -> OptimizerResult:
    """Maximize or minimize ``objective`` over frames of the given kind.

    ``objective`` takes a stack of frames with shape (n, rows, cols) and
    returns n values.  For qubit bases the optional scalar shortcut
    ``objective.bloch(theta, phi)`` drives the local search and
    ``objective.bloch_batch`` the grid.  ``initial_frames`` (projective only)
    add warm starts that search the neighbourhood ``frame @ U(params)``.
    """
    config = config or OptimizerConfig()
    if kind == "projective":
        m = d
    sign = -1.0 if config.mode == "maximize" else 1.0
    n_act = _active_count(d, m, kind)
    evals = 0

    def cost_frames(frames):
        nonlocal evals
        vals = np.asarray(objective(frames), dtype=float)
        evals += len(frames)
        if not np.all(np.isfinite(vals)):
            raise OptimizerError("objective returned a non-finite value")
        return sign * vals

    starts = []  # (x0, step, reference frame)
    for f0 in initial_frames:
        if kind != "projective":
            raise ValueError("warm starts are only supported for projective bases")
        starts.append((np.zeros(n_act), 0.05, np.asarray(f0, dtype=complex)))

    grid_best = None
    if kind == "projective" and d == 2 and config.grid is not None:
        points, frames = bloch_grid(*config.grid)
        batch = getattr(objective, "bloch_batch", None)
        if batch is not None:
            vals = sign * np.asarray(batch(points[:, 0], points[:, 1]), dtype=float)
            evals += len(points)
            if not np.all(np.isfinite(vals)):
                raise OptimizerError("objective returned a non-finite value")
        else:
            vals = cost_frames(frames)
        k = int(np.argmin(vals))
        grid_best = (vals[k], points[k].copy())
        for p in _grid_seeds(vals, points, frames, min(4, config.restarts)):
            starts.append((np.asarray(p, dtype=float), 0.1, None))

    n_random = max(config.restarts - len(starts), 0) if not initial_frames else config.restarts
    for i in range(n_random):
        gen = rng(config.seed, i)
        x0 = gen.uniform(0, 2 * np.pi, n_act)
        x0[0::2][: len(_pairs(m, d))] = gen.uniform(0, np.pi, len(_pairs(m, d)))
        starts.append((x0, 0.4, None))

    max_iter = config.max_iter or 400 * n_act
    best_val, best_x, best_ref = np.inf, None, None
    restart_values, successes = [], []
    bloch = getattr(objective, "bloch", None) if kind == "projective" and d == 2 else None
    for x0, step, ref in starts:
        def f(x, ref=ref):
            nonlocal evals
            if bloch is not None and ref is None:
                val = bloch(x[0], x[1])
                evals += 1
                if not math.isfinite(val):
                    raise OptimizerError("objective returned a non-finite value")
                return sign * val
            frame = parameterize_basis(_full_params(x, d, m, kind), d, m, kind)
            if ref is not None:
                frame = ref @ frame
            return cost_frames(frame[None])[0]

        simplex = np.vstack([x0, x0 + step * np.eye(n_act)])
        res = minimize(
            f,
            x0,
            method="Nelder-Mead",
            options={
                "initial_simplex": simplex,
                "maxiter": max_iter,
                "maxfev": 2 * max_iter,
                "xatol": 1e-5,
                "fatol": config.tol * 1e-3,
                # dimension-scaled coefficients; plain NM stalls for d >= 4
                "adaptive": True,
            },
        )
        val = float(res.fun)
        restart_values.append(sign * val)
        successes.append(bool(res.success))
        if val < best_val:
            best_val, best_x, best_ref = val, res.x, ref

    if grid_best is not None and grid_best[0] < best_val:
        best_val, best_x, best_ref = grid_best[0], grid_best[1], None

    ordered = sorted(sign * v for v in restart_values)
    if len(ordered) < 2:
        # a lone restart can only vouch for its own termination
        converged = all(successes)
    else:
        converged = abs(ordered[0] - ordered[1]) <= 10 * config.tol
    params = _full_params(best_x, d, m, kind)
    frame = parameterize_basis(params, d, m, kind)
    if best_ref is not None:
        frame = best_ref @ frame
    return OptimizerResult(
        value=float(sign * best_val),
        params=params,
        frame=frame,
        restarts=len(starts),
        converged=bool(converged),
        evaluations=evals,
        restart_values=[float(v) for v in restart_values],
    )
