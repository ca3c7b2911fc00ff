"""Reproducible random states and textbook fixtures.

Every draw comes from a Philox counter-based generator keyed by
``(seed, stream)``; sample ``i`` of a sweep uses ``stream=i`` so results do
not depend on scheduling order.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .qcore import CompositeSpace, DensityOperator, PureState, partial_trace

DEFAULT_LABELS = ("A", "B", "C", "D", "E", "F")


def rng(seed: int, stream: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream),))
    return np.random.Generator(np.random.Philox(ss))


def _space(dims, labels=None) -> CompositeSpace:
    dims = tuple(int(d) for d in dims)
    if labels is None:
        labels = DEFAULT_LABELS[: len(dims)]
    return CompositeSpace(tuple(labels), dims)


def _ginibre_vector(gen, n):
    v = gen.standard_normal(n) + 1j * gen.standard_normal(n)
    return v / np.linalg.norm(v)


def haar_pure(dims, seed: int, stream: int = 0, labels=None) -> PureState:
    space = _space(dims, labels)
    return PureState(space, _ginibre_vector(rng(seed, stream), space.total_dim))


def haar_unitary(d: int, seed: int, stream: int = 0) -> np.ndarray:
    gen = rng(seed, stream)
    z = (gen.standard_normal((d, d)) + 1j * gen.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def random_density(dims, rank: int, seed: int, stream: int = 0, labels=None) -> DensityOperator:
    """Hilbert-Schmidt style sample: trace out a ``rank``-dimensional ancilla of a Haar pure state."""
    space = _space(dims, labels)
    n = space.total_dim
    if not 1 <= rank <= n:
        raise ValueError(f"rank must be in [1, {n}], got {rank}")
    v = _ginibre_vector(rng(seed, stream), n * rank)
    anc = "__anc__"
    big = PureState(space.join(CompositeSpace((anc,), (rank,))), v)
    red = partial_trace(big.density(), [anc])
    return DensityOperator(space, red.matrix)


def ghz(n: int = 3, labels=None) -> PureState:
    v = np.zeros(2**n, dtype=complex)
    v[0] = v[-1] = 1 / np.sqrt(2)
    return PureState(_space((2,) * n, labels), v)


def w_state(n: int = 3, labels=None) -> PureState:
    v = np.zeros(2**n, dtype=complex)
    for k in range(n):
        v[1 << k] = 1 / np.sqrt(n)
    return PureState(_space((2,) * n, labels), v)


def bell(labels=("A", "B")) -> PureState:
    return PureState(_space((2, 2), labels), np.array([1, 0, 0, 1]) / np.sqrt(2))


def werner(p: float, labels=("A", "B")) -> DensityOperator:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"Werner parameter must lie in [0, 1], got {p}")
    phi = np.array([1, 0, 0, 1]) / np.sqrt(2)
    return DensityOperator(_space((2, 2), labels), p * np.outer(phi, phi) + (1 - p) * np.eye(4) / 4)


def product(dims, labels=None) -> PureState:
    """The all-zeros computational basis state."""
    space = _space(dims, labels)
    v = np.zeros(space.total_dim, dtype=complex)
    v[0] = 1
    return PureState(space, v)


def bell_product(labels=("A", "B", "C")) -> PureState:
    """|Phi+>_{AB} (x) |0>_C."""
    v = np.zeros(8, dtype=complex)
    v[0b000] = v[0b110] = 1 / np.sqrt(2)
    return PureState(_space((2, 2, 2), labels), v)


FAMILIES = {
    "ghz": lambda **kw: ghz(kw.get("n", 3)),
    "w": lambda **kw: w_state(kw.get("n", 3)),
    "bell": lambda **kw: bell(),
    "bell-product": lambda **kw: bell_product(),
    "product": lambda **kw: product(kw.get("dims", (2, 2, 2))),
    "werner": lambda **kw: werner(kw["p"]),
}


def family(name: str, **params):
    try:
        build = FAMILIES[name]
    except KeyError:
        raise ValueError(f"unknown family {name!r}; choose from {sorted(FAMILIES)}") from None
    return build(**params)


@dataclass(frozen=True)
class SamplerSpec:
    dims: tuple
    kind: str = "haar-pure"
    seed: int = 0
    count: int = 1
    rank: int | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("count must be >= 1")
        if self.kind not in ("haar-pure", "hs-mixed", "family"):
            raise ValueError(f"unknown sampler kind {self.kind!r}")
        if self.rank is not None and self.rank > int(np.prod(self.dims)):
            raise ValueError("rank exceeds total dimension")

    def draw(self, index: int):
        if self.kind == "haar-pure":
            return haar_pure(self.dims, self.seed, stream=index)
        if self.kind == "hs-mixed":
            rank = self.rank or int(np.prod(self.dims))
            return random_density(self.dims, rank, self.seed, stream=index)
        return family(self.params["name"], **{k: v for k, v in self.params.items() if k != "name"})

    def __iter__(self):
        for i in range(self.count):
            yield self.draw(i)
