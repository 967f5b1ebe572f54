"""Smoothed edge weights on the complete graph.

Weights live on unordered vertex pairs ``{u, v}`` with ``u < v``, stored once
per pair in row-major order (the order of ``numpy.triu_indices(n, 1)``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Mapping

import numpy as np
from scipy.special import ndtr
from scipy.stats import truncnorm

UNIFORM = "uniform-window"
GAUSSIAN = "truncated-gaussian"
KINDS = (UNIFORM, GAUSSIAN)

_MASK64 = (1 << 64) - 1


class WeightModelError(ValueError):
    """Invalid weight-model parameters."""


def num_pairs(n: int) -> int:
    return n * (n - 1) // 2


def pair_index(n: int, u: int, v: int) -> int:
    """Row-major index of the unordered pair ``{u, v}`` among ``n`` vertices."""
    if u == v:
        raise ValueError(f"self-pair ({u}, {v}) has no index")
    if u > v:
        u, v = v, u
    if u < 0 or v >= n:
        raise ValueError(f"pair ({u}, {v}) out of range for n={n}")
    return u * (2 * n - u - 1) // 2 + (v - u - 1)


def iter_pairs(n: int) -> Iterator[tuple[int, int]]:
    for u in range(n):
        for v in range(u + 1, n):
            yield u, v


def rng_for(master_seed: int, *key: int) -> np.random.Generator:
    """Counter-based generator keyed by ``(master_seed, *key)``.

    The i-th scalar drawn from the returned generator depends only on the key
    and on i, so per-pair draws can be regenerated independently.
    """
    words = [int(master_seed) & _MASK64] + [int(k) & _MASK64 for k in key]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(words)))


def _gaussian_peak(base: float, sigma: float) -> float:
    mass = float(ndtr((1.0 - base) / sigma) - ndtr((-1.0 - base) / sigma))
    return 1.0 / (sigma * math.sqrt(2.0 * math.pi) * mass)


@dataclass(frozen=True)
class WeightModel:
    """Law of the random edge weights.

    ``uniform-window``: uniform on a window of length ``1/phi`` centred at the
    base weight and translated to fit in [-1, 1].

    ``truncated-gaussian``: ``N(base, sigma^2)`` conditioned on [-1, 1]. Here
    ``phi`` is derived (the supremum of the truncated density) and any value
    passed in is replaced.

    ``base`` maps pairs ``(u, v)`` to original weights; unlisted pairs use 0.
    """

    kind: str = UNIFORM
    phi: float | None = 0.5
    sigma: float | None = None
    base: Mapping[tuple[int, int], float] | None = None
    master_seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise WeightModelError(f"unknown weight model kind {self.kind!r}")
        if self.base is not None:
            clean = {}
            for (u, v), b in self.base.items():
                if u == v:
                    raise WeightModelError(f"base weight on self-pair ({u}, {v})")
                b = float(b)
                if not -1.0 <= b <= 1.0:
                    raise WeightModelError(f"base weight {b} for pair ({u}, {v}) outside [-1, 1]")
                clean[(min(u, v), max(u, v))] = b
            object.__setattr__(self, "base", clean)
        if self.kind == UNIFORM:
            if self.phi is None or not self.phi > 0:
                raise WeightModelError(f"phi must be positive, got {self.phi}")
            if 1.0 / self.phi > 2.0:
                raise WeightModelError(f"window length 1/phi = {1.0 / self.phi} exceeds 2")
        else:
            if self.sigma is None or not self.sigma > 0:
                raise WeightModelError(f"sigma must be positive, got {self.sigma}")
            bases = [0.0, *(self.base or {}).values()]
            object.__setattr__(self, "phi", max(_gaussian_peak(b, self.sigma) for b in bases))

    def base_vector(self, n: int) -> np.ndarray:
        out = np.zeros(num_pairs(n))
        for (u, v), b in (self.base or {}).items():
            out[pair_index(n, u, v)] = b
        return out

    def describe(self) -> dict:
        d = {"kind": self.kind, "phi": self.phi, "master_seed": self.master_seed}
        if self.kind == GAUSSIAN:
            d["sigma"] = self.sigma
        if self.base:
            d["base_pairs"] = len(self.base)
        return d

    def density(self, x: np.ndarray | float, base: float = 0.0) -> np.ndarray:
        """Exact density of a single pair weight with the given base weight."""
        x = np.asarray(x, dtype=float)
        if self.kind == UNIFORM:
            lo, hi = _window(base, self.phi)
            return np.where((x >= lo) & (x <= hi), self.phi, 0.0)
        lo, hi = (-1.0 - base) / self.sigma, (1.0 - base) / self.sigma
        return truncnorm.pdf(x, lo, hi, loc=base, scale=self.sigma)


def _window(base, phi):
    half = 0.5 / phi
    lo = np.clip(np.asarray(base, dtype=float) - half, -1.0, 1.0 - 2.0 * half)
    return lo, lo + 2.0 * half


@dataclass(frozen=True, eq=False)
class EdgeWeights:
    """Immutable weights ``X_uv`` on the pairs of ``n`` vertices."""

    n: int
    x: np.ndarray
    _dense: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self) -> None:
        x = np.array(self.x, dtype=float).reshape(-1)
        if x.shape[0] != num_pairs(self.n):
            raise ValueError(f"expected {num_pairs(self.n)} pair weights for n={self.n}, got {x.shape[0]}")
        x.setflags(write=False)
        object.__setattr__(self, "x", x)

    @classmethod
    def zeros(cls, n: int) -> EdgeWeights:
        return cls(n, np.zeros(num_pairs(n)))

    @classmethod
    def from_matrix(cls, m) -> EdgeWeights:
        m = np.asarray(m, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("weight matrix must be square")
        if not np.array_equal(m, m.T):
            raise ValueError("weight matrix must be symmetric")
        iu = np.triu_indices(m.shape[0], 1)
        return cls(m.shape[0], m[iu])

    @classmethod
    def from_pairs(cls, n: int, values: Mapping[tuple[int, int], float]) -> EdgeWeights:
        x = np.zeros(num_pairs(n))
        for (u, v), w in values.items():
            x[pair_index(n, u, v)] = w
        return cls(n, x)

    def __getitem__(self, pair: tuple[int, int]) -> float:
        return float(self.x[pair_index(self.n, *pair)])

    def __eq__(self, other) -> bool:
        if not isinstance(other, EdgeWeights):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.x, other.x)

    __hash__ = None

    def matrix(self) -> np.ndarray:
        """Dense symmetric ``n x n`` view with zero diagonal (read-only, cached)."""
        if self._dense is None:
            m = np.zeros((self.n, self.n))
            iu = np.triu_indices(self.n, 1)
            m[iu] = self.x
            m.T[iu] = self.x
            m.setflags(write=False)
            object.__setattr__(self, "_dense", m)
        return self._dense


def sample_weights(model: WeightModel, n: int, trial: int) -> EdgeWeights:
    """Draw independent pair weights for the complete graph on ``n`` vertices.

    Pair ``p`` consumes the ``p``-th uniform of the stream keyed by
    ``(master_seed, trial, n)``; the gaussian case maps it through the
    truncated-normal quantile function.
    """
    if n < 2:
        raise WeightModelError(f"need n >= 2, got {n}")
    base = model.base_vector(n)
    u = rng_for(model.master_seed, trial, n).random(num_pairs(n))
    if model.kind == UNIFORM:
        lo, hi = _window(base, model.phi)
        x = lo + (hi - lo) * u
    else:
        s = model.sigma
        x = truncnorm.ppf(u, (-1.0 - base) / s, (1.0 - base) / s, loc=base, scale=s)
    return EdgeWeights(n, np.clip(x, -1.0, 1.0))


@dataclass(frozen=True)
class WeightReport:
    ok: bool
    pair: tuple[int, int] | None = None
    value: float | None = None
    reason: str = ""

    def __bool__(self) -> bool:
        return self.ok


def validate_weights(w: EdgeWeights) -> WeightReport:
    """Check shape and range; report the first offending pair, if any."""
    x = np.asarray(w.x)
    if x.ndim != 1 or x.shape[0] != num_pairs(w.n):
        return WeightReport(False, reason=f"expected {num_pairs(w.n)} pair entries, got shape {x.shape}")
    bad = np.flatnonzero(~((x >= -1.0) & (x <= 1.0)))
    if bad.size:
        p = int(bad[0])
        iu = np.triu_indices(w.n, 1)
        pair = (int(iu[0][p]), int(iu[1][p]))
        return WeightReport(False, pair, float(x[p]), "weight outside [-1, 1]")
    return WeightReport(True)


def load_base_weights(path: str | Path) -> dict[tuple[int, int], float]:
    """Read ``u v w`` lines (0-based ids); blank lines and ``#`` comments are skipped."""
    out: dict[tuple[int, int], float] = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise WeightModelError(f"{path}:{lineno}: expected 'u v w', got {line!r}")
        u, v, w = int(parts[0]), int(parts[1]), float(parts[2])
        if u == v:
            raise WeightModelError(f"{path}:{lineno}: self-pair {u}")
        if not -1.0 <= w <= 1.0:
            raise WeightModelError(f"{path}:{lineno}: base weight {w} outside [-1, 1]")
        out[(min(u, v), max(u, v))] = w
    return out
