"""Hamiltonian, flip gains, the FLIP engine, and exact small-n path searches."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .movealg import MoveSeq
from .weights import EdgeWeights, rng_for

RULES = ("first", "best", "random", "min-gain")
LOCAL_MAX = "local-max"
STEP_CAP = "step-cap"

DEFAULT_STEP_CAP = 10**9
EXHAUSTIVE_CAP = 10
QUANT_BITS = 40


class ExhaustiveCapError(RuntimeError):
    """An exhaustive search was asked to run above its vertex cap."""


def as_spins(s, n: int | None = None) -> np.ndarray:
    """Validate a +-1 configuration and return it as an int8 array."""
    a = np.asarray(s)
    if a.ndim != 1 or not np.all(np.abs(a) == 1):
        raise ValueError("spin configuration must be a vector of +1/-1")
    if n is not None and a.shape[0] != n:
        raise ValueError(f"configuration has {a.shape[0]} spins, weights have n={n}")
    return a.astype(np.int8)


def random_spins(n: int, rng: np.random.Generator) -> np.ndarray:
    return np.where(rng.random(n) < 0.5, -1, 1).astype(np.int8)


def hamiltonian(w: EdgeWeights, s) -> float:
    """``-1/2 * sum over pairs of X_uv s(u) s(v)``."""
    s = as_spins(s, w.n).astype(float)
    return float(-0.25 * s @ (w.matrix() @ s))


def cut_value(w: EdgeWeights, s) -> float:
    """``1/2 * sum over pairs of X_uv (1 - s(u) s(v))``."""
    s = as_spins(s, w.n)
    iu, iv = np.triu_indices(w.n, 1)
    return float(w.x[s[iu] != s[iv]].sum())


def gain(w: EdgeWeights, s, v: int) -> float:
    """Change of the Hamiltonian when ``v`` flips: ``s(v) * sum_u X_uv s(u)``."""
    s = as_spins(s, w.n)
    if not 0 <= v < w.n:
        raise IndexError(f"vertex {v} out of range for n={w.n}")
    return float(s[v] * (w.matrix()[v] @ s))


def gains(w: EdgeWeights, s) -> np.ndarray:
    s = as_spins(s, w.n).astype(float)
    return s * (w.matrix() @ s)


def improving_moves(w: EdgeWeights, s) -> list[tuple[int, float]]:
    g = gains(w, s)
    return [(int(v), float(g[v])) for v in np.flatnonzero(g > 0)]


def is_local_max(w: EdgeWeights, s) -> bool:
    return not np.any(gains(w, s) > 0)


@dataclass(frozen=True, eq=False)
class FlipTrace:
    sigma0: np.ndarray
    moves: list[int]
    gains: list[float]
    h_values: list[float]
    terminated: str
    h0: float
    final: np.ndarray

    @property
    def steps(self) -> int:
        return len(self.moves)

    @property
    def final_h(self) -> float:
        return self.h_values[-1] if self.h_values else self.h0

    def states(self):
        """Yield ``sigma_0, sigma_1, ...`` including the start."""
        s = self.sigma0.copy()
        yield s.copy()
        for v in self.moves:
            s[v] = -s[v]
            yield s.copy()

    def as_moveseq(self) -> MoveSeq:
        return MoveSeq(len(self.sigma0), self.sigma0, self.moves)

    def to_dict(self, verbose: bool = False, **meta) -> dict:
        d = {**meta, "n": len(self.sigma0), "steps": self.steps, "final_h": self.final_h,
             "terminated": self.terminated}
        if verbose:
            d["gains"] = list(self.gains)
            d["moves"] = list(self.moves)
        return d

    def to_json(self, verbose: bool = False, **meta) -> str:
        return json.dumps(self.to_dict(verbose, **meta))


def flip_run(
    w: EdgeWeights,
    s0,
    rule: str = "best",
    step_cap: int = DEFAULT_STEP_CAP,
    seed: int | np.random.Generator = 0,
    checkpoint: int = 0,
    progress: Callable[[int, float], None] | None = None,
) -> FlipTrace:
    """Run FLIP from ``s0`` until a local maximum or ``step_cap`` improving moves.

    Rules: ``first`` (lowest improving id), ``best`` (largest gain, ties to
    the lowest id), ``random`` (uniform among improving moves, drawn from
    ``seed``, an int or a Generator), ``min-gain`` (smallest positive gain,
    ties to the lowest id).

    The local field ``sum_u X_uv s(u)`` is updated in O(n) per flip. Before
    declaring a local maximum the field is recomputed from scratch so the
    termination verdict does not rest on accumulated rounding.
    """
    if rule not in RULES:
        raise ValueError(f"unknown pivot rule {rule!r}; expected one of {RULES}")
    if step_cap < 0:
        raise ValueError("step_cap must be >= 0")
    sigma0 = as_spins(s0, w.n)
    m = w.matrix()
    s = sigma0.astype(float)
    fld = m @ s
    h = float(-0.25 * s @ fld)
    h0 = h
    rng = seed if isinstance(seed, np.random.Generator) else rng_for(seed, 2)
    moves: list[int] = []
    gl: list[float] = []
    hv: list[float] = []
    terminated = STEP_CAP
    resynced = False
    while len(moves) < step_cap:
        g = s * fld
        if rule == "first":
            v = int(np.argmax(g > 0))
        elif rule == "best":
            v = int(np.argmax(g))
        elif rule == "min-gain":
            v = int(np.argmin(np.where(g > 0, g, np.inf)))
        else:
            cand = np.flatnonzero(g > 0)
            v = int(cand[rng.integers(cand.size)]) if cand.size else 0
        gv = float(g[v])
        if not gv > 0:
            if resynced:
                terminated = LOCAL_MAX
                break
            fld = m @ s
            resynced = True
            continue
        resynced = False
        s[v] = -s[v]
        fld += (2.0 * s[v]) * m[v]
        h += gv
        moves.append(v)
        gl.append(gv)
        hv.append(h)
        if progress is not None and checkpoint and len(moves) % checkpoint == 0:
            progress(len(moves), h)
    if terminated == STEP_CAP and is_local_max(w, s.astype(np.int8)):
        terminated = LOCAL_MAX
    return FlipTrace(sigma0, moves, gl, hv, terminated, h0, s.astype(np.int8))


def epsilon_slow_blocks(trace: FlipTrace | Sequence[float], eps: float, window: int = 1) -> list[list[int]]:
    """Maximal runs of consecutive steps whose gains all lie in (0, eps].

    Only runs of at least ``window`` steps are kept. Ranges are 1-based and
    inclusive.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    if window < 1:
        raise ValueError("window must be >= 1")
    g = trace.gains if isinstance(trace, FlipTrace) else trace
    out: list[list[int]] = []
    start = None
    for t, x in enumerate(list(g) + [None], 1):
        slow = x is not None and 0 < x <= eps
        if slow and start is None:
            start = t
        elif not slow and start is not None:
            if t - start >= window:
                out.append([start, t - 1])
            start = None
    return out


# exact searches on dyadic-rounded weights


def quantize(w: EdgeWeights, bits: int = QUANT_BITS) -> np.ndarray:
    """Dense integer matrix ``round(X * 2**bits)``; gains become exact integers."""
    return np.rint(w.matrix() * float(1 << bits)).astype(np.int64)


@dataclass(frozen=True)
class StateGraph:
    """All ``2**n`` states with exact integer gains of every single flip.

    State ``k`` has ``s(v) = -1`` iff bit ``v`` of ``k`` is set.
    """

    n: int
    spins: np.ndarray
    gains: np.ndarray
    energy2: np.ndarray
    scale: int = field(default=1 << QUANT_BITS)

    @classmethod
    def build(cls, w: EdgeWeights, cap: int = EXHAUSTIVE_CAP, bits: int = QUANT_BITS) -> StateGraph:
        if w.n > cap:
            raise ExhaustiveCapError(f"exhaustive search refused: n={w.n} exceeds cap {cap}")
        q = quantize(w, bits)
        k = np.arange(1 << w.n)
        spins = (1 - 2 * ((k[:, None] >> np.arange(w.n)) & 1)).astype(np.int64)
        local = spins @ q
        return cls(w.n, spins, spins * local, -(spins * local).sum(axis=1) // 2, 1 << bits)

    def order(self) -> np.ndarray:
        """States by decreasing energy; every improving move goes to an earlier state."""
        return np.argsort(-self.energy2, kind="stable")

    def path_lengths(self, lo: int = 1, hi: int | None = None) -> np.ndarray:
        """Longest path from each state using moves with integer gain in [lo, hi]."""
        ok = self.gains >= lo
        if hi is not None:
            ok &= self.gains <= hi
        best = np.zeros(1 << self.n, dtype=np.int64)
        bit = 1 << np.arange(self.n)
        for k in self.order():
            vs = np.flatnonzero(ok[k])
            if vs.size:
                best[k] = 1 + best[k ^ bit[vs]].max()
        return best

    def walk(self, start: int, length: int, best: np.ndarray, lo: int = 1, hi: int | None = None) -> list[int]:
        moves = []
        k = start
        for remaining in range(length, 0, -1):
            for v in range(self.n):
                g = self.gains[k, v]
                if g >= lo and (hi is None or g <= hi) and best[k ^ (1 << v)] >= remaining - 1:
                    moves.append(v)
                    k ^= 1 << v
                    break
        return moves

    def state_of(self, s) -> int:
        s = as_spins(s, self.n)
        return int(sum(1 << v for v in range(self.n) if s[v] < 0))


def _eps_units(eps: float, scale: int) -> int:
    return int(Fraction(eps) * scale) if eps < 1e9 else 1 << 62


def longest_improving_path(w: EdgeWeights, start=None, cap: int = EXHAUSTIVE_CAP) -> tuple[int, MoveSeq | None]:
    """Exact length of the longest improving sequence, with a witness.

    Maximises over all starts unless ``start`` is given. The witness is None
    when no improving move exists.
    """
    g = StateGraph.build(w, cap)
    best = g.path_lengths()
    k0 = int(np.argmax(best)) if start is None else g.state_of(start)
    length = int(best[k0])
    if length == 0:
        return 0, None
    return length, MoveSeq(w.n, g.spins[k0], g.walk(k0, length, best))


def hunt_slow_sequences(w: EdgeWeights, eps: float, target_len: int, cap: int = EXHAUSTIVE_CAP) -> MoveSeq | None:
    """Find a ``target_len``-step sequence whose every gain lies in (0, eps].

    Returns None as a certificate that no such sequence exists from any start
    (exact on the dyadic-rounded weights).
    """
    if target_len < 1:
        raise ValueError("target_len must be >= 1")
    g = StateGraph.build(w, cap)
    hi = _eps_units(eps, g.scale)
    best = g.path_lengths(1, hi)
    hits = np.flatnonzero(best >= target_len)
    if hits.size == 0:
        return None
    k0 = int(hits[0])
    return MoveSeq(w.n, g.spins[k0], g.walk(k0, target_len, best, 1, hi))


def slow_threshold(w: EdgeWeights, target_len: int, cap: int = EXHAUSTIVE_CAP) -> Fraction | None:
    """Smallest eps for which a ``target_len``-step eps-slow sequence exists.

    Equals the minimum over improving paths of that length of their largest
    gain; None if no improving path is that long.
    """
    g = StateGraph.build(w, cap)
    inf = np.iinfo(np.int64).max
    bit = 1 << np.arange(g.n)
    cur = np.zeros(1 << g.n, dtype=np.int64)
    for _ in range(target_len):
        nxt = np.full(1 << g.n, inf, dtype=np.int64)
        for k in range(1 << g.n):
            vs = np.flatnonzero(g.gains[k] > 0)
            if vs.size:
                tails = cur[k ^ bit[vs]]
                live = tails < inf
                if live.any():
                    nxt[k] = np.maximum(g.gains[k, vs[live]], tails[live]).min()
        cur = nxt
    m = int(cur.min())
    return None if m == inf else Fraction(m, g.scale)
