"""Move vectors, move matrices and their exact ranks.

Step indices are 0-based inside arrays; block ranges reported to users are
1-based and inclusive, matching the usual ``L[i, j]`` notation.
"""

from __future__ import annotations

import json
import random
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Sequence

import numpy as np
from sympy import isprime

from .weights import EdgeWeights, iter_pairs, num_pairs, pair_index


@dataclass(frozen=True, eq=False)
class MoveSeq:
    """An initial configuration ``sigma0`` plus the ordered list of flipped vertices."""

    n: int
    sigma0: np.ndarray
    moves: tuple[int, ...]

    def __post_init__(self) -> None:
        s0 = np.array(self.sigma0, dtype=np.int8).reshape(-1)
        if s0.shape[0] != self.n:
            raise ValueError(f"sigma0 has length {s0.shape[0]}, expected {self.n}")
        if not np.all(np.abs(s0) == 1):
            raise ValueError("sigma0 entries must be +1 or -1")
        moves = tuple(int(v) for v in self.moves)
        if not moves:
            raise ValueError("a move sequence needs at least one move")
        bad = [v for v in moves if not 0 <= v < self.n]
        if bad:
            raise ValueError(f"vertex {bad[0]} out of range for n={self.n}")
        s0.setflags(write=False)
        object.__setattr__(self, "sigma0", s0)
        object.__setattr__(self, "moves", moves)

    @classmethod
    def from_moves(cls, moves: Iterable[int], n: int | None = None, sigma0=None) -> MoveSeq:
        moves = tuple(moves)
        if n is None:
            n = max(moves) + 2  # one spare vertex so that s < n
        if sigma0 is None:
            sigma0 = np.ones(n, dtype=np.int8)
        return cls(n, sigma0, moves)

    def __len__(self) -> int:
        return len(self.moves)

    def __eq__(self, other) -> bool:
        if not isinstance(other, MoveSeq):
            return NotImplemented
        return self.n == other.n and self.moves == other.moves and np.array_equal(self.sigma0, other.sigma0)

    __hash__ = None

    def states(self) -> Iterator[np.ndarray]:
        """Yield ``sigma_1, ..., sigma_ell`` (the configuration after each step)."""
        s = self.sigma0.copy()
        for v in self.moves:
            s[v] = -s[v]
            yield s.copy()

    def with_sigma0(self, sigma0) -> MoveSeq:
        return MoveSeq(self.n, sigma0, self.moves)

    def block(self, i: int, j: int) -> MoveSeq:
        """Sub-sequence ``L[i, j]`` (1-based, inclusive) started from ``sigma_{i-1}``."""
        s = self.sigma0.copy()
        for v in self.moves[: i - 1]:
            s[v] = -s[v]
        return MoveSeq(self.n, s, self.moves[i - 1 : j])

    def to_dict(self) -> dict:
        return {"n": self.n, "sigma0": [int(x) for x in self.sigma0], "moves": list(self.moves)}

    @classmethod
    def from_dict(cls, d: dict) -> MoveSeq:
        return cls(int(d["n"]), d["sigma0"], d["moves"])

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> MoveSeq:
        return cls.from_dict(json.loads(text))


def _letters(seq) -> tuple[int, ...]:
    return seq.moves if isinstance(seq, MoveSeq) else tuple(seq)


def alpha_vector(s, v: int) -> dict[tuple[int, int], int]:
    """Sparse move vector of flipping ``v`` from ``s``: ``alpha_{uv} = s(v) s(u)``."""
    s = np.asarray(s)
    n = s.shape[0]
    if not 0 <= v < n:
        raise IndexError(f"vertex {v} out of range for n={n}")
    sv = int(s[v])
    return {(min(u, v), max(u, v)): sv * int(s[u]) for u in range(n) if u != v}


def pair_dot(alpha: dict[tuple[int, int], int], w: EdgeWeights) -> float:
    return float(sum(c * w[p] for p, c in alpha.items()))


@dataclass(frozen=True, eq=False)
class MoveMatrix:
    """The matrix ``A_L``: rows are vertex pairs (row-major), columns are steps.

    Stored dense as int8; at the sizes audited here (n <= 32) that is cheaper
    than any sparse container.
    """

    n: int
    data: np.ndarray

    @property
    def ell(self) -> int:
        return self.data.shape[1]

    def pairs(self) -> list[tuple[int, int]]:
        return list(iter_pairs(self.n))

    def row(self, u: int, v: int) -> np.ndarray:
        return self.data[pair_index(self.n, u, v)]

    def rows(self, pairs: Sequence[tuple[int, int]]) -> np.ndarray:
        return self.data[[pair_index(self.n, u, v) for u, v in pairs]]

    def column(self, t: int) -> dict[tuple[int, int], int]:
        """Nonzeros of column ``t`` (0-based)."""
        col = self.data[:, t]
        return {p: int(col[k]) for k, p in enumerate(iter_pairs(self.n)) if col[k]}


def build_move_matrix(seq: MoveSeq) -> MoveMatrix:
    """Entry at ``({u, v_t}, t)`` is ``sigma_t(u)``; every other entry of column t is 0."""
    n = seq.n
    a = np.zeros((num_pairs(n), len(seq)), dtype=np.int8)
    others = np.arange(n)
    for t, (v, st) in enumerate(zip(seq.moves, seq.states())):
        u = others[others != v]
        lo, hi = np.minimum(u, v), np.maximum(u, v)
        rows = lo * (2 * n - lo - 1) // 2 + (hi - lo - 1)
        a[rows, t] = st[u]
    a.setflags(write=False)
    return MoveMatrix(n, a)


def _as_int_array(m) -> np.ndarray:
    if isinstance(m, MoveMatrix):
        m = m.data
    a = np.asarray(m)
    if a.ndim != 2:
        raise ValueError("rank needs a 2-D matrix")
    return a


_INT64_SAFE_DIM = 15


def exact_rank(m) -> int:
    """Rank over the rationals by fraction-free (Bareiss) elimination on integers."""
    a = _as_int_array(m)
    if a.size == 0:
        return 0
    if a.shape[0] > a.shape[1]:
        a = a.T
    # Hadamard: k x k minors of a {-1,0,1} matrix are at most k**(k/2), so for
    # k <= 15 every Bareiss intermediate stays below 2 * 15**15 < 2**63.
    small = a.shape[0] <= _INT64_SAFE_DIM and np.abs(a).max() <= 1
    a = np.array(a, dtype=np.int64 if small else object)
    rows, cols = a.shape
    rank, prev = 0, 1
    for c in range(cols):
        if rank == rows:
            break
        nz = [r for r in range(rank, rows) if a[r, c] != 0]
        if not nz:
            continue
        p = nz[0]
        if p != rank:
            a[[rank, p]] = a[[p, rank]]
        piv = a[rank, c]
        if rank + 1 < rows and c + 1 < cols:
            below = a[rank + 1 :, c + 1 :]
            a[rank + 1 :, c + 1 :] = (below * piv - a[rank + 1 :, c : c + 1] * a[rank, c + 1 :]) // prev
        a[rank + 1 :, c] = 0
        prev = piv
        rank += 1
    return rank


def rank_mod_p(m, p: int) -> int:
    """Rank over GF(p) for a prime ``p < 2**31``."""
    a = np.array(_as_int_array(m), dtype=np.int64) % p
    rows, cols = a.shape
    rank = 0
    for c in range(cols):
        if rank == rows:
            break
        nz = np.flatnonzero(a[rank:, c])
        if nz.size == 0:
            continue
        r = rank + int(nz[0])
        if r != rank:
            a[[rank, r]] = a[[r, rank]]
        a[rank] = a[rank] * pow(int(a[rank, c]), -1, p) % p
        f = a[rank + 1 :, c : c + 1].copy()
        a[rank + 1 :] = (a[rank + 1 :] - f * a[rank]) % p
        rank += 1
    return rank


def random_prime(rng: random.Random, bits: int = 31) -> int:
    while True:
        q = rng.randrange(1 << (bits - 1), 1 << bits) | 1
        if isprime(q):
            return q


def modular_rank(m, primes: int = 3, seed: int = 0) -> int:
    """Randomized cross-check: max rank over a few random 31-bit primes.

    Never exceeds the rational rank and equals it unless every prime divides
    some nonzero minor.
    """
    rng = random.Random(seed)
    return max(rank_mod_p(m, random_prime(rng)) for _ in range(primes))


@dataclass(frozen=True)
class BlockStats:
    ell: int
    s: int
    s1: int
    s2: int
    singleton_blocks: list[tuple[int, int]]
    transition_blocks: list[tuple[int, int]]
    b: dict[int, int]
    counts: dict[int, int] = field(repr=False)

    @property
    def surplus(self) -> int:
        return self.ell - self.s

    @property
    def repeated(self) -> list[int]:
        return sorted(v for v, c in self.counts.items() if c >= 2)

    @property
    def singletons(self) -> list[int]:
        return sorted(v for v, c in self.counts.items() if c == 1)


def seq_stats(seq) -> BlockStats:
    """Letter counts and the singleton/transition block decomposition."""
    letters = _letters(seq)
    counts = Counter(letters)
    s1 = sum(1 for c in counts.values() if c == 1)
    single_blocks: list[tuple[int, int]] = []
    trans_blocks: list[tuple[int, int]] = []
    start = 0
    for t in range(1, len(letters) + 1):
        if t == len(letters) or (counts[letters[t]] == 1) != (counts[letters[start]] == 1):
            target = single_blocks if counts[letters[start]] == 1 else trans_blocks
            target.append((start + 1, t))
            start = t
    b: dict[int, int] = {v: 0 for v in counts}
    for i, j in trans_blocks:
        for v in set(letters[i - 1 : j]):
            b[v] += 1
    return BlockStats(len(letters), len(counts), s1, len(counts) - s1, single_blocks, trans_blocks, b, dict(counts))


def revisits_state(seq) -> bool:
    """True iff some block flips every vertex an even number of times."""
    parity = 0
    seen = {0}
    for v in _letters(seq):
        parity ^= 1 << v
        if parity in seen:
            return True
        seen.add(parity)
    return False


def reference_vertex(seq: MoveSeq) -> int | None:
    """Smallest vertex that never moves, or None if every vertex moves."""
    present = set(seq.moves)
    return next((u for u in range(seq.n) if u not in present), None)


@dataclass(frozen=True)
class AuxGraph:
    """Out-edge ``v -> u`` per repeated ``v``, its cycles, and the acyclic remainder."""

    edges: dict[int, int]
    cycles: list[list[int]]
    removed: list[tuple[int, int]]
    acyclic: dict[int, int]


class StateRevisitError(ValueError):
    """The sequence revisits a configuration, so no auxiliary graph exists."""


def build_aux_graph(seq) -> AuxGraph:
    letters = _letters(seq)
    positions: dict[int, list[int]] = {}
    for t, v in enumerate(letters):
        positions.setdefault(v, []).append(t)
    edges: dict[int, int] = {}
    for v in sorted(positions):
        pos = positions[v]
        if len(pos) < 2:
            continue
        between = Counter(letters[pos[0] + 1 : pos[1]])
        odd = [u for u, c in between.items() if c % 2 == 1]
        if not odd:
            raise StateRevisitError(f"no vertex appears an odd number of times between the first two moves of {v}")
        edges[v] = min(odd)

    cycles: list[list[int]] = []
    done: set[int] = set()
    for v0 in sorted(edges):
        path: list[int] = []
        on_path: dict[int, int] = {}
        v = v0
        while v in edges and v not in done and v not in on_path:
            on_path[v] = len(path)
            path.append(v)
            v = edges[v]
        if v in on_path:
            cyc = path[on_path[v] :]
            k = cyc.index(min(cyc))
            cycles.append(cyc[k:] + cyc[:k])
        done.update(path)
    cycles.sort(key=lambda c: c[0])
    removed = [(c[0], edges[c[0]]) for c in cycles]
    drop = {v for v, _ in removed}
    acyclic = {v: u for v, u in edges.items() if v not in drop}
    return AuxGraph(edges, cycles, removed, acyclic)


def witness_rows(seq: MoveSeq, part: str) -> tuple[list[tuple[int, int]], list[int] | None]:
    """Rows (and for part "i" the columns) whose independence proves each rank bound.

    part "i":   pairs {v, ref} for each moving v, restricted to first-move columns.
    part "ii":  pairs {v, ref} plus the acyclic auxiliary-graph edges.
    part "iii": pairs {v, ref} plus {v, w} for a singleton w between consecutive
                transition blocks that contain v.
    """
    letters = seq.moves
    ref = reference_vertex(seq)
    vertices = sorted(set(letters))
    first = {}
    for t, v in enumerate(letters):
        first.setdefault(v, t)
    if part == "i":
        if ref is None:
            ref = vertices[-1]
            vertices = vertices[:-1]
        return [(v, ref) for v in vertices], [first[v] for v in vertices]
    if ref is None:
        raise ValueError("parts ii and iii need a vertex that never moves")
    rows = [(v, ref) for v in vertices]
    if part == "ii":
        rows += sorted(build_aux_graph(letters).acyclic.items())
        return rows, None
    if part == "iii":
        st = seq_stats(letters)
        single = set(st.singletons)
        for v in st.repeated:
            times = []
            for i, j in st.transition_blocks:
                hits = [t for t in range(i - 1, j) if letters[t] == v]
                if hits:
                    times.append(hits[0])
            for t0, t1 in zip(times, times[1:]):
                w = next(letters[t] for t in range(t0 + 1, t1) if letters[t] in single)
                rows.append((v, w))
        return rows, None
    raise ValueError(f"unknown part {part!r}")


def witness_rank(seq: MoveSeq, part: str, matrix: MoveMatrix | None = None) -> tuple[int, int]:
    """(number of witness rows, exact rank of the selected submatrix)."""
    m = matrix if matrix is not None else build_move_matrix(seq)
    rows, cols = witness_rows(seq, part)
    sub = m.rows(rows)
    if cols is not None:
        sub = sub[:, cols]
    return len(rows), exact_rank(sub)


@dataclass(frozen=True)
class RankAudit:
    rank: int
    n: int
    ell: int
    s: int
    s1: int
    s2: int
    revisits: bool
    bound_i: int
    bound_ii: Fraction | None
    bound_iii: int | None
    pass_i: bool
    pass_ii: bool | None
    pass_iii: bool | None

    @property
    def ok(self) -> bool:
        return self.pass_i and self.pass_ii is not False and self.pass_iii is not False

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["bound_ii"] = None if self.bound_ii is None else str(self.bound_ii)
        d["ok"] = self.ok
        return d


def audit_rank_bounds(seq: MoveSeq, complete_graph: bool = True) -> RankAudit:
    """Compare the exact rank of ``A_L`` with the three combinatorial lower bounds.

    Bounds ii and iii need ``s < n`` and no revisited state; otherwise they
    are reported as ``None`` (not applicable). ``complete_graph=False`` keeps
    only the bounds whose argument does not use edges to every vertex.
    """
    st = seq_stats(seq)
    rank = exact_rank(build_move_matrix(seq))
    revisits = revisits_state(seq)
    bound_i = min(st.s, seq.n - 1)
    bound_ii = bound_iii = None
    pass_ii = pass_iii = None
    if st.s < seq.n and not revisits:
        bound_ii = st.s + Fraction(st.s2, 2)
        pass_ii = rank >= bound_ii
        if complete_graph:
            bound_iii = st.s + sum(max(bv - 1, 0) for bv in st.b.values())
            pass_iii = rank >= bound_iii
    return RankAudit(rank, seq.n, st.ell, st.s, st.s1, st.s2, revisits, bound_i, bound_ii, bound_iii,
                     rank >= bound_i, pass_ii, pass_iii)
