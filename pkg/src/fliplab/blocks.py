"""Critical blocks, their exhaustive enumeration, and densest-block search.

Block ranges ``(i, j)`` are 1-based and inclusive.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Sequence

import numpy as np

from .movealg import MoveSeq, build_move_matrix, exact_rank, revisits_state, seq_stats

log = logging.getLogger(__name__)

MAX_ENUM_S = 6


def _frac(beta) -> Fraction:
    b = Fraction(beta)
    if b <= 0:
        raise ValueError("beta must be positive")
    return b


def _letters(seq) -> tuple[int, ...]:
    if isinstance(seq, MoveSeq):
        return seq.moves
    if hasattr(seq, "letters"):
        return tuple(seq.letters)
    return tuple(seq)


@dataclass(frozen=True)
class Block:
    parent: tuple[int, ...]
    i: int
    j: int
    beta: Fraction = Fraction(1)

    def __post_init__(self) -> None:
        object.__setattr__(self, "parent", _letters(self.parent))
        if not 1 <= self.i <= self.j <= len(self.parent):
            raise ValueError(f"block [{self.i}, {self.j}] outside a parent of length {len(self.parent)}")
        object.__setattr__(self, "beta", _frac(self.beta))

    @property
    def letters(self) -> tuple[int, ...]:
        return self.parent[self.i - 1 : self.j]

    def __len__(self) -> int:
        return self.j - self.i + 1


def is_dense(letters: Sequence[int], beta) -> bool:
    """``ell >= (1 + beta) * s``."""
    return len(letters) >= (1 + _frac(beta)) * len(set(letters))


def is_critical(b: Block | Sequence[int], beta=1) -> bool:
    """Dense, while every strictly smaller sub-block is not."""
    if isinstance(b, Block):
        letters, beta = b.letters, b.beta
    else:
        letters = tuple(b)
    k = 1 + _frac(beta)
    num, den = k.numerator, k.denominator
    ell = len(letters)
    if ell * den < num * len(set(letters)):
        return False
    for a in range(ell):
        seen: set[int] = set()
        for z in range(a, ell):
            seen.add(letters[z])
            if (z - a + 1) * den >= num * len(seen) and (a, z) != (0, ell - 1):
                return False
    return True


def find_critical_block(seq, beta=1) -> Block | None:
    """Shortest (then leftmost) dense block; it is critical by minimality."""
    letters = _letters(seq)
    k = 1 + _frac(beta)
    best: tuple[int, int] | None = None
    for a in range(len(letters)):
        seen: set[int] = set()
        limit = len(letters) if best is None else min(len(letters), a + best[1] - best[0])
        for z in range(a, limit):
            seen.add(letters[z])
            if z - a + 1 >= k * len(seen):
                if best is None or z - a < best[1] - best[0]:
                    best = (a, z)
                break
    if best is None:
        return None
    return Block(letters, best[0] + 1, best[1] + 1, _frac(beta))


class EnumerationLimitError(ValueError):
    pass


def _critical_words(s: int, beta: Fraction) -> Iterator[tuple[int, ...]]:
    """Canonical (first-occurrence ordered) critical words on exactly ``s`` letters."""
    k = 1 + beta
    num, den = k.numerator, k.denominator
    ell = math.ceil(k * s)
    word: list[int] = []

    def rec(used: int) -> Iterator[tuple[int, ...]]:
        p = len(word)
        if p == ell:
            if used == s:
                yield tuple(word)
            return
        if s - used > ell - p:
            return
        for c in range(min(used + 1, s)):
            word.append(c)
            ok = True
            seen: set[int] = set()
            for a in range(p, -1, -1):
                seen.add(word[a])
                if (p - a + 1) * den >= num * len(seen) and not (a == 0 and p == ell - 1):
                    ok = False
                    break
            if ok:
                yield from rec(max(used, c + 1))
            word.pop()

    yield from rec(0)


def enumerate_critical_blocks(s: int, beta=1, include_revisiting: bool = False, max_s: int = MAX_ENUM_S) -> list[tuple[int, ...]]:
    """All critical words of length ``ceil((1+beta) s)`` on ``s`` letters, up to relabeling.

    State-revisiting words are dropped (and the count logged) unless
    ``include_revisiting`` is set.
    """
    if s < 1:
        raise ValueError("s must be >= 1")
    if s > max_s:
        raise EnumerationLimitError(f"s={s} exceeds the enumeration limit {max_s}")
    beta = _frac(beta)
    words = list(_critical_words(s, beta))
    if include_revisiting:
        return words
    kept = [w for w in words if not revisits_state(w)]
    if len(kept) != len(words):
        log.info("s=%d beta=%s: excluded %d state-revisiting critical blocks", s, beta, len(words) - len(kept))
    return kept


@dataclass(frozen=True)
class CriticalRankReport:
    moves: tuple[int, ...]
    ell: int
    s: int
    s1: int
    s2: int
    rank: int | None
    critical: bool
    applicable: bool
    bound_corollary: Fraction
    bound_convex: Fraction
    pass_corollary: bool | None
    pass_convex: bool | None

    @property
    def ok(self) -> bool:
        return self.pass_corollary is not False and self.pass_convex is not False

    def to_dict(self) -> dict:
        return {"moves": list(self.moves), "s": self.s, "s1": self.s1, "s2": self.s2, "rank": self.rank,
                "critical": self.critical, "applicable": self.applicable,
                "bound_corollary": str(self.bound_corollary), "bound_convex": str(self.bound_convex),
                "ok": self.ok}


def check_critical_rank(b, beta=1) -> CriticalRankReport:
    """Exact rank of a critical block against ``s + max(beta/(1+beta) s1, s2/2)``
    and the weaker ``(1+4beta)/(1+3beta) s``.

    Plain letter sequences are embedded with one extra idle vertex; the rank
    does not depend on the initial configuration.
    """
    beta = _frac(beta)
    if isinstance(b, MoveSeq):
        seq = b
    else:
        letters = _letters(b.letters if isinstance(b, Block) else b)
        seq = MoveSeq.from_moves(letters, n=max(letters) + 2)
    st = seq_stats(seq)
    b_cor = st.s + max(beta / (1 + beta) * st.s1, Fraction(st.s2, 2))
    b_cvx = (1 + 4 * beta) / (1 + 3 * beta) * st.s
    critical = is_critical(seq.moves, beta)
    applicable = critical and st.s < seq.n and not revisits_state(seq)
    if not applicable:
        return CriticalRankReport(seq.moves, st.ell, st.s, st.s1, st.s2, None, critical, False, b_cor, b_cvx, None, None)
    r = exact_rank(build_move_matrix(seq))
    return CriticalRankReport(seq.moves, st.ell, st.s, st.s1, st.s2, r, critical, True, b_cor, b_cvx, r >= b_cor, r >= b_cvx)


# block profiles


def next_occurrence(letters: np.ndarray) -> np.ndarray:
    """``nxt[p]`` = next index holding the same letter, or ``len`` if none."""
    ell = letters.shape[0]
    nxt = np.full(ell + 1, ell, dtype=np.int64)
    last: dict[int, int] = {}
    for p in range(ell - 1, -1, -1):
        c = int(letters[p])
        nxt[p] = last.get(c, ell)
        last[c] = p
    return nxt


def block_profiles(letters) -> Iterator[tuple[int, np.ndarray, np.ndarray]]:
    """For each start ``i`` (0-based, descending) yield ``(i, s, s2)``.

    ``s[k]`` and ``s2[k]`` are the distinct and repeated letter counts of the
    block starting at ``i`` with length ``k + 1``. Moving the start left only
    changes where one letter's first and second occurrences sit, so the
    per-start marker arrays are updated in O(1) and summed in O(ell).
    """
    w = np.asarray(letters, dtype=np.int64)
    ell = w.shape[0]
    nxt = next_occurrence(w)
    first = np.zeros(ell + 1, dtype=np.int64)
    second = np.zeros(ell + 1, dtype=np.int64)
    for i in range(ell - 1, -1, -1):
        p1 = nxt[i]
        p2 = nxt[p1]
        first[p1] -= 1
        first[i] += 1
        second[p2] -= 1
        second[p1] += 1
        first[ell] = second[ell] = 0
        yield i, np.cumsum(first[i:ell]), np.cumsum(second[i:ell])


@dataclass(frozen=True)
class DensestBlock:
    i: int
    j: int
    s2: int
    ell: int
    a: float
    bound: float | None
    applicable: bool

    @property
    def ratio(self) -> Fraction:
        return Fraction(self.s2, self.ell)

    @property
    def holds(self) -> bool | None:
        return None if self.bound is None else float(self.ratio) >= self.bound


class DensityBoundViolation(AssertionError):
    pass


def densest_block(word, n: int) -> DensestBlock:
    """Block maximising ``s2/ell`` (ties: shortest, then leftmost).

    With ``a = ell/n > 1`` the bound ``(a-1)/(a log2 n)`` is reported; when the
    word also uses at most ``n`` letters the bound must hold and a violation
    raises ``DensityBoundViolation``.
    """
    letters = np.asarray(_letters(word), dtype=np.int64)
    total = letters.shape[0]
    a = total / n
    best = (-1.0, 0, 0, 0)  # ratio, -length, -start, s2
    for i, _, s2 in block_profiles(letters):
        r = s2 / np.arange(1, s2.shape[0] + 1)
        k = int(np.argmax(r))
        cand = (float(r[k]), -(k + 1), -i, int(s2[k]))
        if cand[:3] >= best[:3]:
            best = cand
    ratio, neg_len, neg_i, s2 = best
    bound = (a - 1) / (a * math.log2(n)) if a > 1 and n > 1 else None
    applicable = bound is not None and len(set(letters.tolist())) <= n
    res = DensestBlock(-neg_i + 1, -neg_i - neg_len, s2, -neg_len, a, bound, applicable)
    if applicable and not res.holds:
        raise DensityBoundViolation(f"densest block ratio {ratio} below {bound}")
    return res


def surplus(letters: Sequence[int]) -> int:
    return len(letters) - len(set(letters))
