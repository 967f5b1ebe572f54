"""Words that are sparse at every scale: two-stage random construction and checks.

Stage one drops potentially repeated letters ``i`` and ``i'`` (for
``b0 <= i < b1``) at one uniform position per chunk of ``gamma * i``
positions, alternating ``i`` and ``i'`` between even and odd chunks. Stage
two fills every untouched position with a fresh letter.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import asdict, dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import mpmath
import numpy as np

from .blocks import block_profiles
from .weights import rng_for

ENUM_LIMIT = 10**7


def round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


class ParamsError(ValueError):
    pass


@dataclass(frozen=True)
class SparseWordParams:
    a: float
    n: int
    b0: int
    b1: int
    gamma: int
    seed: int = 0
    ell: int | None = None

    def __post_init__(self) -> None:
        if not self.a > 1:
            raise ParamsError("a must exceed 1")
        if self.b0 < 1 or self.b1 < self.b0:
            raise ParamsError(f"need 1 <= b0 <= b1, got b0={self.b0}, b1={self.b1}")
        if self.gamma < 1:
            raise ParamsError("gamma must be a positive integer")
        if self.ell is None:
            object.__setattr__(self, "ell", round_half_up(self.a * self.n))

    @property
    def pool_size(self) -> int:
        return 2 * (self.b1 - self.b0)

    @property
    def short_block(self) -> int:
        """Blocks no longer than this contain no repeated letter."""
        return self.gamma * self.b0


def derive_params(a: float, n: int, seed: int = 0) -> SparseWordParams:
    """``b0 = [ln n]``, ``b1 = [sqrt n]``, ``gamma = [ln n / (2 ln 2a)]``, ``ell = [a n]``.

    ``[x]`` rounds to nearest with ties up.
    """
    if not a > 1:
        raise ParamsError("a must exceed 1")
    if n < 2:
        raise ParamsError("n must be at least 2")
    ln = math.log(n)
    b0 = round_half_up(ln)
    b1 = round_half_up(math.sqrt(n))
    gamma = round_half_up(ln / (2 * math.log(2 * a)))
    if gamma < 1 or b0 < 1 or b0 >= b1:
        raise ParamsError(f"n={n} too small for a={a}: b0={b0}, b1={b1}, gamma={gamma}")
    return SparseWordParams(a, n, b0, b1, gamma, seed)


@dataclass(frozen=True, eq=False)
class Word:
    letters: np.ndarray
    stage_one: np.ndarray
    params: SparseWordParams

    def __len__(self) -> int:
        return int(self.letters.shape[0])

    def __eq__(self, other) -> bool:
        if not isinstance(other, Word):
            return NotImplemented
        return np.array_equal(self.letters, other.letters) and np.array_equal(self.stage_one, other.stage_one)

    __hash__ = None

    @property
    def num_letters(self) -> int:
        return int(np.unique(self.letters).size)

    def letter_name(self, c: int) -> str:
        p = self.params
        if c < p.pool_size:
            return f"{p.b0 + c // 2}" + ("'" if c % 2 else "")
        return f"u{c - p.pool_size}"

    def save(self, path: str | Path, **meta) -> None:
        header = {**asdict(self.params), **meta}
        lines = ["# fliplab word v1 " + " ".join(f"{k}={v}" for k, v in header.items())]
        lines += [str(int(c)) for c in self.letters]
        Path(path).write_text("\n".join(lines) + "\n")


def load_word_letters(path: str | Path) -> np.ndarray:
    rows = [ln for ln in Path(path).read_text().splitlines() if ln and not ln.startswith("#")]
    return np.array([int(r) for r in rows], dtype=np.int64)


def repeated_letter(i: int, k: int, b0: int) -> int:
    """Letter id written by index ``i`` in chunk ``k``: ``2(i-b0)`` or ``2(i-b0)+1``."""
    return 2 * (i - b0) + (k & 1)


def build_sparse_word(p: SparseWordParams) -> Word:
    """Two-stage construction truncated to ``p.ell`` positions.

    Chunk offsets for index ``i`` come from a stream keyed by ``(seed, i)``
    and drawn in chunk order, so a prefix never depends on the truncation
    point. Higher ``i`` overwrite lower ones.
    """
    ell = p.ell
    letters = np.full(ell, -1, dtype=np.int64)
    for i in range(p.b0, p.b1):
        size = p.gamma * i
        chunks = -(-ell // size)
        offsets = rng_for(p.seed, i).integers(0, size, size=chunks)
        k = np.arange(chunks)
        pos = k * size + offsets
        keep = pos < ell
        letters[pos[keep]] = 2 * (i - p.b0) + (k[keep] & 1)
    stage_one = letters >= 0
    empty = np.flatnonzero(~stage_one)
    letters[empty] = p.pool_size + np.arange(empty.size)
    letters.setflags(write=False)
    stage_one.setflags(write=False)
    return Word(letters, stage_one, p)


@dataclass(frozen=True)
class FillProbability:
    d: Fraction
    lower: mpmath.mpf
    upper: mpmath.mpf
    lower_ok: bool
    upper_ok: bool

    @property
    def ok(self) -> bool:
        return self.lower_ok and self.upper_ok


def stage_fill_probability(p: SparseWordParams | tuple[int, int, int], dps: int = 40) -> FillProbability:
    """``d = prod_{i=b0}^{b1-1} (1 - 1/(gamma i))`` with its two power bounds.

    The bounds are checked exactly: ``d**gamma`` against the rationals
    ``(b0-1)/(b1-1)`` and ``b0/b1``. The bounds themselves are returned as
    ``dps``-digit mpmath values.
    """
    b0, b1, g = (p.b0, p.b1, p.gamma) if isinstance(p, SparseWordParams) else p
    d = Fraction(1)
    for i in range(b0, b1):
        d *= 1 - Fraction(1, g * i)
    dg = d**g
    lo_q = Fraction(b0 - 1, b1 - 1) if b1 > 1 else Fraction(1)
    hi_q = Fraction(b0, b1)
    with mpmath.workdps(dps):
        lower = mpmath.root(mpmath.mpf(lo_q.numerator) / lo_q.denominator, g)
        upper = mpmath.root(mpmath.mpf(hi_q.numerator) / hi_q.denominator, g)
    return FillProbability(d, lower, upper, lo_q <= dg, dg <= hi_q)


@dataclass
class ScanReport:
    n: int
    ell: int
    gamma: int
    b0: int
    d: float
    letters_used: int
    blocks: int
    max_s2_over_s: float
    max_s2_over_ell: float
    s2_bound_violations: int
    short_block_violations: int
    density_violations: int
    c_measured: float
    c_theory: float
    deterministic_ok: bool
    letters_ok: bool
    density_ok: bool
    c_ok: bool | None

    def to_dict(self) -> dict:
        return asdict(self)


def scan_word(word: Word | Sequence[int], p: SparseWordParams | None = None, n0: int = 0,
              strict: bool = False) -> ScanReport:
    """Scan every block of the word.

    Deterministic checks: ``s2(B) <= 2 ell(B)/gamma`` everywhere, and
    ``s2(B) = 0`` when ``ell(B) <= gamma b0``. Statistical checks (warnings
    unless ``strict``): ``s(B) >= d ell(B)/2`` for longer blocks, at most ``n``
    letters in total, and ``max s2/s <= C/ln n`` with ``C = 9 a ln a`` once
    ``n > n0``.
    """
    if isinstance(word, Word):
        p = p or word.params
        letters = word.letters
    else:
        letters = np.asarray(word, dtype=np.int64)
    if p is None:
        raise ValueError("parameters are required for a bare letter sequence")
    ell = letters.shape[0]
    d = float(stage_fill_probability(p).d)
    short = p.short_block
    lengths = np.arange(1, ell + 1)
    max_r = max_rl = 0.0
    v_s2 = v_short = v_dens = 0
    for i, s, s2 in block_profiles(letters):
        k = lengths[: s.shape[0]]
        v_s2 += int(np.count_nonzero(s2 * p.gamma > 2 * k))
        v_short += int(np.count_nonzero(s2[:short]))
        if s.shape[0] > short:
            v_dens += int(np.count_nonzero(s[short:] < 0.5 * d * k[short:]))
        max_r = max(max_r, float((s2 / s).max()))
        max_rl = max(max_rl, float((s2 / k).max()))
    used = int(np.unique(letters).size)
    c_theory = 9 * p.a * math.log(p.a)
    c_meas = max_r * math.log(p.n)
    rep = ScanReport(
        n=p.n, ell=int(ell), gamma=p.gamma, b0=p.b0, d=d, letters_used=used, blocks=ell * (ell + 1) // 2,
        max_s2_over_s=max_r, max_s2_over_ell=max_rl,
        s2_bound_violations=v_s2, short_block_violations=v_short, density_violations=v_dens,
        c_measured=c_meas, c_theory=c_theory,
        deterministic_ok=v_s2 == 0 and v_short == 0,
        letters_ok=used <= p.n, density_ok=v_dens == 0,
        c_ok=(c_meas <= c_theory) if p.n > n0 else None,
    )
    problems = [name for name, ok in [("letters", rep.letters_ok), ("density", rep.density_ok),
                                      ("constant", rep.c_ok is not False)] if not ok]
    if problems:
        msg = f"statistical checks failed for seed {p.seed}: {', '.join(problems)}"
        if strict:
            raise AssertionError(msg)
        warnings.warn(msg, stacklevel=2)
    return rep


@dataclass(frozen=True)
class NegCorrReport:
    outcomes: int
    p_t: Fraction
    p_t_given_s: Fraction | None
    p_not_t: Fraction
    p_not_t_given_not_s: Fraction | None
    empty_conditioning: bool
    empty_conditioning_c: bool

    @property
    def first_ok(self) -> bool:
        return self.p_t_given_s is None or self.p_t_given_s <= self.p_t

    @property
    def second_ok(self) -> bool:
        return self.p_not_t_given_not_s is None or self.p_not_t_given_not_s <= self.p_not_t

    @property
    def ok(self) -> bool:
        return self.first_ok and self.second_ok


def negcorr_exhaustive(sets: Sequence[Iterable], t, S: Iterable) -> NegCorrReport:
    """Exact check that "x is never picked" events are negatively correlated.

    One element is drawn uniformly from each set. ``U_x`` is the event that
    ``x`` is never drawn. Verifies ``P(U_t | all U_s) <= P(U_t)`` and
    ``P(not U_t | all not U_s) <= P(not U_t)`` over ``s`` in ``S`` by
    enumerating every outcome. Conditioning on an impossible event is
    reported as vacuous (``None``).
    """
    sets = [tuple(dict.fromkeys(A)) for A in sets]
    S = set(S)
    if t in S:
        raise ValueError("t must not be in S")
    total = math.prod(len(A) for A in sets)
    if total > ENUM_LIMIT:
        raise ParamsError(f"{total} outcomes exceed the enumeration limit {ENUM_LIMIT}")
    n_t = n_s = n_ts = n_ns = n_nt_ns = 0
    for pick in itertools.product(*sets):
        picked = set(pick)
        ut = t not in picked
        all_us = not (S & picked)
        all_not_us = S <= picked
        n_t += ut
        n_s += all_us
        n_ts += ut and all_us
        n_ns += all_not_us
        n_nt_ns += (not ut) and all_not_us
    return NegCorrReport(
        outcomes=total,
        p_t=Fraction(n_t, total),
        p_t_given_s=Fraction(n_ts, n_s) if n_s else None,
        p_not_t=Fraction(total - n_t, total),
        p_not_t_given_not_s=Fraction(n_nt_ns, n_ns) if n_ns else None,
        empty_conditioning=n_s == 0,
        empty_conditioning_c=n_ns == 0,
    )
