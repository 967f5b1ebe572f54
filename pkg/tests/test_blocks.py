from __future__ import annotations

import itertools
import math
import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fliplab.blocks import (
    Block,
    EnumerationLimitError,
    block_profiles,
    check_critical_rank,
    densest_block,
    enumerate_critical_blocks,
    find_critical_block,
    is_critical,
    is_dense,
    surplus,
)
from fliplab.experiments import critical_census
from fliplab.movealg import MoveSeq, revisits_state
from fliplab.sparsewords import SparseWordParams, build_sparse_word


def _dense(letters, beta):
    return len(letters) >= (1 + Fraction(beta)) * len(set(letters))


def _critical_brute(letters, beta=1):
    ell = len(letters)
    if not _dense(letters, beta):
        return False
    subs = [letters[i:j] for i in range(ell) for j in range(i + 1, ell + 1) if (i, j) != (0, ell)]
    return not any(_dense(b, beta) for b in subs)


def _canonical(word):
    relabel = {}
    return tuple(relabel.setdefault(c, len(relabel)) for c in word)


def test_is_critical_examples():
    assert is_critical([0, 1, 2, 0, 1, 2])
    word = (0, 1, 2, 0, 1, 2)
    strict = [word[i:j] for i in range(6) for j in range(i + 1, 7) if (i, j) != (0, 6)]
    assert len(strict) == 20 and not any(_dense(b, 1) for b in strict)
    assert is_critical([0, 0])
    assert revisits_state([0, 0])
    assert not is_critical([3, 1, 4, 0])
    assert not is_critical([0, 1, 0, 1, 0, 1])  # (0,1,0,1) is already dense


@settings(max_examples=300, deadline=None)
@given(st.lists(st.integers(0, 3), min_size=1, max_size=9), st.sampled_from([Fraction(1), Fraction(1, 2), Fraction(2)]))
def test_is_critical_matches_brute_force(word, beta):
    assert is_critical(word, beta) == _critical_brute(tuple(word), beta)
    assert is_dense(word, beta) == _dense(word, beta)


def test_block_object():
    b = Block([5, 0, 1, 2, 0, 1, 2, 7], 2, 7)
    assert b.letters == (0, 1, 2, 0, 1, 2) and len(b) == 6
    assert is_critical(b)
    with pytest.raises(ValueError):
        Block([1, 2], 2, 3)
    with pytest.raises(ValueError):
        Block([1, 2], 1, 2, beta=0)


def test_find_critical_block_random():
    rng = random.Random(0)
    for _ in range(400):
        n = rng.randint(2, 8)
        beta = rng.choice([Fraction(1), Fraction(1, 3), Fraction(3, 2)])
        word = tuple(rng.randrange(n) for _ in range(2 * n))
        b = find_critical_block(word, beta)
        any_dense = any(_dense(word[i:j], beta) for i in range(len(word)) for j in range(i + 1, len(word) + 1))
        assert (b is not None) == any_dense
        if b is not None:
            assert _critical_brute(b.letters, beta)
            assert len(b) == math.ceil((1 + beta) * len(set(b.letters)))
        if _dense(word, beta):
            assert b is not None


def test_find_critical_block_none_for_distinct():
    assert find_critical_block(list(range(12))) is None
    seq = MoveSeq.from_moves([0, 1, 2, 0, 1, 2], n=5)
    assert find_critical_block(seq).letters == (0, 1, 2, 0, 1, 2)


@pytest.mark.parametrize("s", [1, 2, 3, 4])
def test_enumeration_matches_brute_force(s):
    ell = 2 * s
    brute = set()
    for word in itertools.product(range(s), repeat=ell):
        if len(set(word)) == s and word == _canonical(word) and _critical_brute(word):
            brute.add(word)
    got = enumerate_critical_blocks(s, include_revisiting=True)
    assert set(got) == brute and len(got) == len(brute)
    kept = enumerate_critical_blocks(s)
    assert set(kept) == {w for w in brute if not revisits_state(w)}


def test_enumeration_fractional_beta():
    beta = Fraction(1, 2)
    got = set(enumerate_critical_blocks(3, beta, include_revisiting=True))
    ell = math.ceil(Fraction(3, 2) * 3)
    brute = {w for w in itertools.product(range(3), repeat=ell)
             if len(set(w)) == 3 and w == _canonical(w) and _critical_brute(w, beta)}
    assert got == brute


def test_enumeration_small_s_facts():
    assert enumerate_critical_blocks(1) == []
    assert enumerate_critical_blocks(2) == []
    three = enumerate_critical_blocks(3)
    assert three
    assert all(check_critical_rank(w).rank == 6 for w in three)
    ranks = {check_critical_rank(w).rank for w in enumerate_critical_blocks(4)}
    assert ranks == {7, 8}


def test_enumeration_limit():
    with pytest.raises(EnumerationLimitError):
        enumerate_critical_blocks(7)
    with pytest.raises(ValueError):
        enumerate_critical_blocks(0)


def test_census_regression_counts():
    res = critical_census(5)
    assert res["ok"]
    counts = {s: v["count"] for s, v in res["per_s"].items()}
    assert counts == {1: 0, 2: 0, 3: 4, 4: 94, 5: 2448}
    assert res["per_s"][4]["ranks"] == {7: 2, 8: 92}
    for line in res["blocks"]:
        assert line["rank"] >= math.ceil(Fraction(5, 4) * line["s"])


@pytest.mark.slow
def test_census_s6():
    res = critical_census(6)
    assert res["bounds_ok"]
    assert res["per_s"][6]["count"] == 76134
    assert min(res["per_s"][6]["ranks"]) >= math.ceil(Fraction(5, 4) * 6)


def test_check_critical_rank_not_applicable():
    rep = check_critical_rank([0, 0])
    assert rep.critical and not rep.applicable and rep.rank is None and rep.ok
    rep = check_critical_rank(MoveSeq.from_moves([0, 1, 2, 0, 1, 2], n=3))
    assert not rep.applicable


def test_check_critical_rank_bounds():
    rep = check_critical_rank([0, 1, 2, 0, 1, 2])
    assert rep.s1 == 0 and rep.s2 == 3
    assert rep.bound_corollary == Fraction(9, 2)
    assert rep.bound_convex == Fraction(15, 4)
    assert not rep.applicable  # every letter moves twice: back to the start
    rep = check_critical_rank([0, 1, 0, 2, 0, 1])
    assert (rep.s1, rep.s2) == (1, 2)
    assert rep.bound_corollary == 3 + max(Fraction(1, 2), Fraction(1))
    assert rep.rank == 6 and rep.ok and rep.applicable


def _naive_profile(word):
    out = {}
    for i in range(len(word)):
        for j in range(i, len(word)):
            vals, counts = np.unique(np.asarray(word[i : j + 1]), return_counts=True)
            out[(i, j)] = (vals.size, int(np.count_nonzero(counts >= 2)))
    return out


def test_block_profiles_against_recount():
    rng = np.random.default_rng(1)
    word = rng.integers(0, 6, 40)
    ref = _naive_profile(word.tolist())
    for i, s, s2 in block_profiles(word):
        for k in range(s.shape[0]):
            assert (int(s[k]), int(s2[k])) == ref[(i, i + k)]


def _naive_densest(word):
    best = None
    for (i, j), (_, s2) in _naive_profile(word).items():
        key = (Fraction(s2, j - i + 1), -(j - i), -i)
        if best is None or key > best[0]:
            best = (key, i, j, s2)
    return best[1] + 1, best[2] + 1, best[3]


def test_densest_block_examples():
    n = 16
    word = list(range(n)) * 2
    res = densest_block(word, n)
    assert res.ratio == Fraction(1, 2) and res.holds and res.applicable
    assert res.bound == pytest.approx(1 / (2 * math.log2(n)))
    flat = densest_block(list(range(10)), 10)
    assert flat.ratio == 0 and flat.bound is None and flat.holds is None


def test_densest_block_matches_naive_on_sparse_word():
    p = SparseWordParams(2.0, 150, 3, 8, 2, seed=4)
    word = build_sparse_word(p)
    res = densest_block(word.letters, p.n)
    i, j, s2 = _naive_densest(word.letters.tolist())
    assert (res.i, res.j, res.s2) == (i, j, s2)


def test_densest_block_exempt_over_budget():
    # more distinct letters than n: the bound is reported but not enforced
    res = densest_block(list(range(10)), 4)
    assert res.bound is not None and not res.applicable and res.holds is False


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(0, 6), min_size=2, max_size=30), st.data())
def test_surplus_concatenation(word, data):
    cut = data.draw(st.integers(1, len(word) - 1))
    a, b = word[:cut], word[cut:]
    s2_whole = sum(1 for c in set(word) if word.count(c) >= 2)
    assert surplus(word) <= surplus(a) + surplus(b) + s2_whole


def test_densest_bound_holds_exhaustively_small():
    """Every word over at most n letters with length 2n, n <= 4, meets the bound."""
    for n in (2, 3, 4):
        for word in itertools.product(range(n), repeat=2 * n):
            if word == _canonical(word):
                res = densest_block(word, n)
                assert res.holds
