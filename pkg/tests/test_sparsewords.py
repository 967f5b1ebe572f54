from __future__ import annotations

import itertools
import math
import random
import warnings
from fractions import Fraction

import mpmath
import numpy as np
import pytest

from fliplab.sparsewords import (
    ParamsError,
    SparseWordParams,
    build_sparse_word,
    derive_params,
    load_word_letters,
    negcorr_exhaustive,
    repeated_letter,
    round_half_up,
    scan_word,
    stage_fill_probability,
)


def test_round_half_up():
    assert [round_half_up(x) for x in (2.5, 3.5, 2.49, -0.5, 8.317)] == [3, 4, 2, 0, 8]


def test_derive_params_example():
    p = derive_params(2, 4096)
    assert (p.b0, p.b1, p.gamma, p.ell) == (8, 64, 3, 8192)
    assert p.pool_size == 112 and p.short_block == 24


def test_gamma_nonincreasing_in_a():
    for n in (2**12, 2**16, 2**20):
        gs = []
        for a in np.linspace(1.05, 8, 40):
            try:
                gs.append(derive_params(float(a), n).gamma)
            except ParamsError:
                gs.append(0)
        assert all(x >= y for x, y in zip(gs, gs[1:]))


def test_b0_over_b1_shrinks():
    r = [derive_params(2, n).b0 / derive_params(2, n).b1 for n in (2**10, 2**14, 2**18)]
    assert r[0] > r[1] > r[2]


def test_params_errors():
    with pytest.raises(ParamsError):
        derive_params(1.0, 4096)
    with pytest.raises(ParamsError):
        derive_params(100, 16)
    with pytest.raises(ParamsError):
        SparseWordParams(2, 100, 5, 4, 2)
    with pytest.raises(ParamsError):
        SparseWordParams(2, 100, 2, 4, 0)


def test_repeated_letter_ids():
    assert repeated_letter(8, 0, 8) == 0
    assert repeated_letter(8, 1, 8) == 1
    assert repeated_letter(10, 4, 8) == 4


def _occurrences(letters):
    pos = {}
    for t, c in enumerate(letters.tolist()):
        pos.setdefault(c, []).append(t)
    return pos


@pytest.mark.parametrize("seed", range(5))
def test_gap_law_and_pool(seed):
    p = derive_params(2, 4096, seed)
    w = build_sparse_word(p)
    assert len(w) == p.ell
    assert np.all(w.letters[w.stage_one] < p.pool_size)
    fresh = w.letters[~w.stage_one]
    assert np.all(fresh >= p.pool_size) and np.unique(fresh).size == fresh.size
    for c, pos in _occurrences(w.letters).items():
        if c >= p.pool_size:
            continue
        i = p.b0 + c // 2
        assert all(b - a >= p.gamma * i for a, b in zip(pos, pos[1:]))
        # each occurrence sits in a chunk of the right parity
        assert all((t // (p.gamma * i)) % 2 == c % 2 for t in pos)


def test_overwrite_last_writer_wins():
    p = SparseWordParams(2, 200, 3, 9, 2, seed=7)
    w = build_sparse_word(p)
    # replay stage one independently, lowest index first
    from fliplab.weights import rng_for

    ref = np.full(p.ell, -1)
    for i in range(p.b0, p.b1):
        size = p.gamma * i
        chunks = -(-p.ell // size)
        offs = rng_for(p.seed, i).integers(0, size, size=chunks)
        for k in range(chunks):
            t = k * size + int(offs[k])
            if t < p.ell:
                ref[t] = 2 * (i - p.b0) + (k % 2)
    assert np.array_equal(ref >= 0, w.stage_one)
    assert np.array_equal(ref[ref >= 0], w.letters[w.stage_one])


def test_truncation_soundness():
    base = derive_params(2, 4096, 3)
    long = build_sparse_word(base)
    for ell in (1, 100, 1000, 5000):
        short = build_sparse_word(SparseWordParams(base.a, base.n, base.b0, base.b1, base.gamma, base.seed, ell))
        assert np.array_equal(short.stage_one, long.stage_one[:ell])
        assert np.array_equal(short.letters[short.stage_one], long.letters[:ell][long.stage_one[:ell]])


def test_determinism_and_degenerate():
    p = derive_params(2, 1024, 11)
    assert build_sparse_word(p) == build_sparse_word(p)
    assert build_sparse_word(p) != build_sparse_word(derive_params(2, 1024, 12))
    flat = build_sparse_word(SparseWordParams(2, 256, 4, 4, 2))
    assert not flat.stage_one.any() and np.unique(flat.letters).size == len(flat)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rep = scan_word(flat)
    assert rep.max_s2_over_s == 0 and rep.deterministic_ok


def test_empty_fraction_concentrates_near_d():
    p = derive_params(2, 4096)
    d = float(stage_fill_probability(p).d)
    fr = [1 - build_sparse_word(SparseWordParams(2, 4096, p.b0, p.b1, p.gamma, s)).stage_one.mean() for s in range(20)]
    sd = math.sqrt(d * (1 - d) / p.ell)
    assert abs(np.mean(fr) - d) < 3 * sd
    assert all(abs(f - d) < 6 * sd for f in fr)


def test_word_file_roundtrip(tmp_path):
    p = derive_params(2, 1024, 2)
    w = build_sparse_word(p)
    f = tmp_path / "w.txt"
    w.save(f, run="x")
    head = f.read_text().splitlines()[0]
    assert head.startswith("# fliplab word v1") and "b0=7" in head and "seed=2" in head and "run=x" in head
    assert np.array_equal(load_word_letters(f), w.letters)
    assert w.letter_name(0) == "7" and w.letter_name(1) == "7'" and w.letter_name(p.pool_size) == "u0"


def test_fill_probability_example():
    f = stage_fill_probability((2, 4, 2))
    assert f.d == Fraction(5, 8)
    assert float(f.lower) == pytest.approx(0.5773502691896258, abs=1e-15)
    assert float(f.upper) == pytest.approx(0.7071067811865476, abs=1e-15)
    assert f.ok


def test_fill_probability_gamma_limit():
    prev = None
    for g in (1, 10, 100, 10000):
        f = stage_fill_probability((3, 9, g))
        assert f.ok
        if prev is not None:
            assert f.d > prev
        prev = f.d
    assert float(prev) > 0.999 and float(f.lower) > 0.999


def test_fill_probability_trend_to_limit():
    ds = [float(stage_fill_probability(derive_params(2, n)).d) for n in (2**12, 2**16, 2**20)]
    assert ds[0] > ds[1] > ds[2] > 0.25
    assert all(stage_fill_probability(derive_params(2, n)).ok for n in (2**12, 2**16, 2**20))


def test_fill_probability_high_precision():
    rng = random.Random(3)
    for _ in range(50):
        b0 = rng.randint(2, 30)
        b1 = rng.randint(b0 + 1, 200)
        g = rng.randint(1, 8)
        f = stage_fill_probability((b0, b1, g), dps=40)
        with mpmath.workdps(40):
            d = mpmath.mpf(f.d.numerator) / f.d.denominator
            assert f.lower <= d <= f.upper
        assert f.ok


def test_scan_small_word_matches_naive():
    p = SparseWordParams(2.0, 120, 3, 8, 2, seed=1)
    w = build_sparse_word(p)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rep = scan_word(w)
    letters = w.letters.tolist()
    d = float(stage_fill_probability(p).d)
    best = 0.0
    v_s2 = v_short = v_dens = 0
    for i in range(len(letters)):
        for j in range(i + 1, len(letters) + 1):
            blk = letters[i:j]
            counts = {c: blk.count(c) for c in set(blk)}
            s, s2 = len(counts), sum(1 for x in counts.values() if x >= 2)
            ell = j - i
            best = max(best, s2 / s)
            v_s2 += s2 * p.gamma > 2 * ell
            v_short += ell <= p.short_block and s2 > 0
            v_dens += ell > p.short_block and s < d * ell / 2
    assert rep.max_s2_over_s == pytest.approx(best, abs=1e-15)
    assert (rep.s2_bound_violations, rep.short_block_violations, rep.density_violations) == (v_s2, v_short, v_dens)


def test_scan_strict_raises_on_letters():
    p = SparseWordParams(2, 256, 4, 4, 2)
    with pytest.raises(AssertionError):
        scan_word(build_sparse_word(p), strict=True)
    with pytest.warns(UserWarning):
        scan_word(build_sparse_word(p))
    with pytest.raises(ValueError):
        scan_word([0, 1, 2])


def test_negcorr_example():
    rep = negcorr_exhaustive([{1, 2}, {1, 2, 3}], 1, {2})
    assert rep.outcomes == 6
    # U_1: 1 never picked: (2,2),(2,3) -> 2/6
    assert rep.p_t == Fraction(1, 3)
    # U_2 holds for (1,1),(1,3); U_1 holds in neither
    assert rep.p_t_given_s == 0
    assert rep.p_not_t == Fraction(2, 3)
    # not U_2: (1,2),(2,1),(2,2),(2,3); 1 picked in (1,2),(2,1)
    assert rep.p_not_t_given_not_s == Fraction(1, 2)
    assert rep.ok


def test_negcorr_empty_S():
    rep = negcorr_exhaustive([{1, 2}, {2, 3}], 2, set())
    assert rep.p_t_given_s == rep.p_t and rep.p_not_t_given_not_s == rep.p_not_t


def test_negcorr_vacuous_and_limits():
    rep = negcorr_exhaustive([{1}], 2, {1})
    assert rep.empty_conditioning and rep.p_t_given_s is None and rep.ok
    with pytest.raises(ValueError):
        negcorr_exhaustive([{1, 2}], 1, {1})
    with pytest.raises(ParamsError):
        negcorr_exhaustive([range(40)] * 5, 0, {1})


def _negcorr_brute(sets, t, S):
    outs = list(itertools.product(*sets))
    ut = [t not in o for o in outs]
    us = [not (set(S) & set(o)) for o in outs]
    nus = [set(S) <= set(o) for o in outs]
    p_t = Fraction(sum(ut), len(outs))
    ok1 = not any(us) or Fraction(sum(a and b for a, b in zip(ut, us)), sum(us)) <= p_t
    ok2 = not any(nus) or Fraction(sum((not a) and b for a, b in zip(ut, nus)), sum(nus)) <= 1 - p_t
    return ok1, ok2


def test_negcorr_random_systems_match_brute():
    rng = random.Random(5)
    for _ in range(100):
        universe = list(range(1, 7))
        sets = [set(rng.sample(universe, rng.randint(1, 4))) for _ in range(rng.randint(1, 4))]
        t = rng.choice(universe)
        S = set(rng.sample([u for u in universe if u != t], rng.randint(0, 3)))
        rep = negcorr_exhaustive(sets, t, S)
        assert (rep.first_ok, rep.second_ok) == _negcorr_brute(sets, t, S) == (True, True)
