"""Batch drivers behind the command-line tool: sweeps, audits and censuses."""

from __future__ import annotations

import datetime as _dt
import os
import random
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

import numpy as np

from . import __version__
from .blocks import check_critical_rank, enumerate_critical_blocks
from .dynamics import flip_run, hunt_slow_sequences, random_spins
from .movealg import MoveSeq, audit_rank_bounds, revisits_state
from .weights import WeightModel, rng_for, sample_weights


def make_manifest(config: dict, seed: int, command: Sequence[str] | None = None) -> dict:
    return {
        "command": list(sys.argv if command is None else command),
        "config": config,
        "master_seed": seed,
        "version": __version__,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }


@dataclass(frozen=True)
class RunRecord:
    n: int
    seed: int
    trial: int
    model: str
    phi: float
    rule: str
    steps: int
    final_h: float
    wall_time_ns: int
    terminated: str


def initial_spins(seed: int, trial: int, n: int) -> np.ndarray:
    return random_spins(n, rng_for(seed, trial, n, 1))


def run_trial(model: WeightModel, n: int, trial: int, rule: str, step_cap: int) -> RunRecord:
    """One FLIP run; weights, start and pivot randomness are all keyed by (seed, trial, n)."""
    seed = model.master_seed
    w = sample_weights(model, n, trial)
    s0 = initial_spins(seed, trial, n)
    t0 = time.perf_counter_ns()
    tr = flip_run(w, s0, rule, step_cap, seed=rng_for(seed, trial, n, 2))
    dt = time.perf_counter_ns() - t0
    return RunRecord(n, seed, trial, model.kind, float(model.phi), rule, tr.steps, tr.final_h, dt, tr.terminated)


def _run_trial_args(args):
    return run_trial(*args)


def run_sweep(model: WeightModel, ns: Iterable[int], trials: int, rules: Iterable[str],
              step_cap: int = 10**9, jobs: int = 1) -> list[RunRecord]:
    """All (n, trial, rule) combinations, sorted by (n, trial, rule order)."""
    rules = list(rules)
    tasks = [(model, n, t, r, step_cap) for n in ns for t in range(trials) for r in rules]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            recs = list(ex.map(_run_trial_args, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        recs = [run_trial(*t) for t in tasks]
    return sorted(recs, key=lambda r: (r.n, r.trial, rules.index(r.rule)))


def random_sequence(rng: random.Random, n_max: int = 12, ell_max: int = 24,
                    avoid_revisits: bool = True) -> MoveSeq:
    """Random move list with uneven letter frequencies.

    With ``avoid_revisits`` each next letter is drawn only among letters that
    keep every prefix parity new, so the result never revisits a state (it
    may stop early if no letter qualifies).
    """
    n = rng.randint(2, n_max)
    k = rng.randint(1, n) if rng.random() < 0.15 else rng.randint(1, n - 1)
    alphabet = rng.sample(range(n), k)
    weights = [rng.random() ** 3 + 1e-3 for _ in alphabet]
    target = rng.randint(1, ell_max)
    moves: list[int] = []
    parity, seen = 0, {0}
    while len(moves) < target:
        if avoid_revisits:
            ok = [(v, wt) for v, wt in zip(alphabet, weights) if parity ^ (1 << v) not in seen]
            if not ok:
                break
            v = rng.choices([v for v, _ in ok], [wt for _, wt in ok])[0]
        else:
            v = rng.choices(alphabet, weights)[0]
        parity ^= 1 << v
        seen.add(parity)
        moves.append(v)
    sigma0 = [rng.choice((-1, 1)) for _ in range(n)]
    return MoveSeq(n, sigma0, moves)


def rank_audit(count: int, seed: int, n_max: int = 12, ell_max: int = 24,
               include_revisiting: bool = False, keep_failures: int = 20) -> dict:
    """Audit the three rank bounds on ``count`` random sequences.

    With ``include_revisiting`` the generator is unconstrained and sequences
    that revisit a state are skipped and counted.
    """
    rng = random.Random(seed)
    viol = {"i": 0, "ii": 0, "iii": 0}
    applicable = {"i": 0, "ii": 0, "iii": 0}
    skipped = audited = 0
    failures = []
    for _ in range(count):
        seq = random_sequence(rng, n_max, ell_max, avoid_revisits=not include_revisiting)
        if revisits_state(seq):
            skipped += 1
            continue
        rep = audit_rank_bounds(seq)
        audited += 1
        for part, passed in (("i", rep.pass_i), ("ii", rep.pass_ii), ("iii", rep.pass_iii)):
            if passed is not None:
                applicable[part] += 1
                if not passed:
                    viol[part] += 1
        if not rep.ok and len(failures) < keep_failures:
            failures.append({"seq": seq.to_dict(), "audit": rep.to_dict()})
    return {"generated": count, "audited": audited, "skipped_revisiting": skipped,
            "applicable": applicable, "violations": viol, "failures": failures}


def critical_census(s_max: int, beta=1) -> dict:
    """Enumerate critical blocks for s = 1..s_max and check their ranks.

    For beta = 1 also evaluates the small-s facts: no blocks for s in {1, 2},
    rank 6 for s = 3, ranks {7, 8} (both occurring) for s = 4.
    """
    per_s = {}
    lines = []
    all_ok = True
    for s in range(1, s_max + 1):
        with_revisits = enumerate_critical_blocks(s, beta, include_revisiting=True)
        words = [w for w in with_revisits if not revisits_state(w)]
        ranks: dict[int, int] = {}
        for w in words:
            rep = check_critical_rank(w, beta)
            all_ok &= rep.ok and rep.applicable
            ranks[rep.rank] = ranks.get(rep.rank, 0) + 1
            lines.append({"moves": list(w), "s": rep.s, "s1": rep.s1, "s2": rep.s2, "rank": rep.rank,
                          "critical": rep.critical})
        per_s[s] = {"count": len(words), "excluded_revisiting": len(with_revisits) - len(words),
                    "ranks": dict(sorted(ranks.items()))}
    facts = {}
    if beta == 1:
        if s_max >= 1:
            facts["no_blocks_s1"] = per_s[1]["count"] == 0
        if s_max >= 2:
            facts["no_blocks_s2"] = per_s[2]["count"] == 0
        if s_max >= 3:
            facts["s3_rank_6"] = per_s[3]["count"] > 0 and set(per_s[3]["ranks"]) == {6}
        if s_max >= 4:
            facts["s4_rank_7_or_8"] = set(per_s[4]["ranks"]) == {7, 8}
    return {"per_s": per_s, "bounds_ok": all_ok, "facts": facts, "blocks": lines,
            "ok": all_ok and all(facts.values())}


def hunt_sweep(model: WeightModel, n: int, eps_list: Sequence[float], target_len: int, draws: int,
               cap: int = 8) -> dict:
    results = []
    found = {str(e): 0 for e in eps_list}
    for d in range(draws):
        w = sample_weights(model, n, d)
        for e in eps_list:
            wit = hunt_slow_sequences(w, e, target_len, cap=cap)
            results.append({"draw": d, "eps": e, "found": wit is not None,
                            "witness": None if wit is None else wit.to_dict()})
            found[str(e)] += wit is not None
    return {"n": n, "target_len": target_len, "draws": draws,
            "fraction_found": {e: c / draws for e, c in found.items()}, "results": results}


def default_jobs() -> int:
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)


def record_dict(r: RunRecord) -> dict:
    return asdict(r)
