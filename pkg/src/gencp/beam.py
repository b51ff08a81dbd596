"""Width-k beam decoding under the same LM, constraints, and solution predicate.

Each step fetches up to k valid words per beam, pools the k*k extensions,
drops the ones that can no longer lead anywhere, and keeps the k highest by
cumulative log-probability.  A needed word ranked below the cut is gone for
good, which is exactly the failure mode the backtracking search avoids.
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass

from . import constraints as cst
from .lm import perplexity, predicts_period, sequence_logprob
from .model import SolutionRecord, render_prefix, render_sentence


class HaltingMode(enum.Enum):
    FIRST_SOLUTION = "first"
    ALL_SOLUTIONS = "all"


@dataclass
class Beam:
    """A candidate word sequence and its cumulative log-probability."""

    words: tuple
    cum_logprob: float
    alive: bool = True


def _structurally_complete(words, task):
    final = list(words) + ["."] if task.require_period else list(words)
    return cst.check_complete(final, task)


def expand_beams(beams, lm, task, k):
    """One decoding step over all beams.

    Returns (survivors, dead): the k best feasible extensions, and the input
    beams that had no feasible extension at all.  An extension is feasible
    when it can still grow or already is a finished sentence structurally.
    """
    params = task.lm_params
    extensions = []
    dead = []
    for beam in beams:
        raw = lm.predict(render_prefix(beam.words), params, k)
        valid = [c for c in cst.only_words(raw) if cst.word_valid(c.text, task.constraints)]
        kept_any = False
        for cand in valid[:k]:
            ext_words = beam.words + (cand.text,)
            if cst.can_extend(ext_words, task.constraints) or _structurally_complete(
                ext_words, task
            ):
                extensions.append(Beam(ext_words, beam.cum_logprob + cand.logprob))
                kept_any = True
        if not kept_any:
            beam.alive = False
            dead.append(beam)
    extensions.sort(key=lambda b: (-b.cum_logprob, render_sentence(b.words)))
    return extensions[:k], dead


def beam_search(task, lm, k=None, mode=HaltingMode.ALL_SOLUTIONS, time_budget=None, max_words=64):
    """Run beam decoding from the task seed.

    Returns (solutions, bad_outputs): solution records, and the rendered
    sentences of terminal beams that were not solutions (dead ends, leftovers
    at a first-solution halt, or beams alive when the budget ran out).
    """
    if k is None:
        k = task.lm_params.k
    if k < 1:
        raise ValueError("k must be >= 1")
    params = task.lm_params
    seed = tuple(task.seed)
    start_cum = sequence_logprob(lm, list(seed), params) if seed else 0.0
    beams = [Beam(seed, start_cum)]
    solutions = []
    bad_outputs = []
    started = time.perf_counter()

    while beams:
        if time_budget is not None and time.perf_counter() - started > time_budget:
            bad_outputs.extend(render_prefix(b.words) for b in beams)
            break
        survivors = []
        solved_now = False
        for beam in beams:
            if (
                _structurally_complete(beam.words, task)
                and beam.words
                and (
                    not task.require_period
                    or predicts_period(lm, render_sentence(beam.words), params)
                )
            ):
                solutions.append(_record(beam, task, lm, started))
                solved_now = True
            else:
                survivors.append(beam)
        if solved_now and mode is HaltingMode.FIRST_SOLUTION:
            for beam in survivors:
                beam.alive = False
                bad_outputs.append(render_prefix(beam.words))
            return solutions, bad_outputs
        overgrown = [b for b in survivors if len(b.words) >= max_words]
        for beam in overgrown:
            beam.alive = False
            bad_outputs.append(render_prefix(beam.words))
        survivors = [b for b in survivors if len(b.words) < max_words]
        beams, dead = expand_beams(survivors, lm, task, k)
        bad_outputs.extend(render_prefix(b.words) for b in dead)
    return solutions, bad_outputs


def _record(beam, task, lm, started):
    words = list(beam.words) + ["."] if task.require_period else list(beam.words)
    return SolutionRecord(
        words=tuple(words),
        sentence=render_sentence(words),
        ppl=perplexity(lm, words, task.lm_params),
        discovered_at=time.perf_counter() - started,
    )


def satisfaction_rate(solutions, bad_outputs):
    """Percentage of outputs that are solutions; None when there were none."""
    total = len(solutions) + len(bad_outputs)
    if total == 0:
        return None
    return 100.0 * len(solutions) / total
