"""Generate-and-backtrack search with LM-predicted word domains.

The loop grows the sentence one variable at a time: create a variable, fill
its domain from the language model, filter it against the constraints, order
it, snapshot, assign, and test the solution predicate.  Dead ends backtrack
chronologically; an optional jump-back target forces later solutions to
diverge early.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

from . import constraints as cst
from .lm import TransportError, perplexity, predicts_period
from .model import Domain, SearchStats, SolutionRecord, SolverModel, render_sentence


class SearchAborted(RuntimeError):
    """The backend failed mid-search; carries whatever was found so far."""

    def __init__(self, message, solutions=(), stats=None):
        super().__init__(message)
        self.solutions = list(solutions)
        self.stats = stats


@dataclass(frozen=True)
class Ordering:
    """How a freshly created domain is ordered before values are tried.

    ``probability`` keeps the backend ranking.  ``ppl`` sorts by ascending
    perplexity of the extended prefix.  ``char-target`` tries longer words
    first for variables before ``pivot`` and shorter words first from the
    pivot on, which steers exact-character tasks toward their target length.
    """

    kind: str
    pivot: int = 10

    def __post_init__(self):
        if self.kind not in ("probability", "ppl", "char-target"):
            raise ValueError(f"unknown ordering {self.kind!r}")
        if self.pivot < 1:
            raise ValueError("pivot must be >= 1")


def parse_ordering(name):
    """Parse "probability", "ppl", "char-target" or "char-target:<pivot>"."""
    if name in ("probability", "ppl"):
        return Ordering(name)
    if name == "char-target":
        return Ordering("char-target")
    if name.startswith("char-target:"):
        return Ordering("char-target", int(name.split(":", 1)[1]))
    raise ValueError(
        f"unknown ordering {name!r}; expected probability, ppl or char-target[:pivot]"
    )


def order_candidates(candidates, ordering, var_index, partial, lm, params):
    """Apply an ordering strategy; ties always break lexicographically."""
    candidates = list(candidates)
    if ordering.kind == "probability":
        return candidates
    if ordering.kind == "ppl":
        return sorted(
            candidates,
            key=lambda c: (perplexity(lm, list(partial) + [c.text], params), c.text),
        )
    if var_index < ordering.pivot:
        return sorted(candidates, key=lambda c: (-len(c.text), c.text))
    return sorted(candidates, key=lambda c: (len(c.text), c.text))


@dataclass(frozen=True)
class SolveOptions:
    """Run-level knobs; ordering/backtrack_to default to the task's own."""

    max_solutions: int | None = None
    time_budget: float | None = None
    ordering: Ordering | None = None
    backtrack_to: int | None = None
    max_variables: int = 64

    def __post_init__(self):
        if self.max_solutions is not None and self.max_solutions < 1:
            raise ValueError("max_solutions must be >= 1")
        if self.max_variables < 1:
            raise ValueError("max_variables must be >= 1")


def generate_variable(model):
    """Append the next sentence-position variable with an empty domain."""
    return model.add_variable()


def generate_domain(model, lm, task):
    """Fill the newest variable with the first k valid predictions."""
    params = task.lm_params
    raw = lm.predict(model.current_sentence(), params)
    valid = [c for c in cst.only_words(raw) if cst.word_valid(c.text, task.constraints)]
    model.variables[-1].domain = Domain(valid[: params.k])
    model.stats.lm_calls += 1
    return model.variables[-1].domain


def generate_constraints(model, task):
    """Scope the task constraints to the newest variable and filter its domain."""
    var = model.variables[-1]
    partial = model.assigned_words()
    for c in task.constraints:
        model.constraints.append((var.index, c))
    var.domain = cst.filter_domain(partial, var.domain, task.constraints, task)
    return var.domain


def apply_helping(model, task, ordering, lm):
    """Order the newest unassigned domain (implicit-constraint handling)."""
    if not model.variables:
        return
    var = model.variables[-1]
    if var.domain.cursor is not None:
        return
    partial = model.assigned_words()
    var.domain = Domain(
        order_candidates(var.domain.values, ordering, var.index, partial, lm, task.lm_params)
    )


def propagate(model, task):
    """Re-filter the newest domain and assign its first remaining value.

    A variable whose value was already chosen by a backtrack is left alone:
    its domain was filtered against the same prefix when it was created.
    """
    if not model.variables:
        return
    var = model.variables[-1]
    if var.domain.cursor is not None:
        return
    partial = model.assigned_words()
    var.domain = cst.filter_domain(partial, var.domain, task.constraints, task)
    if var.domain.values:
        var.domain.cursor = 0


def is_solution(model, lm, task):
    """Solution predicate: all constraints hold and the LM signals end of sentence."""
    if not model.variables:
        return False
    words = model.assigned_words()
    if len(words) != len(model.variables):
        return False
    final = words + ["."] if task.require_period else list(words)
    if not cst.check_complete(final, task):
        return False
    if task.require_period and not predicts_period(lm, render_sentence(words), task.lm_params):
        return False
    return True


@dataclass
class SearchOutcome:
    solutions: list
    stats: SearchStats


def run_search(task, lm, options=None, exhaustive=False):
    """Run the search loop; returns solutions plus the search counters.

    ``exhaustive`` disables the solution cap and the jump-back target so the
    whole k-truncated tree is enumerated.
    """
    opts = options if options is not None else SolveOptions()
    if opts.max_variables < len(task.seed) + 1:
        raise ValueError("max_variables must exceed the seed length")
    ordering = opts.ordering if opts.ordering is not None else parse_ordering(task.ordering)
    if exhaustive:
        max_solutions = None
        jump_to = None
    else:
        max_solutions = opts.max_solutions
        jump_to = opts.backtrack_to if opts.backtrack_to is not None else task.backtrack_to

    model = SolverModel.from_seed(task.seed)
    solutions = []
    seen = set()
    started = time.perf_counter()

    def out_of_budget():
        return opts.time_budget is not None and time.perf_counter() - started > opts.time_budget

    state = "help" if model.variables else "generate"
    try:
        while not out_of_budget():
            if state == "generate":
                words = model.assigned_words()
                if len(model.variables) >= opts.max_variables or not cst.can_extend(
                    words, task.constraints
                ):
                    state = "backtrack"
                    continue
                generate_variable(model)
                generate_domain(model, lm, task)
                generate_constraints(model, task)
                state = "help"
            elif state == "help":
                apply_helping(model, task, ordering, lm)
                state = "backtrack" if model.contains_empty_variable() else "save"
            elif state == "save":
                model.save_state()
                state = "propagate"
            elif state == "propagate":
                propagate(model, task)
                state = "backtrack" if model.contains_empty_variable() else "check"
            elif state == "check":
                if not is_solution(model, lm, task):
                    state = "generate"
                    continue
                record = _record_solution(model, lm, task, started)
                if record.sentence not in seen:
                    seen.add(record.sentence)
                    solutions.append(record)
                if max_solutions is not None and len(solutions) >= max_solutions:
                    break
                if jump_to is not None and 1 <= jump_to < len(model.variables):
                    moved = model.backtrack_to(jump_to)
                else:
                    moved = model.backtrack()
                if not moved:
                    break
                state = "save"
            else:  # backtrack
                if not model.backtrack():
                    break
                state = "save"
    except TransportError as exc:
        raise SearchAborted(str(exc), solutions, model.stats) from exc
    return SearchOutcome(solutions=solutions, stats=model.stats)


def _record_solution(model, lm, task, started):
    words = model.assigned_words()
    if task.require_period:
        words = words + ["."]
    return SolutionRecord(
        words=tuple(words),
        sentence=render_sentence(words),
        ppl=perplexity(lm, words, task.lm_params),
        discovered_at=time.perf_counter() - started,
    )


def solve(task, lm, options=None):
    """Solutions in discovery order, stopping at the configured caps."""
    return run_search(task, lm, options).solutions


def solve_all(task, lm, options=None):
    """Every distinct solution in the k-truncated tree (chronological backtracking only)."""
    return run_search(task, lm, options, exhaustive=True).solutions
