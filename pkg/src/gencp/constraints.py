"""Declarative sentence constraints, word validity, and domain filtering.

Character counts are taken on the rendered sentence, spaces and the final
period included.  Word counts, per-word length limits, and positional pins
apply to content words only; the trailing period is not a word.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

from .lm import LMParams
from .model import Domain, render_prefix, render_sentence


@dataclass(frozen=True)
class CharCountExact:
    """Rendered sentence must have exactly n characters."""

    n: int

    def __post_init__(self):
        if self.n <= 0:
            raise ValueError("character count must be > 0")


@dataclass(frozen=True)
class WordCountRange:
    """Content word count must lie in [lo, hi]; hi None means unbounded."""

    lo: int
    hi: int | None = None

    def __post_init__(self):
        if self.lo < 1:
            raise ValueError("lo must be >= 1")
        if self.hi is not None and self.lo > self.hi:
            raise ValueError("lo must not exceed hi")


@dataclass(frozen=True)
class MaxWordLen:
    """Every content word is at most ``limit`` characters long."""

    limit: int

    def __post_init__(self):
        if self.limit < 1:
            raise ValueError("word length limit must be >= 1")


@dataclass(frozen=True)
class PositionLexical:
    """The word at a fixed 1-based position must equal ``word`` exactly."""

    position: int
    word: str

    def __post_init__(self):
        if self.position < 1:
            raise ValueError("position must be >= 1")
        if not self.word:
            raise ValueError("pinned word is empty")


@dataclass(frozen=True)
class MandatoryKeywords:
    """Each keyword must appear as a whole word (case-insensitive)."""

    words: frozenset

    def __init__(self, words):
        object.__setattr__(self, "words", frozenset(words))
        if not self.words:
            raise ValueError("keyword set is empty")


@dataclass(frozen=True)
class KeywordSeparation:
    """Any two keyword occurrences need >= min_gap words strictly between them."""

    words: frozenset
    min_gap: int

    def __init__(self, words, min_gap):
        object.__setattr__(self, "words", frozenset(words))
        object.__setattr__(self, "min_gap", min_gap)
        if not self.words:
            raise ValueError("keyword set is empty")
        if self.min_gap < 1:
            raise ValueError("min_gap must be >= 1")


@dataclass(frozen=True)
class ForbiddenChars:
    """No content word may contain any of these characters."""

    chars: frozenset

    def __init__(self, chars):
        object.__setattr__(self, "chars", frozenset(chars))
        if not self.chars:
            raise ValueError("forbidden character set is empty")


@dataclass(frozen=True)
class StartsWith:
    """The sentence must begin with these exact words."""

    prefix: tuple

    def __init__(self, prefix):
        object.__setattr__(self, "prefix", tuple(prefix))
        if not self.prefix:
            raise ValueError("prefix is empty")


@dataclass(frozen=True)
class TaskSpec:
    """One full problem instance: constraints, seed words, and LM settings."""

    name: str
    constraints: tuple
    seed: tuple = ()
    lm_params: LMParams = LMParams()
    require_period: bool = True
    ordering: str = "probability"
    backtrack_to: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "constraints", tuple(self.constraints))
        object.__setattr__(self, "seed", tuple(self.seed))
        for word in self.seed:
            if not word_valid(word, self.constraints):
                raise ValueError(f"seed word {word!r} violates the constraints")
        if self.backtrack_to is not None and self.backtrack_to < 1:
            raise ValueError("backtrack_to must be >= 1")


def word_valid(word, constraints):
    """Whether the word, taken on its own, violates no per-word constraint."""
    if not word:
        raise ValueError("empty word")
    for c in constraints:
        if isinstance(c, ForbiddenChars) and any(ch in c.chars for ch in word):
            return False
        if isinstance(c, MaxWordLen) and len(word) > c.limit:
            return False
    return True


def _looks_like_word(text):
    pieces = text.replace("'", "-").split("-")
    return all(piece and piece.isalpha() for piece in pieces)


def only_words(candidates, keep_period=False):
    """Drop sub-word fragments, symbols, and punctuation from a candidate list.

    A bare "." is kept only when the caller is scanning for end-of-sentence.
    """
    kept = []
    for cand in candidates:
        if cand.text == ".":
            if keep_period:
                kept.append(cand)
        elif _looks_like_word(cand.text):
            kept.append(cand)
    return kept


def _char_budget(constraints, require_period):
    budget = None
    for c in constraints:
        if isinstance(c, CharCountExact):
            n = c.n - (1 if require_period else 0)
            budget = n if budget is None else min(budget, n)
    return budget


def _word_count_hi(constraints):
    hi = None
    for c in constraints:
        if isinstance(c, WordCountRange) and c.hi is not None:
            hi = c.hi if hi is None else min(hi, c.hi)
    return hi


def _pinned_words(constraints, position):
    pins = []
    for c in constraints:
        if isinstance(c, PositionLexical) and c.position == position:
            pins.append(c.word)
        if isinstance(c, StartsWith) and position <= len(c.prefix):
            pins.append(c.prefix[position - 1])
    return pins


def _separation_conflict(partial, word, constraint):
    lowered = {w.casefold() for w in constraint.words}
    if word.casefold() not in lowered:
        return False
    position = len(partial) + 1
    for j, earlier in enumerate(partial, start=1):
        if earlier.casefold() in lowered and position - j - 1 < constraint.min_gap:
            return True
    return False


def filter_domain(partial, domain, constraints, task):
    """Drop candidates that cannot sit at position len(partial)+1.

    Removes words that are invalid on their own, overflow the character
    budget (one character stays reserved for the final period when the task
    requires one), contradict a positional pin, sit too close to another
    keyword, or exceed the word-count ceiling.  Survivor order is preserved.
    """
    partial = list(partial)
    position = len(partial) + 1
    pins = _pinned_words(constraints, position)
    budget = _char_budget(constraints, task.require_period)
    hi = _word_count_hi(constraints)
    current = domain.current()
    survivors = []
    for cand in domain.values:
        word = cand.text
        if not word_valid(word, constraints):
            continue
        if any(word != pin for pin in pins):
            continue
        if hi is not None and position > hi:
            continue
        if budget is not None and len(render_sentence(partial + [word])) > budget:
            continue
        if any(
            _separation_conflict(partial, word, c)
            for c in constraints
            if isinstance(c, KeywordSeparation)
        ):
            continue
        survivors.append(cand)
    cursor = None
    if current is not None and current in survivors:
        cursor = survivors.index(current)
    return Domain(survivors, cursor=cursor)


def can_extend(partial, constraints):
    """Whether some completion of the partial sentence could still satisfy everything.

    Conservative: never rejects a prefix that has a satisfying completion.
    """
    partial = list(partial)
    rendered_len = len(render_prefix(partial))
    hi = _word_count_hi(constraints)
    if hi is not None and len(partial) >= hi:
        return False
    missing = []
    char_cap = None
    for c in constraints:
        if isinstance(c, CharCountExact):
            char_cap = c.n if char_cap is None else min(char_cap, c.n)
            if rendered_len > c.n:
                return False
        elif isinstance(c, MaxWordLen):
            if any(len(w) > c.limit for w in partial):
                return False
        elif isinstance(c, ForbiddenChars):
            if any(ch in c.chars for w in partial for ch in w):
                return False
        elif isinstance(c, PositionLexical):
            if c.position <= len(partial) and partial[c.position - 1] != c.word:
                return False
        elif isinstance(c, StartsWith):
            if any(h != p for h, p in zip(partial, c.prefix)):
                return False
        elif isinstance(c, KeywordSeparation):
            lowered = {w.casefold() for w in c.words}
            hits = [j for j, w in enumerate(partial, start=1) if w.casefold() in lowered]
            if any(b - a - 1 < c.min_gap for a, b in zip(hits, hits[1:])):
                return False
        elif isinstance(c, MandatoryKeywords):
            present = {w.casefold() for w in partial}
            missing.extend(w for w in c.words if w.casefold() not in present)
    if missing:
        if hi is not None and len(partial) + len(missing) > hi:
            return False
        if char_cap is not None:
            needed = sum(len(w) + 1 for w in missing)
            if not partial:
                needed -= 1
            if rendered_len + needed > char_cap:
                return False
    return True


def check_complete(words, task):
    """Whether a finished word sequence satisfies every constraint of the task.

    ``words`` includes the trailing "." when the task requires one.
    """
    words = list(words)
    if not words:
        return False
    if task.require_period and words[-1] != ".":
        return False
    content = words[:-1] if words[-1] == "." else words
    if not content:
        return False
    sentence = render_sentence(words)
    for c in task.constraints:
        if isinstance(c, CharCountExact):
            if len(sentence) != c.n:
                return False
        elif isinstance(c, WordCountRange):
            if len(content) < c.lo or (c.hi is not None and len(content) > c.hi):
                return False
        elif isinstance(c, MaxWordLen):
            if any(len(w) > c.limit for w in content):
                return False
        elif isinstance(c, PositionLexical):
            if c.position > len(content) or content[c.position - 1] != c.word:
                return False
        elif isinstance(c, MandatoryKeywords):
            present = {w.casefold() for w in content}
            if any(w.casefold() not in present for w in c.words):
                return False
        elif isinstance(c, KeywordSeparation):
            lowered = {w.casefold() for w in c.words}
            hits = [j for j, w in enumerate(content, start=1) if w.casefold() in lowered]
            if any(b - a - 1 < c.min_gap for a, b in zip(hits, hits[1:])):
                return False
        elif isinstance(c, ForbiddenChars):
            if any(ch in c.chars for w in content for ch in w):
                return False
        elif isinstance(c, StartsWith):
            if tuple(content[: len(c.prefix)]) != c.prefix:
                return False
    return True


BUILTIN_TASK_NAMES = ("sent-1", "sent-2", "sent-3", "sent-4", "sent-4*", "demo-60")

_KEYWORDS = frozenset({"soft", "beach", "math"})


def builtin_task(name, lm_params=None):
    """One of the benchmark tasks by name; see BUILTIN_TASK_NAMES."""
    params = lm_params if lm_params is not None else LMParams()
    seed = ()
    ordering = "probability"
    if name == "sent-1":
        constraints = (CharCountExact(82),)
    elif name == "sent-2":
        constraints = (
            WordCountRange(10, 10),
            PositionLexical(3, "soft"),
            PositionLexical(7, "soft"),
            PositionLexical(10, "math"),
        )
    elif name == "sent-3":
        constraints = (WordCountRange(20, None), MaxWordLen(6))
    elif name == "sent-4":
        constraints = (MandatoryKeywords(_KEYWORDS),)
    elif name == "sent-4*":
        constraints = (MandatoryKeywords(_KEYWORDS), KeywordSeparation(_KEYWORDS, 3))
    elif name == "demo-60":
        constraints = (StartsWith(("The",)), WordCountRange(10, 15), CharCountExact(60))
        seed = ("The",)
        ordering = "char-target:10"
    else:
        raise ValueError(
            f"unknown task {name!r}; expected one of {', '.join(BUILTIN_TASK_NAMES)}"
        )
    return TaskSpec(
        name=name,
        constraints=constraints,
        seed=seed,
        lm_params=params,
        require_period=True,
        ordering=ordering,
    )


_CONSTRAINT_SCHEMAS = {
    "char_count_exact": (CharCountExact, ("n",)),
    "word_count_range": (WordCountRange, ("lo", "hi")),
    "max_word_len": (MaxWordLen, ("limit",)),
    "position_lexical": (PositionLexical, ("position", "word")),
    "mandatory_keywords": (MandatoryKeywords, ("words",)),
    "keyword_separation": (KeywordSeparation, ("words", "min_gap")),
    "forbidden_chars": (ForbiddenChars, ("chars",)),
    "starts_with": (StartsWith, ("prefix",)),
}

_TASK_FILE_KEYS = {
    "constraints",
    "seed",
    "k",
    "top_k",
    "top_p",
    "temperature",
    "oversample",
    "require_period",
    "ordering",
    "backtrack_to",
}


def _parse_constraint(obj):
    if not isinstance(obj, dict) or "type" not in obj:
        raise ValueError(f"constraint entry must be an object with a 'type': {obj!r}")
    kind = obj["type"]
    if kind not in _CONSTRAINT_SCHEMAS:
        raise ValueError(
            f"unknown constraint type {kind!r}; expected one of {', '.join(sorted(_CONSTRAINT_SCHEMAS))}"
        )
    cls, fields = _CONSTRAINT_SCHEMAS[kind]
    extra = set(obj) - {"type"} - set(fields)
    if extra:
        raise ValueError(f"unknown keys {sorted(extra)} in {kind!r} constraint")
    kwargs = {f: obj[f] for f in fields if f in obj}
    missing = [f for f in fields if f not in kwargs and not (cls is WordCountRange and f == "hi")]
    if missing:
        raise ValueError(f"constraint {kind!r} is missing {missing}")
    return cls(**kwargs)


def load_task_file(path):
    """Parse a JSON task file into a TaskSpec; unknown keys are rejected."""
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ValueError(f"{path}: task file must hold a JSON object")
    extra = set(data) - _TASK_FILE_KEYS
    if extra:
        raise ValueError(f"{path}: unknown keys {sorted(extra)}")
    constraints = tuple(_parse_constraint(obj) for obj in data.get("constraints", []))
    params = LMParams(
        k=data.get("k", LMParams.k),
        top_k=data.get("top_k", LMParams.top_k),
        top_p=data.get("top_p", LMParams.top_p),
        temperature=data.get("temperature", LMParams.temperature),
        oversample=data.get("oversample", LMParams.oversample),
    )
    return TaskSpec(
        name=path.stem,
        constraints=constraints,
        seed=tuple(data.get("seed", ())),
        lm_params=params,
        require_period=data.get("require_period", True),
        ordering=data.get("ordering", "probability"),
        backtrack_to=data.get("backtrack_to"),
    )


def with_k(task, k):
    """Copy of the task with the per-call word count replaced."""
    params = task.lm_params
    top_k = max(params.top_k, k)
    return replace(task, lm_params=replace(params, k=k, top_k=top_k))
