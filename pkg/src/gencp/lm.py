"""Next-word prediction backends and sequence scoring.

Every backend answers a ranked candidate list for a sentence prefix and can
score individual conditionals.  Rankings must be deterministic within a
process run: the search re-queries the same prefixes after backtracking and
relies on getting the same answers.  The remote backend memoizes responses to
guarantee this (and to avoid paying twice for the same prompt).
"""

from __future__ import annotations

import json
import math
import os
import re
import threading
from collections import defaultdict
from dataclasses import dataclass

import requests

from .model import WordCandidate, render_prefix

PROB_FLOOR = 1e-10  # conditional probability charged for words a backend never offered
DEFAULT_TIMEOUT_SECS = 120.0
TIMEOUT_ENV_VAR = "GENCP_LM_TIMEOUT_SECS"
DEFAULT_RESPONSE_PATH = "completion_probabilities[0].probs"


class TransportError(RuntimeError):
    """A remote backend failed (connection, HTTP status, malformed payload).

    Retriable: the request had no lasting effect and may be reissued.
    """


@dataclass(frozen=True)
class LMParams:
    """Sampling parameters shared by all backends.

    ``k`` is the number of words the search wants per call; backends fetch up
    to ``k * oversample`` raw candidates so that k survive validity filtering.
    """

    k: int = 10
    top_k: int = 40
    top_p: float = 1.0
    temperature: float = 0.8
    oversample: int = 4

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")
        if not 0.0 < self.top_p <= 1.0:
            raise ValueError("top_p must be in (0, 1]")
        if self.temperature <= 0.0:
            raise ValueError("temperature must be > 0")
        if self.oversample < 1:
            raise ValueError("oversample must be >= 1")
        if self.k > self.top_k * self.oversample:
            raise ValueError("k exceeds top_k * oversample")


class LanguageModel:
    """Interface shared by all backends."""

    def predict(self, sentence, params, k=None):
        """Ranked next-word candidates for ``sentence`` (a rendered prefix).

        At most ``k * params.oversample`` candidates, sorted by descending
        log-probability with lexicographic tie-break on text.  ``k`` defaults
        to ``params.k``.  An unknown prefix yields an empty list.
        """
        raise NotImplementedError

    def conditional_logprob(self, prefix_words, word, params):
        """ln P(word | prefix words), or None when the backend never offers it."""
        raise NotImplementedError


def sequence_logprob(lm, words, params):
    """Sum of conditional log-probabilities along the sequence.

    Words the backend does not offer at their prefix are charged the floor
    probability, so every sequence gets a finite score.
    """
    words = list(words)
    if not words:
        raise ValueError("empty sequence")
    total = 0.0
    floor = math.log(PROB_FLOOR)
    for i, word in enumerate(words):
        lp = lm.conditional_logprob(words[:i], word, params)
        total += floor if lp is None else lp
    return total


def perplexity(lm, words, params):
    """exp(-logprob/n): geometric mean of the inverse conditionals; >= 1 is typical."""
    words = list(words)
    return math.exp(-sequence_logprob(lm, words, params) / len(words))


def predicts_period(lm, sentence, params):
    """Whether "." ranks among the first k raw candidates after ``sentence``."""
    if not sentence:
        raise ValueError("empty sentence")
    return any(c.text == "." for c in lm.predict(sentence, params)[: params.k])


def _rank(candidates):
    return sorted(candidates, key=lambda c: (-c.logprob, c.text))


def _as_candidate(entry):
    if isinstance(entry, WordCandidate):
        return entry
    word, prob = entry
    if not 0.0 < prob <= 1.0:
        raise ValueError(f"probability for {word!r} must be in (0, 1], got {prob}")
    return WordCandidate(word, math.log(prob))


class TableLM(LanguageModel):
    """Deterministic backend mapping exact prefix strings to candidate lists.

    The root prefix is the empty string.  Entries may be WordCandidate objects
    or (word, probability) pairs.  Unknown prefixes predict nothing, which
    kills the corresponding search branch.
    """

    def __init__(self, table):
        self._table = {}
        self._lookup = {}
        for prefix, entries in table.items():
            ranked = _rank(_as_candidate(e) for e in entries)
            texts = [c.text for c in ranked]
            if len(set(texts)) != len(texts):
                raise ValueError(f"duplicate word under prefix {prefix!r}")
            total = sum(math.exp(c.logprob) for c in ranked)
            if total > 1.0 + 1e-9:
                raise ValueError(
                    f"probabilities under prefix {prefix!r} sum to {total:.6f} > 1"
                )
            self._table[prefix] = ranked
            self._lookup[prefix] = {c.text: c.logprob for c in ranked}

    @classmethod
    def from_file(cls, path):
        """Load the tab-separated table format: ``prefix<TAB>word<TAB>prob``.

        The root prefix is written as an empty first field; blank lines are
        ignored.
        """
        table = defaultdict(list)
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.rstrip("\n")
                if not line.strip():
                    continue
                parts = line.split("\t")
                if len(parts) != 3:
                    raise ValueError(f"{path}:{lineno}: expected 3 tab-separated fields")
                prefix, word, prob_text = parts
                try:
                    prob = float(prob_text)
                except ValueError:
                    raise ValueError(f"{path}:{lineno}: bad probability {prob_text!r}") from None
                if any(existing == word for existing, _ in table[prefix]):
                    raise ValueError(f"{path}:{lineno}: duplicate word {word!r} for prefix {prefix!r}")
                table[prefix].append((word, prob))
        return cls(table)

    def prefixes(self):
        return set(self._table)

    def predict(self, sentence, params, k=None):
        k = params.k if k is None else k
        return list(self._table.get(sentence, ()))[: k * params.oversample]

    def conditional_logprob(self, prefix_words, word, params):
        return self._lookup.get(render_prefix(prefix_words), {}).get(word)


_TOKEN_RE = re.compile(r"[^\W\d_]+(?:['\-][^\W\d_]+)*|\.")


def tokenize(text):
    """Split text into words (internal apostrophe/hyphen allowed) and periods."""
    return _TOKEN_RE.findall(text)


class NGramLM(LanguageModel):
    """Additively smoothed n-gram backend trained from plain text.

    ``order`` is the context length in words.  Counts are kept for every
    context length from 0 up to ``order``; prediction uses the longest
    context, backing off to shorter ones only when smoothing is zero and the
    context was never observed.
    """

    def __init__(self, order, smoothing, counts, totals, vocabulary):
        self.order = order
        self.smoothing = smoothing
        self._counts = counts
        self._totals = totals
        self.vocabulary = list(vocabulary)

    def _distribution(self, context_words):
        context_words = list(context_words)
        for length in range(min(self.order, len(context_words)), -1, -1):
            ctx = tuple(context_words[len(context_words) - length:])
            total = self._totals[length].get(ctx, 0)
            if total == 0 and self.smoothing == 0.0:
                continue
            seen = self._counts[length].get(ctx, {})
            denom = total + self.smoothing * len(self.vocabulary)
            dist = {}
            for word in self.vocabulary:
                p = (seen.get(word, 0) + self.smoothing) / denom
                if p > 0.0:
                    dist[word] = p
            return dist
        return {}

    def predict(self, sentence, params, k=None):
        k = params.k if k is None else k
        dist = self._distribution(tokenize(sentence))
        cands = [WordCandidate(w, math.log(p)) for w, p in dist.items()]
        return _rank(cands)[: k * params.oversample]

    def conditional_logprob(self, prefix_words, word, params):
        p = self._distribution(prefix_words).get(word)
        return math.log(p) if p else None

    def to_dict(self):
        """JSON-friendly form; see from_dict."""
        entries = []
        for length, by_ctx in enumerate(self._counts):
            for ctx in sorted(by_ctx):
                pairs = sorted(by_ctx[ctx].items())
                entries.append([length, list(ctx), [[w, c] for w, c in pairs]])
        return {
            "format": "gencp-ngram",
            "order": self.order,
            "smoothing": self.smoothing,
            "vocabulary": self.vocabulary,
            "counts": entries,
        }

    @classmethod
    def from_dict(cls, data):
        if data.get("format") != "gencp-ngram":
            raise ValueError("not a saved n-gram model")
        order = int(data["order"])
        counts = [{} for _ in range(order + 1)]
        totals = [{} for _ in range(order + 1)]
        for length, ctx, pairs in data["counts"]:
            ctx = tuple(ctx)
            bucket = counts[length].setdefault(ctx, {})
            for word, count in pairs:
                bucket[word] = count
                totals[length][ctx] = totals[length].get(ctx, 0) + count
        return cls(order, float(data["smoothing"]), counts, totals, list(data["vocabulary"]))

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh)
            fh.write("\n")


def train_ngram(corpus, order, smoothing=1.0):
    """Count-based training over whitespace/punctuation tokenized text.

    ``corpus`` is a string or a readable text stream.  Deterministic given
    identical input.
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    if smoothing < 0:
        raise ValueError("smoothing must be >= 0")
    text = corpus.read() if hasattr(corpus, "read") else corpus
    tokens = tokenize(text)
    if not tokens:
        raise ValueError("empty corpus")
    counts = [{} for _ in range(order + 1)]
    totals = [{} for _ in range(order + 1)]
    for i, token in enumerate(tokens):
        for length in range(0, order + 1):
            if i < length:
                break
            ctx = tuple(tokens[i - length:i])
            bucket = counts[length].setdefault(ctx, {})
            bucket[token] = bucket.get(token, 0) + 1
            totals[length][ctx] = totals[length].get(ctx, 0) + 1
    vocabulary = sorted(set(tokens))
    return NGramLM(order, smoothing, counts, totals, vocabulary)


_PATH_SEGMENT_RE = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)((?:\[\d+\])*)$")


def _parse_response_path(path):
    keys = []
    for segment in path.split("."):
        m = _PATH_SEGMENT_RE.match(segment)
        if m is None:
            raise ValueError(f"bad response path segment {segment!r}")
        keys.append(m.group(1))
        for idx in re.findall(r"\[(\d+)\]", m.group(2)):
            keys.append(int(idx))
    return keys


class RemoteLM(LanguageModel):
    """Client for an HTTP completion server reporting per-token probabilities.

    One POST per distinct (sentence, parameters) pair: responses are memoized
    for the lifetime of the instance, which both keeps rankings stable across
    backtracking and avoids duplicate inference cost.  Safe to share across
    concurrent searches.
    """

    def __init__(self, endpoint, response_path=DEFAULT_RESPONSE_PATH, timeout=None, session=None):
        self.endpoint = endpoint
        self._path = _parse_response_path(response_path)
        if timeout is None:
            env = os.environ.get(TIMEOUT_ENV_VAR)
            timeout = float(env) if env else DEFAULT_TIMEOUT_SECS
        self.timeout = timeout
        self._session = session if session is not None else requests.Session()
        self._memo = {}
        self._lock = threading.Lock()

    def predict(self, sentence, params, k=None):
        k = params.k if k is None else k
        key = (sentence, k, params)
        with self._lock:
            hit = self._memo.get(key)
        if hit is not None:
            return list(hit)
        payload = {
            "prompt": sentence,
            "n_predict": 1,
            "n_probs": k * params.oversample,
            "temperature": params.temperature,
            "top_k": params.top_k,
            "top_p": params.top_p,
        }
        try:
            resp = self._session.post(self.endpoint, json=payload, timeout=self.timeout)
        except requests.RequestException as exc:
            raise TransportError(f"POST {self.endpoint} failed: {exc}") from exc
        if not 200 <= resp.status_code < 300:
            raise TransportError(f"{self.endpoint} answered HTTP {resp.status_code}")
        try:
            doc = resp.json()
        except ValueError as exc:
            raise TransportError(f"{self.endpoint} answered malformed JSON") from exc
        cands = _rank(self._extract(doc))[: k * params.oversample]
        with self._lock:
            self._memo[key] = tuple(cands)
        return list(cands)

    def _extract(self, doc):
        node = doc
        for key in self._path:
            try:
                node = node[key]
            except (KeyError, IndexError, TypeError):
                raise TransportError(f"response lacks {key!r} along the configured path") from None
        if not isinstance(node, list):
            raise TransportError("configured response path does not hold a list")
        best = {}
        for item in node:
            try:
                token = item["token"]
                prob = float(item["prob"])
            except (KeyError, TypeError, ValueError):
                raise TransportError("token entry missing 'token'/'prob'") from None
            text = token.strip()
            if not text or any(ch.isspace() for ch in text):
                continue
            if prob <= 0.0:
                continue
            prob = min(prob, 1.0)
            if text not in best or prob > best[text]:
                best[text] = prob
        return [WordCandidate(text, math.log(prob)) for text, prob in best.items()]

    def conditional_logprob(self, prefix_words, word, params):
        for cand in self.predict(render_prefix(prefix_words), params):
            if cand.text == word:
                return cand.logprob
        return None


def load_backend(spec):
    """Build a backend from a spec string.

    Forms: ``table:<path>`` (tab-separated prefix table),
    ``ngram:<corpus>,<order>`` (train on the fly, additive smoothing 1.0),
    ``ngram:<model.json>`` (saved model), ``remote:<url>``.
    """
    kind, sep, rest = spec.partition(":")
    if not sep or not rest:
        raise ValueError(f"bad backend spec {spec!r}; expected table:..., ngram:... or remote:...")
    if kind == "table":
        return TableLM.from_file(rest)
    if kind == "ngram":
        if rest.endswith(".json"):
            return NGramLM.load(rest)
        path, sep, order = rest.rpartition(",")
        if not sep:
            raise ValueError("ngram spec needs ngram:<corpus>,<order> or ngram:<model.json>")
        with open(path, encoding="utf-8") as fh:
            return train_ngram(fh, int(order))
    if kind == "remote":
        return RemoteLM(rest)
    raise ValueError(f"unknown backend kind {kind!r}")
