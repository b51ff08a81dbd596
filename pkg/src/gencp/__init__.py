"""Constrained sentence generation toolkit.

A backtracking search that creates its variables, word domains, and
constraints on the fly, with domains predicted by a pluggable language-model
backend; a width-k beam-search baseline over the same machinery; and a
benchmark harness comparing the two.
"""

from .beam import Beam, HaltingMode, beam_search, expand_beams, satisfaction_rate
from .constraints import (
    BUILTIN_TASK_NAMES,
    CharCountExact,
    ForbiddenChars,
    KeywordSeparation,
    MandatoryKeywords,
    MaxWordLen,
    PositionLexical,
    StartsWith,
    TaskSpec,
    WordCountRange,
    builtin_task,
    can_extend,
    check_complete,
    filter_domain,
    load_task_file,
    only_words,
    with_k,
    word_valid,
)
from .harness import (
    METHODS,
    REPORT_FIELDS,
    OracleLimitError,
    ReportRow,
    RunConfig,
    brute_force_oracle,
    dumps_report,
    emit_report,
    loads_report,
    parse_report,
    run_benchmark,
)
from .lm import (
    LMParams,
    LanguageModel,
    NGramLM,
    RemoteLM,
    TableLM,
    TransportError,
    load_backend,
    perplexity,
    predicts_period,
    sequence_logprob,
    tokenize,
    train_ngram,
)
from .model import (
    Domain,
    SavedState,
    SearchStats,
    SolutionRecord,
    SolverModel,
    Variable,
    WordCandidate,
    render_prefix,
    render_sentence,
    variability,
)
from .solver import (
    Ordering,
    SearchAborted,
    SearchOutcome,
    SolveOptions,
    apply_helping,
    generate_constraints,
    generate_domain,
    generate_variable,
    is_solution,
    order_candidates,
    parse_ordering,
    propagate,
    run_search,
    solve,
    solve_all,
)

__version__ = "0.1.0"
