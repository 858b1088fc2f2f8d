"""
Inference over an Hmm: forward likelihood, Viterbi anchoring, suffix
prediction from the anchor, and Baum-Welch re-estimation.

Recursions run in log space. Only nodes with a finite score are carried from
one step to the next, which keeps tree-shaped models linear in their size.
"""

import logging
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence as Seq, Tuple

import numpy as np
from scipy.special import logsumexp

from .automata import END, Hmm
from .errors import ConfigError, UnobservableSequenceError

_log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PredictConfig:
    """
    length is the suffix length L (0 gives an empty set). keep_partial keeps
    every intermediate suffix of the enumeration instead of only the maximal
    ones (length-L suffixes and suffixes closed by the end marker).
    """

    length: int = 1
    top_k: Optional[int] = None
    include_end_marker: bool = True
    keep_partial: bool = False

    def __post_init__(self):
        if self.length < 0:
            raise ConfigError(f"suffix length must be >= 0, got {self.length}")
        if self.top_k is not None and self.top_k < 1:
            raise ConfigError(f"top_k must be >= 1, got {self.top_k}")


@dataclass
class ObservationSet:
    """(suffix, probability) couples, most probable first."""

    entries: List[Tuple[Tuple[int, ...], float]] = field(default_factory=list)
    anchor: Optional[int] = None
    fallback: bool = False

    @property
    def total_probability(self) -> float:
        return sum(p for _, p in self.entries)

    def as_dict(self) -> Dict[Tuple[int, ...], float]:
        return dict(self.entries)

    def to_list(self) -> List[Dict[str, object]]:
        return [{'suffix': list(suffix), 'probability': probability}
                for suffix, probability in self.entries]


class _LogParams:
    """Log-space model parameters."""

    def __init__(self, hmm: Hmm):
        self.start, self.trans, self.emit = hmm.log_parameters()
        self.n = hmm.n_nodes


def _columns(hmm: Hmm, items: Iterable[int], terminated: bool) -> Optional[List[int]]:
    symbols = list(items) + ([END] if terminated else [])
    columns = [hmm.column(symbol) for symbol in symbols]
    if any(column is None for column in columns):
        unknown = [s for s, c in zip(symbols, columns) if c is None]
        _log.warning("Items %s are not in the model alphabet; probability is 0", unknown)
        return None
    return columns


def _forward_rows(params: _LogParams, columns: List[int]) -> np.ndarray:
    """log alpha, one row per observation."""
    rows = np.full((len(columns), params.n), -np.inf)
    with np.errstate(invalid='ignore', divide='ignore'):
        rows[0] = params.start + params.emit[:, columns[0]]
        for t in range(1, len(columns)):
            active = np.flatnonzero(np.isfinite(rows[t - 1]))
            targets = np.flatnonzero(np.isfinite(params.emit[:, columns[t]]))
            if active.size == 0 or targets.size == 0:
                break
            scores = rows[t - 1][active][:, None] + params.trans[np.ix_(active, targets)]
            rows[t, targets] = logsumexp(scores, axis=0) + params.emit[targets, columns[t]]
    return rows


def _backward_rows(params: _LogParams, columns: List[int]) -> np.ndarray:
    rows = np.full((len(columns), params.n), -np.inf)
    rows[-1] = 0.0
    with np.errstate(invalid='ignore', divide='ignore'):
        for t in range(len(columns) - 2, -1, -1):
            ahead = params.emit[:, columns[t + 1]] + rows[t + 1]
            targets = np.flatnonzero(np.isfinite(ahead))
            if targets.size == 0:
                break
            rows[t] = logsumexp(params.trans[:, targets] + ahead[targets][None, :], axis=1)
    return rows


def log_forward(hmm: Hmm, sequence: Seq[int], terminated: bool = True) -> float:
    columns = _columns(hmm, sequence, terminated)
    if columns is None:
        return -np.inf
    if not columns:
        return 0.0
    rows = _forward_rows(_LogParams(hmm), columns)
    with np.errstate(invalid='ignore', divide='ignore'):
        return float(logsumexp(rows[-1]))


def forward(hmm: Hmm, sequence: Seq[int], terminated: bool = True) -> float:
    """
    Probability of emitting the sequence, then the end marker.

    With terminated=False the sequence is scored as a prefix.
    """
    return float(np.exp(log_forward(hmm, sequence, terminated)))


def viterbi(hmm: Hmm, sequence: Seq[int], terminated: bool = True) -> Tuple[List[int], float]:
    """
    Most probable node path emitting the sequence (then END if terminated).

    Ties go to the smallest node id at every cell. Raises
    UnobservableSequenceError when no path has positive probability.
    """
    columns = _columns(hmm, sequence, terminated)
    if not columns:
        if columns is None:
            raise UnobservableSequenceError(sequence)
        return [], 1.0
    params = _LogParams(hmm)
    delta = params.start + params.emit[:, columns[0]]
    backpointers: List[np.ndarray] = []
    with np.errstate(invalid='ignore'):
        for column in columns[1:]:
            active = np.flatnonzero(np.isfinite(delta))
            if active.size == 0:
                break
            scores = delta[active][:, None] + params.trans[active]
            best = np.argmax(scores, axis=0)
            pointer = active[best]
            delta = scores[best, np.arange(params.n)] + params.emit[:, column]
            backpointers.append(pointer)

    if len(backpointers) != len(columns) - 1 or not np.any(np.isfinite(delta)):
        raise UnobservableSequenceError(sequence)
    last = int(np.argmax(delta))
    path = [last]
    for pointer in reversed(backpointers):
        path.append(int(pointer[path[-1]]))
    path.reverse()
    return path, float(np.exp(delta[last]))


def predict_suffixes(hmm: Hmm, prefix: Seq[int], cfg: Optional[PredictConfig] = None) -> ObservationSet:
    """
    Enumerate suffixes observable after the prefix.

    The prefix is anchored at the last node of its Viterbi path. From there
    every jump and every emission at the reached node extends the running
    suffix, multiplying jump and emission probabilities, for up to L steps.
    A suffix closed by the end marker is not extended. Identical suffixes
    have their probabilities summed. An unobservable prefix falls back to the
    initial distribution and sets the fallback flag.
    """
    cfg = cfg or PredictConfig()
    items = tuple(prefix)
    result = ObservationSet()
    if items:
        try:
            path, _ = viterbi(hmm, items, terminated=False)
            result.anchor = path[-1]
        except UnobservableSequenceError:
            _log.warning("Prefix %s is not observable; predicting from the start", list(items))
            result.fallback = True
    if cfg.length == 0:
        return result

    totals: Dict[Tuple[int, ...], float] = defaultdict(float)

    def extend(row: np.ndarray, probability: float, suffix: Tuple[int, ...], remaining: int) -> None:
        for node in np.flatnonzero(row):
            jump = row[node]
            for k in np.flatnonzero(hmm.emissionprob[node]):
                symbol = hmm.symbols[k]
                observed = probability * jump * hmm.emissionprob[node, k]
                grown = suffix + (symbol,)
                if symbol == END:
                    if cfg.include_end_marker:
                        totals[grown] += observed
                    continue
                if cfg.keep_partial or remaining == 1:
                    totals[grown] += observed
                if remaining > 1:
                    extend(hmm.transmat[node], observed, grown, remaining - 1)

    start_row = hmm.startprob if result.anchor is None else hmm.transmat[result.anchor]
    extend(start_row, 1.0, (), cfg.length)

    entries = sorted(((suffix, float(p)) for suffix, p in totals.items() if p > 0),
                     key=lambda entry: (-entry[1], entry[0]))
    if cfg.top_k is not None:
        entries = entries[:cfg.top_k]
    result.entries = entries
    return result


def _aggregate(sequences: Iterable[Seq[int]]) -> List[Tuple[Tuple[int, ...], int]]:
    return sorted(Counter(tuple(s) for s in sequences).items())


def corpus_log_likelihood(hmm: Hmm, sequences: Iterable[Seq[int]]) -> Tuple[float, int]:
    """Σ log Pr(s then END) over observable sequences, and the count of the others."""
    total, excluded = 0.0, 0
    for sequence, count in _aggregate(sequences):
        log_p = log_forward(hmm, sequence)
        if np.isfinite(log_p):
            total += count * log_p
        else:
            excluded += count
    return total, excluded


@dataclass
class BaumWelchStep:
    hmm: Hmm
    log_likelihood: float
    excluded: int


def baum_welch_step(hmm: Hmm, sequences: Iterable[Seq[int]]) -> BaumWelchStep:
    """
    One batch expectation-maximisation pass.

    log_likelihood is the corpus log-likelihood under the input model.
    Sequences with zero probability contribute no statistics and are counted
    in excluded. Rows without expected counts keep their old values.
    """
    params = _LogParams(hmm)
    n, n_symbols = hmm.n_nodes, len(hmm.symbols)
    start_acc = np.zeros(n)
    trans_acc = np.zeros((n, n))
    emit_acc = np.zeros((n, n_symbols))
    log_likelihood, excluded = 0.0, 0

    with np.errstate(invalid='ignore', divide='ignore', under='ignore'):
        for sequence, count in _aggregate(sequences):
            columns = _columns(hmm, sequence, terminated=True)
            if columns is None:
                excluded += count
                continue
            alpha = _forward_rows(params, columns)
            seq_ll = logsumexp(alpha[-1])
            if not np.isfinite(seq_ll):
                excluded += count
                continue
            beta = _backward_rows(params, columns)
            log_likelihood += count * seq_ll

            gamma = np.exp(alpha + beta - seq_ll)
            start_acc += count * gamma[0]
            for t, column in enumerate(columns):
                emit_acc[:, column] += count * gamma[t]
            for t in range(len(columns) - 1):
                active = np.flatnonzero(np.isfinite(alpha[t]))
                ahead = params.emit[:, columns[t + 1]] + beta[t + 1]
                targets = np.flatnonzero(np.isfinite(ahead))
                if active.size == 0 or targets.size == 0:
                    continue
                xi = (alpha[t][active][:, None] + params.trans[np.ix_(active, targets)]
                      + ahead[targets][None, :] - seq_ll)
                trans_acc[np.ix_(active, targets)] += count * np.exp(xi)

    if excluded:
        _log.warning("Baum-Welch: %d sequences have zero probability and were excluded", excluded)
    if start_acc.sum() == 0:
        return BaumWelchStep(hmm.copy(), log_likelihood, excluded)

    startprob = start_acc / start_acc.sum()
    transmat = hmm.transmat.copy()
    emissionprob = hmm.emissionprob.copy()
    for i in range(n):
        row_total = trans_acc[i].sum()
        if row_total > 0:
            transmat[i] = trans_acc[i] / row_total
        emit_total = emit_acc[i].sum()
        if emit_total > 0:
            emissionprob[i] = emit_acc[i] / emit_total
    return BaumWelchStep(hmm.copy(startprob, transmat, emissionprob), log_likelihood, excluded)


def baum_welch_update(hmm: Hmm, sequences: Iterable[Seq[int]], iterations: int = 1) -> Hmm:
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    corpus = [tuple(s) for s in sequences]
    if not corpus:
        raise ValueError("cannot update a model from an empty sequence set")
    for iteration in range(iterations):
        step = baum_welch_step(hmm, corpus)
        _log.debug("Baum-Welch iteration %d: log-likelihood %.6f", iteration + 1, step.log_likelihood)
        hmm = step.hmm
    return hmm
