"""
Model validation against the sequence set.

Compares empirical sequence probabilities R with model probabilities P
through the absolute percent error |R - P| / R, drives the update loop until
the mean error drops below a threshold, and checks whether same-item arcs
of the prefix tree share relative frequencies (the condition under which the
relaxed compatibility test agrees with the full one).
"""

import csv
import io
import logging
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Sequence as Seq, Tuple

from .automata import Hmm
from .errors import ConfigError
from .gi import relative_frequency_arc
from .hmm_ops import PredictConfig, baum_welch_step, corpus_log_likelihood, forward, predict_suffixes
from .observer import Subject
from .trie import Fpt

_log = logging.getLogger(__name__)


def _check_scope(scope: str) -> None:
    if scope in ('all', 'length2'):
        return
    kind, _, value = scope.partition(':')
    if kind in ('top', 'length') and value.isdigit() and int(value) >= 1:
        return
    raise ConfigError(f"scope must be 'all', 'length2', 'length:K' or 'top:N', got '{scope}'")


@dataclass(frozen=True)
class EvalConfig:
    mape_threshold: float = 0.10
    max_iters: int = 100
    anomaly_bound: float = 0.08
    scope: str = 'length2'
    prediction_split: int = 1

    def __post_init__(self):
        for name in ('mape_threshold', 'anomaly_bound'):
            value = getattr(self, name)
            if not 0.0 < value < 1.0:
                raise ConfigError(f"{name} must be in (0, 1), got {value}")
        if self.max_iters < 0:
            raise ConfigError("max_iters must be >= 0")
        if self.prediction_split < 1:
            raise ConfigError("prediction_split must be >= 1")
        _check_scope(self.scope)


def ape(r: float, p: float) -> float:
    if r <= 0:
        raise ValueError("empirical probability must be positive (sequence absent from corpus)")
    return abs(r - p) / r


def empirical_probability(sequences: Iterable[Seq[int]], s: Seq[int]) -> float:
    target = tuple(s)
    total = hits = 0
    for sequence in sequences:
        total += 1
        hits += tuple(sequence) == target
    return hits / total if total else 0.0


def select_scope(counts: Counter, scope: str = 'length2') -> List[Tuple[int, ...]]:
    """Distinct sequences to validate on, in a deterministic order."""
    _check_scope(scope)
    if scope == 'all':
        return sorted(counts)
    if scope == 'length2':
        scope = 'length:2'
    kind, _, value = scope.partition(':')
    if kind == 'length':
        return sorted(s for s in counts if len(s) == int(value))
    ranked = sorted(counts, key=lambda s: (-counts[s], s))
    return ranked[:int(value)]


def sequence_label(sequence: Seq[int]) -> str:
    items = [str(item) for item in sequence]
    return ''.join(items) if all(len(item) == 1 for item in items) else '-'.join(items)


@dataclass
class ValidationRow:
    sequence: Tuple[int, ...]
    r: float
    p: float
    ape: float


@dataclass
class ValidationReport:
    rows: List[ValidationRow] = field(default_factory=list)
    mape: float = 0.0
    min_ape: float = 0.0
    max_ape: float = 0.0
    anomalies: List[Tuple[int, ...]] = field(default_factory=list)

    @classmethod
    def from_rows(cls, rows: List[ValidationRow], anomaly_ape: Optional[float] = None) -> "ValidationReport":
        if not rows:
            _log.warning("Validation scope is empty; MAPE reported as 0")
            return cls()
        apes = [row.ape for row in rows]
        anomalies = [row.sequence for row in rows if anomaly_ape is not None and row.ape > anomaly_ape]
        return cls(rows, sum(apes) / len(apes), min(apes), max(apes), anomalies)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'sequences': len(self.rows),
            'mape': self.mape,
            'min_ape': self.min_ape,
            'max_ape': self.max_ape,
            'anomalies': [list(s) for s in self.anomalies],
        }

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator='\n')
        writer.writerow(['sequence', 'R', 'P', 'APE'])
        for row in self.rows:
            writer.writerow([' '.join(str(i) for i in row.sequence), repr(row.r), repr(row.p), repr(row.ape)])
        return buffer.getvalue()

    def to_plot_data(self) -> str:
        lines = ['# label APE']
        lines.extend(f"{sequence_label(row.sequence)} {row.ape!r}" for row in self.rows)
        return '\n'.join(lines) + '\n'


def validate(hmm: Hmm, sequences: Iterable[Seq[int]], scope: str = 'length2',
             anomaly_ape: Optional[float] = None) -> ValidationReport:
    """
    For each distinct sequence in scope: R = empirical probability,
    P = Pr(sequence then END) under the model, APE between the two.
    """
    counts = Counter(tuple(s) for s in sequences)
    total = sum(counts.values())
    rows = []
    for sequence in select_scope(counts, scope):
        r = counts[sequence] / total
        p = forward(hmm, sequence)
        rows.append(ValidationRow(sequence, r, p, ape(r, p)))
    return ValidationReport.from_rows(rows, anomaly_ape)


def validate_predictions(hmm: Hmm, sequences: Iterable[Seq[int]], split: int = 1,
                         scope: str = 'length2', anomaly_ape: Optional[float] = None) -> ValidationReport:
    """
    Each sequence in scope is read as A-B with |B| = split. R is the share of
    corpus sequences starting with A that continue with B; P is the
    probability of suffix B predicted after prefix A.
    """
    counts = Counter(tuple(s) for s in sequences)
    prefix_counts: Counter = Counter()
    for sequence, count in counts.items():
        for end in range(1, len(sequence) + 1):
            prefix_counts[sequence[:end]] += count

    cfg = PredictConfig(length=split)
    predictions: Dict[Tuple[int, ...], Dict[Tuple[int, ...], float]] = {}
    rows = []
    for sequence in select_scope(counts, scope):
        if len(sequence) <= split:
            continue
        prefix, suffix = sequence[:-split], sequence[-split:]
        if prefix not in predictions:
            predictions[prefix] = predict_suffixes(hmm, prefix, cfg).as_dict()
        r = prefix_counts[sequence] / prefix_counts[prefix]
        p = predictions[prefix].get(suffix, 0.0)
        rows.append(ValidationRow(sequence, r, p, ape(r, p)))
    return ValidationReport.from_rows(rows, anomaly_ape)


@dataclass
class UpdateResult:
    hmm: Hmm
    mapes: List[float]
    log_likelihoods: List[float]
    converged: bool

    @property
    def iterations(self) -> int:
        return len(self.mapes) - 1


class UpdateLoop(Subject):
    """Baum-Welch iterations until the MAPE is strictly below the threshold."""

    def __init__(self, sequences: Iterable[Seq[int]], mape_threshold: float = 0.10,
                 max_iters: int = 100, scope: str = 'length2'):
        super().__init__()
        if mape_threshold <= 0:
            raise ValueError("mape_threshold must be positive")
        self.corpus = [tuple(s) for s in sequences]
        self.mape_threshold = mape_threshold
        self.max_iters = max_iters
        self.scope = scope

    def run(self, hmm: Hmm) -> UpdateResult:
        report = validate(hmm, self.corpus, self.scope)
        mapes = [report.mape]
        log_likelihoods: List[float] = []
        self.notify({'iteration': 0, 'mape': report.mape, 'log_likelihood': None})

        iteration = 0
        while report.mape >= self.mape_threshold and iteration < self.max_iters:
            step = baum_welch_step(hmm, self.corpus)
            log_likelihoods.append(step.log_likelihood)
            hmm = step.hmm
            iteration += 1
            report = validate(hmm, self.corpus, self.scope)
            mapes.append(report.mape)
            self.notify({'iteration': iteration, 'mape': report.mape,
                         'log_likelihood': step.log_likelihood})

        log_likelihoods.append(corpus_log_likelihood(hmm, self.corpus)[0])
        converged = report.mape < self.mape_threshold
        if not converged:
            _log.warning("MAPE %.4f still above %.4f after %d iterations",
                         report.mape, self.mape_threshold, iteration)
        return UpdateResult(hmm, mapes, log_likelihoods, converged)


def update_until(hmm: Hmm, sequences: Iterable[Seq[int]], mape_threshold: float = 0.10,
                 max_iters: int = 100, scope: str = 'length2', observers=()) -> UpdateResult:
    """
    Alternate one Baum-Welch iteration and a validation until the MAPE is
    below mape_threshold or max_iters iterations ran. mapes[0] is the MAPE of
    the input model; log_likelihoods[i] is the corpus log-likelihood of the
    i-th model of the trajectory.
    """
    loop = UpdateLoop(sequences, mape_threshold, max_iters, scope)
    for observer in observers:
        loop.attach(observer)
    return loop.run(hmm)


@dataclass
class RelaxationGroup:
    item: int
    position: int
    relative_frequencies: List[float]

    @property
    def variation(self) -> float:
        return max(self.relative_frequencies) - min(self.relative_frequencies)


@dataclass
class RelaxationReport:
    groups: List[RelaxationGroup]
    bound: float

    @property
    def anomalies(self) -> List[RelaxationGroup]:
        return [group for group in self.groups if group.variation > self.bound]

    @property
    def max_variation(self) -> float:
        return max((group.variation for group in self.groups), default=0.0)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'bound': self.bound,
            'max_variation': self.max_variation,
            'groups': [{'item': g.item, 'position': g.position, 'arcs': len(g.relative_frequencies),
                        'variation': g.variation} for g in self.groups],
            'anomalies': [{'item': g.item, 'position': g.position, 'variation': g.variation}
                          for g in self.anomalies],
        }


def check_relaxation_validity(fpt: Fpt, bound: float = 0.08) -> RelaxationReport:
    """
    Group the tree's arcs by (item, position), position being the depth of
    the arc's end node, and measure the spread of their relative frequencies.
    Groups spreading more than bound are anomalies.
    """
    depth = fpt.depths()
    grouped: Dict[Tuple[int, int], List[float]] = defaultdict(list)
    for source, item, arc in fpt.arcs():
        grouped[(item, depth[arc.target])].append(relative_frequency_arc(fpt, source, item))
    groups = [RelaxationGroup(item, position, grouped[(item, position)])
              for item, position in sorted(grouped)]
    report = RelaxationReport(groups, bound)
    for group in report.anomalies:
        _log.info("Relaxation anomaly: item %d at position %d varies by %.3f",
                  group.item, group.position, group.variation)
    return report
