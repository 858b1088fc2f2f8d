"""
Pipeline stages.
Each stage loads the artifact of the previous one, runs one module operation
and writes its own artifact; the CLI is a thin layer over these functions.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence as Seq

from .automata import Hmm, StochasticAutomaton, normalize, to_hmm
from .config import PipelineConfig
from .errors import ConfigError
from .evaluation import (RelaxationReport, UpdateResult, ValidationReport, check_relaxation_validity,
                         update_until, validate, validate_predictions)
from .gi import FrequencyAutomaton, relaxed_alergia
from .hmm_ops import ObservationSet, predict_suffixes
from .ingest import IngestReport, ItemDictionary, IngestResult, ingest_reviews, parse_reviews
from .observer import ProgressObserver
from .persistence import PathLike, PersistenceManager
from .synthetic import SyntheticModel, five_state_model, generate_sequences, single_state_model, worked_example_model
from .trie import Fpt, build_fpt, fpt_stats

_log = logging.getLogger(__name__)

SYNTHETIC_MODELS = {
    'worked-example': worked_example_model,
    'single-state': single_state_model,
    'five-state': five_state_model,
}


@dataclass
class StageResult:
    """What a stage produced: the written paths and a stats dictionary."""

    outputs: List[Path] = field(default_factory=list)
    stats: Dict[str, Any] = field(default_factory=dict)
    value: Any = None
    item_labels: Dict[str, str] = field(default_factory=dict)


def report_paths(output: PathLike) -> Dict[str, Path]:
    """report.json -> report.json, report.csv and report.dat side by side."""
    base = Path(output)
    stem = base.with_suffix('') if base.suffix == '.json' else base
    return {
        'json': stem.with_suffix('.json'),
        'csv': stem.with_suffix('.csv'),
        'plot': stem.with_suffix('.dat'),
    }


def run_ingest(cfg: PipelineConfig, reviews_path: PathLike, output: PathLike,
               store: Optional[PersistenceManager] = None) -> StageResult:
    """reviews JSONL -> sequence file, plus a report with counters and item labels."""
    store = store or PersistenceManager()
    report = IngestReport()
    dictionary = ItemDictionary()
    lines = store.read_text(reviews_path).splitlines()
    reviews = parse_reviews(lines, cfg.ingest, dictionary, report)
    result: IngestResult = ingest_reviews(reviews, cfg.ingest, report)
    if report.diagnostics:
        _log.warning("%d review lines skipped", len(report.diagnostics))
        for diagnostic in report.diagnostics:
            _log.info("  %s", diagnostic)

    sequences_path = store.save_sequences(output, [s.items for s in result.sequences])
    report_path = Path(output).with_suffix('.report.json')
    payload = dict(report.to_dict(), item_labels=dictionary.to_dict(),
                   diagnostics=list(report.diagnostics))
    store.save_artifact(report_path, 'report', payload)
    return StageResult([sequences_path, store.resolve(report_path)], report.to_dict(), result)


def run_build(sequences_path: PathLike, output: PathLike,
              store: Optional[PersistenceManager] = None) -> StageResult:
    store = store or PersistenceManager()
    fpt = build_fpt(s.items for s in store.load_sequences(sequences_path))
    path = store.save_artifact(output, 'fpt', fpt.to_dict())
    return StageResult([path], fpt_stats(fpt), fpt)


def run_infer(cfg: PipelineConfig, fpt_path: PathLike, output: PathLike,
              store: Optional[PersistenceManager] = None) -> StageResult:
    store = store or PersistenceManager()
    fpt = store.load_model(fpt_path, 'fpt', Fpt.from_dict)
    fa = relaxed_alergia(fpt, cfg.gi)
    path = store.save_artifact(output, 'automaton', fa.to_dict())
    stats = dict(fpt_stats(fa), merges=fa.provenance['merges'], fpt_nodes=len(fpt))
    return StageResult([path], stats, fa)


def load_item_labels(store: PersistenceManager, report_path: Optional[PathLike]) -> Dict[str, str]:
    if report_path is None:
        return {}
    labels = store.load_model(report_path, 'report', lambda data: dict(data.get('item_labels', {})))
    return {str(item): str(label) for item, label in labels.items()}


def run_convert(automaton_path: PathLike, output: PathLike,
                stochastic_output: Optional[PathLike] = None,
                labels_path: Optional[PathLike] = None,
                store: Optional[PersistenceManager] = None) -> StageResult:
    """Frequency automaton -> stochastic automaton -> HMM."""
    store = store or PersistenceManager()
    fa = store.load_model(automaton_path, 'automaton', FrequencyAutomaton.from_dict)
    sa = normalize(fa)
    hmm = to_hmm(sa, load_item_labels(store, labels_path))
    hmm.provenance.update({'inference': dict(fa.provenance)})
    outputs = []
    if stochastic_output is not None:
        outputs.append(store.save_artifact(stochastic_output, 'stochastic', sa.to_dict()))
    outputs.append(store.save_artifact(output, 'hmm', hmm.to_dict()))
    stats = {
        'automaton_states': len(sa.node_ids()),
        'hmm_nodes': hmm.n_nodes,
        'end_nodes': len(hmm.end_nodes()),
        'alphabet_size': len(hmm.alphabet),
    }
    return StageResult(outputs, stats, hmm)


def load_hmm(store: PersistenceManager, hmm_path: PathLike) -> Hmm:
    return store.load_model(hmm_path, 'hmm', Hmm.from_dict)


def run_predict(cfg: PipelineConfig, hmm_path: PathLike, prefix: Seq[int],
                output: Optional[PathLike] = None,
                store: Optional[PersistenceManager] = None) -> StageResult:
    store = store or PersistenceManager()
    hmm = load_hmm(store, hmm_path)
    observations: ObservationSet = predict_suffixes(hmm, prefix, cfg.predict)
    payload = {
        'prefix': list(prefix),
        'length': cfg.predict.length,
        'anchor': observations.anchor,
        'fallback': observations.fallback,
        'suffixes': observations.to_list(),
        'total_probability': observations.total_probability,
    }
    if hmm.item_labels:
        payload['item_labels'] = dict(hmm.item_labels)
    outputs = [store.save_artifact(output, 'predictions', payload)] if output is not None else []
    stats = {'suffixes': len(observations.entries), 'total_probability': observations.total_probability,
             'anchor': observations.anchor, 'fallback': observations.fallback}
    return StageResult(outputs, stats, observations, dict(hmm.item_labels))


def run_update(cfg: PipelineConfig, hmm_path: PathLike, sequences_path: PathLike, output: PathLike,
               observers: Iterable[ProgressObserver] = (),
               store: Optional[PersistenceManager] = None) -> StageResult:
    """Baum-Welch until the MAPE is below the configured threshold."""
    store = store or PersistenceManager()
    hmm = load_hmm(store, hmm_path)
    sequences = [s.items for s in store.load_sequences(sequences_path)]
    result: UpdateResult = update_until(hmm, sequences, cfg.eval.mape_threshold, cfg.eval.max_iters,
                                        cfg.eval.scope, observers)
    trajectory = {
        'iterations': result.iterations,
        'mapes': result.mapes,
        'log_likelihoods': result.log_likelihoods,
        'converged': result.converged,
        'mape_threshold': cfg.eval.mape_threshold,
    }
    updated = result.hmm
    updated.provenance['update'] = trajectory
    path = store.save_artifact(output, 'hmm', updated.to_dict())
    stats = {'iterations': result.iterations, 'initial_mape': result.mapes[0],
             'final_mape': result.mapes[-1], 'converged': result.converged}
    return StageResult([path], stats, result)


@dataclass
class ValidationOutcome:
    sequences: ValidationReport
    predictions: ValidationReport
    relaxation: RelaxationReport


def run_validate(cfg: PipelineConfig, hmm_path: PathLike, sequences_path: PathLike, output: PathLike,
                 store: Optional[PersistenceManager] = None) -> StageResult:
    """
    Sequence and prediction MAPE of a model against a corpus, plus the
    relaxation check on the corpus' prefix tree. Writes the JSON summary, the
    per-sequence CSV and the plot data file.
    """
    store = store or PersistenceManager()
    hmm = load_hmm(store, hmm_path)
    sequences = [s.items for s in store.load_sequences(sequences_path)]
    threshold = cfg.eval.mape_threshold
    outcome = ValidationOutcome(
        validate(hmm, sequences, cfg.eval.scope, threshold),
        validate_predictions(hmm, sequences, cfg.eval.prediction_split, cfg.eval.scope, threshold),
        check_relaxation_validity(build_fpt(sequences), cfg.eval.anomaly_bound),
    )
    paths = report_paths(output)
    summary = {
        'sequences': outcome.sequences.to_dict(),
        'predictions': dict(outcome.predictions.to_dict(), split=cfg.eval.prediction_split),
        'relaxation': outcome.relaxation.to_dict(),
        'scope': cfg.eval.scope,
    }
    written = [
        store.save_artifact(paths['json'], 'report', summary),
        store.write_text(paths['csv'], outcome.sequences.to_csv()),
        store.write_text(paths['plot'], outcome.sequences.to_plot_data()),
    ]
    stats = {
        'mape': outcome.sequences.mape,
        'prediction_mape': outcome.predictions.mape,
        'relaxation_max_variation': outcome.relaxation.max_variation,
        'relaxation_anomalies': len(outcome.relaxation.anomalies),
    }
    return StageResult(written, stats, outcome)


def run_generate(cfg: PipelineConfig, model_name: str, n: int, output: PathLike,
                 automaton_path: Optional[PathLike] = None,
                 store: Optional[PersistenceManager] = None) -> StageResult:
    """Sample a corpus from a built-in model or a saved stochastic automaton."""
    store = store or PersistenceManager()
    if automaton_path is not None:
        model = SyntheticModel(store.load_model(automaton_path, 'stochastic', StochasticAutomaton.from_dict))
    elif model_name in SYNTHETIC_MODELS:
        model = SYNTHETIC_MODELS[model_name]()
    else:
        raise ConfigError(f"Unknown synthetic model '{model_name}'; choose from {sorted(SYNTHETIC_MODELS)}")
    sequences = generate_sequences(model, n, seed=cfg.seed)
    path = store.save_sequences(output, [s.items for s in sequences])
    lengths = [len(s) for s in sequences]
    stats = {'sequences': len(sequences), 'distinct': len({s.items for s in sequences}),
             'mean_length': sum(lengths) / len(lengths), 'seed': cfg.seed}
    return StageResult([path], stats, sequences)
