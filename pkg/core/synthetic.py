"""
Ground-truth stochastic automata and a seeded sequence generator.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np

from .automata import END, StochasticArc, StochasticAutomaton
from .errors import ConfigError
from .ingest import Sequence

_log = logging.getLogger(__name__)


@dataclass
class SyntheticModel:
    """A hand-specified automaton to sample corpora from. The root never terminates."""

    automaton: StochasticAutomaton
    seed: int = 0

    def __post_init__(self):
        self.automaton.check()
        if self.automaton.termination[self.automaton.root] > 0:
            raise ConfigError("the root of a synthetic model must not terminate")


def _automaton(table: Dict[int, tuple]) -> StochasticAutomaton:
    """table: state -> (termination, {item: (probability, target)}); state 0 is the root."""
    termination = {state: float(entry[0]) for state, entry in table.items()}
    arcs = {state: {item: StochasticArc(p, target) for item, (p, target) in entry[1].items()}
            for state, entry in table.items()}
    return StochasticAutomaton(0, termination, arcs)


def worked_example_model(seed: int = 0) -> SyntheticModel:
    """
    The merged four-arc example: a root looping on item 1 and leaving on
    items 2, 6 and 7 to terminal states, with frequencies 4, 6, 2, 2.
    """
    return SyntheticModel(_automaton({
        0: (0.0, {1: (4 / 14, 0), 2: (6 / 14, 1), 6: (2 / 14, 2), 7: (2 / 14, 3)}),
        1: (1.0, {}),
        2: (1.0, {}),
        3: (1.0, {}),
    }), seed)


def single_state_model(item_probabilities: Optional[Dict[int, float]] = None,
                       stop: float = 0.4, seed: int = 0) -> SyntheticModel:
    """
    Items drawn independently from one distribution, at least one item.

    Every state shares the same item distribution, so same-item siblings
    have equal relative frequencies by construction.
    """
    item_probabilities = item_probabilities or {0: 0.5, 1: 0.3, 2: 0.2}
    return SyntheticModel(_automaton({
        0: (0.0, {item: (p, 1) for item, p in item_probabilities.items()}),
        1: (stop, {item: ((1 - stop) * p, 1) for item, p in item_probabilities.items()}),
    }), seed)


def five_state_model(seed: int = 0) -> SyntheticModel:
    """Five states over six places (0..5), mean sequence length around two and a half."""
    return SyntheticModel(_automaton({
        0: (0.0, {0: (0.30, 1), 2: (0.45, 2), 5: (0.25, 3)}),
        1: (0.40, {2: (0.30, 2), 5: (0.15, 3), 1: (0.15, 4)}),
        2: (0.40, {0: (0.20, 1), 3: (0.25, 4), 5: (0.15, 3)}),
        3: (0.40, {2: (0.25, 2), 4: (0.35, 4)}),
        4: (0.70, {1: (0.10, 1), 4: (0.20, 4)}),
    }), seed)


def random_stochastic_automaton(rng: np.random.Generator, n_states: int = 4,
                                alphabet_size: int = 3,
                                root_terminates: bool = True) -> StochasticAutomaton:
    """
    Random deterministic automaton; every state terminates with probability
    at least 0.1 (the root only when root_terminates).
    """
    termination: Dict[int, float] = {}
    arcs: Dict[int, Dict[int, StochasticArc]] = {}
    for state in range(n_states):
        n_items = int(rng.integers(1, alphabet_size + 1))
        items = sorted(int(i) for i in rng.choice(alphabet_size, size=n_items, replace=False))
        weights = rng.dirichlet(np.ones(n_items + 1))
        if state == 0 and not root_terminates:
            stop = 0.0
            weights = rng.dirichlet(np.ones(n_items))
            shares = list(weights)
        else:
            stop = 0.1 + 0.9 * float(weights[0])
            shares = [0.9 * float(w) for w in weights[1:]]
        termination[state] = stop
        arcs[state] = {item: StochasticArc(share, int(rng.integers(0, n_states)))
                       for item, share in zip(items, shares)}
    automaton = StochasticAutomaton(0, termination, arcs)
    automaton.check()
    return automaton


def generate_sequences(model: SyntheticModel, n: int, seed: Optional[int] = None,
                       max_length: int = 200) -> List[Sequence]:
    """
    Sample n independent walks: at each state pick an arc or termination by
    probability. Reproducible for a fixed seed (model.seed when None).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    sa = model.automaton
    rng = np.random.default_rng(model.seed if seed is None else seed)
    choices = {}
    for state in sa.node_ids():
        options = sorted(sa.arcs.get(state, {}).items())
        labels = [item for item, _ in options] + [END]
        probabilities = np.array([arc.probability for _, arc in options] + [sa.termination[state]])
        choices[state] = (labels, probabilities / probabilities.sum())

    sequences: List[Sequence] = []
    truncated = 0
    for _ in range(n):
        state, items = sa.root, []
        while True:
            labels, probabilities = choices[state]
            label = labels[int(rng.choice(len(labels), p=probabilities))]
            if label == END:
                break
            items.append(label)
            state = sa.arcs[state][label].target
            if len(items) >= max_length:
                truncated += 1
                break
        sequences.append(Sequence(tuple(items)))
    if truncated:
        _log.warning("%d generated sequences were cut at %d items", truncated, max_length)
    return sequences
