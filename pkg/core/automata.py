"""
Stochastic automaton and HMM.

normalize() turns frequencies into probabilities with a per-state
termination probability; to_hmm() realises the automaton as an HMM whose
nodes emit items and whose arcs carry jump probabilities.
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, Iterable, List, Optional, Sequence as Seq, Tuple

import numpy as np

from .errors import InvariantViolation
from .gi import FrequencyAutomaton
from .trie import Arc, FptNode

_log = logging.getLogger(__name__)

#: Reserved item id of the end-of-sequence marker, rendered "#".
END = -1
TOLERANCE = 1e-9


def render_item(item: int) -> str:
    return '#' if item == END else str(item)


@dataclass
class StochasticArc:
    probability: float
    target: int


class StochasticAutomaton:
    """
    Deterministic automaton with arc and termination probabilities.

    mass keeps the frequency mass of each state when the automaton came from
    normalize(), so the frequencies can be recovered.
    """

    def __init__(self, root: int, termination: Dict[int, float],
                 arcs: Dict[int, Dict[int, StochasticArc]],
                 mass: Optional[Dict[int, int]] = None):
        self.root = root
        self.termination = termination
        self.arcs = arcs
        self.mass = mass

    def node_ids(self) -> List[int]:
        return sorted(self.termination)

    def alphabet(self) -> List[int]:
        return sorted({item for arcs in self.arcs.values() for item in arcs})

    def check(self, tolerance: float = TOLERANCE) -> None:
        if self.root not in self.termination:
            raise InvariantViolation('rooted', f"root {self.root} is not a state")
        for node_id in self.node_ids():
            termination = self.termination[node_id]
            if not -tolerance <= termination <= 1 + tolerance:
                raise InvariantViolation('probability-range', f"termination of {node_id} = {termination}")
            total = termination
            for item, arc in self.arcs.get(node_id, {}).items():
                if not -tolerance <= arc.probability <= 1 + tolerance:
                    raise InvariantViolation('probability-range', f"arc {node_id}-({item}) = {arc.probability}")
                if arc.target not in self.termination:
                    raise InvariantViolation('arc-target', f"arc {node_id}-({item})->{arc.target}")
                total += arc.probability
            if abs(total - 1.0) > tolerance:
                raise InvariantViolation('state-normalization', f"state {node_id} sums to {total}")

    def string_probability(self, items: Iterable[int]) -> float:
        """Probability of generating exactly this string, then stopping."""
        state = self.root
        probability = 1.0
        for item in items:
            arc = self.arcs.get(state, {}).get(item)
            if arc is None:
                return 0.0
            probability *= arc.probability
            state = arc.target
        return probability * self.termination[state]

    def to_dict(self) -> Dict[str, Any]:
        data = {
            'root': self.root,
            'nodes': [{'id': node_id, 'termination': self.termination[node_id]}
                      for node_id in self.node_ids()],
            'arcs': [{'from': node_id, 'item': item, 'probability': arc.probability, 'to': arc.target}
                     for node_id in self.node_ids()
                     for item, arc in sorted(self.arcs.get(node_id, {}).items())],
        }
        if self.mass is not None:
            data['mass'] = {str(node_id): self.mass[node_id] for node_id in self.node_ids()}
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "StochasticAutomaton":
        termination = {int(n['id']): float(n['termination']) for n in data['nodes']}
        arcs: Dict[int, Dict[int, StochasticArc]] = {node_id: {} for node_id in termination}
        for entry in data['arcs']:
            source, item = int(entry['from']), int(entry['item'])
            if source not in arcs:
                raise InvariantViolation('arc-target', f"arc from unknown state {source}")
            if item in arcs[source]:
                raise InvariantViolation('determinism', f"state {source} has two arcs on item {item}")
            arcs[source][item] = StochasticArc(float(entry['probability']), int(entry['to']))
        mass = None
        if 'mass' in data:
            mass = {int(k): int(v) for k, v in data['mass'].items()}
        sa = cls(int(data['root']), termination, arcs, mass)
        sa.check()
        return sa


def normalize(fa: FrequencyAutomaton) -> StochasticAutomaton:
    """Divide arc frequencies and ends by (ends + Σ outgoing) at each node."""
    termination: Dict[int, float] = {}
    arcs: Dict[int, Dict[int, StochasticArc]] = {}
    mass: Dict[int, int] = {}
    for node_id in fa.node_ids():
        node = fa.nodes[node_id]
        total = fa.mass(node_id)
        if total == 0:
            raise InvariantViolation('positive-mass', f"node {node_id} has zero total mass")
        mass[node_id] = total
        termination[node_id] = node.sequence_ends / total
        arcs[node_id] = {item: StochasticArc(arc.frequency / total, arc.target)
                         for item, arc in sorted(node.arcs.items())}
    return StochasticAutomaton(fa.root, termination, arcs, mass)


def denormalize(sa: StochasticAutomaton) -> FrequencyAutomaton:
    """Multiply probabilities back by the stored node masses."""
    if sa.mass is None:
        raise ValueError("automaton carries no node masses")
    nodes: Dict[int, FptNode] = {}
    for node_id in sa.node_ids():
        total = sa.mass[node_id]
        nodes[node_id] = FptNode(
            node_id,
            int(round(sa.termination[node_id] * total)),
            {item: Arc(int(round(arc.probability * total)), arc.target)
             for item, arc in sa.arcs.get(node_id, {}).items()})
    fa = FrequencyAutomaton(sa.root, 0, nodes)
    into_root = sum(arc.frequency for _, _, arc in fa.arcs() if arc.target == sa.root)
    fa.total_sequences = fa.mass(sa.root) - into_root
    return fa


class Hmm:
    """
    Discrete HMM with an end marker.

    Node i emits symbol symbols[k] with probability emissionprob[i, k] and
    jumps to node j with probability transmat[i, j]; startprob is the
    ingoing arc without a start node. The last symbol is always END.
    """

    def __init__(self, alphabet: Seq[int], startprob, transmat, emissionprob,
                 origins: Optional[List[Tuple[int, int]]] = None,
                 item_labels: Optional[Dict[str, str]] = None,
                 provenance: Optional[Dict[str, Any]] = None):
        self.alphabet = [int(item) for item in alphabet]
        self.symbols = self.alphabet + [END]
        self.startprob = np.asarray(startprob, dtype=float)
        self.transmat = np.asarray(transmat, dtype=float)
        self.emissionprob = np.asarray(emissionprob, dtype=float)
        self.origins = origins
        self.item_labels = dict(item_labels or {})
        self.provenance = dict(provenance or {})
        self._column = {symbol: k for k, symbol in enumerate(self.symbols)}
        self._logs: Optional[Tuple[np.ndarray, np.ndarray, np.ndarray]] = None

    @property
    def n_nodes(self) -> int:
        return len(self.startprob)

    def log_parameters(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Log start, jump and emission probabilities, computed on first use."""
        if self._logs is None:
            with np.errstate(divide='ignore'):
                self._logs = (np.log(self.startprob), np.log(self.transmat), np.log(self.emissionprob))
        return self._logs

    def column(self, symbol: int) -> Optional[int]:
        return self._column.get(symbol)

    def copy(self, startprob=None, transmat=None, emissionprob=None) -> "Hmm":
        return Hmm(self.alphabet,
                   self.startprob.copy() if startprob is None else startprob,
                   self.transmat.copy() if transmat is None else transmat,
                   self.emissionprob.copy() if emissionprob is None else emissionprob,
                   self.origins, self.item_labels, self.provenance)

    def check(self, tolerance: float = TOLERANCE) -> None:
        n = self.n_nodes
        if self.transmat.shape != (n, n) or self.emissionprob.shape != (n, len(self.symbols)):
            raise InvariantViolation('shape', f"{n} nodes, transmat {self.transmat.shape}, "
                                              f"emissions {self.emissionprob.shape}")
        for name, array in (('initial', self.startprob), ('jump', self.transmat),
                            ('emission', self.emissionprob)):
            if np.any(array < -tolerance) or np.any(array > 1 + tolerance):
                raise InvariantViolation('probability-range', f"{name} probabilities outside [0, 1]")
        if abs(self.startprob.sum() - 1.0) > tolerance:
            raise InvariantViolation('initial-normalization', f"initial sums to {self.startprob.sum()}")
        emission_sums = self.emissionprob.sum(axis=1)
        for i in np.flatnonzero(np.abs(emission_sums - 1.0) > tolerance):
            raise InvariantViolation('emission-normalization', f"node {i} emissions sum to {emission_sums[i]}")
        end_column = self.column(END)
        for i, total in enumerate(self.transmat.sum(axis=1)):
            if abs(total - 1.0) <= tolerance:
                continue
            if abs(total) <= tolerance and abs(self.emissionprob[i, end_column] - 1.0) <= tolerance:
                continue
            raise InvariantViolation('jump-normalization', f"node {i} jumps sum to {total}")

    def end_nodes(self) -> List[int]:
        return [int(i) for i in np.flatnonzero(self.emissionprob[:, self.column(END)] > 0)]

    def to_dict(self) -> Dict[str, Any]:
        nodes = []
        for i in range(self.n_nodes):
            entry: Dict[str, Any] = {
                'id': i,
                'emissions': [{'item': symbol, 'p': float(self.emissionprob[i, k])}
                              for k, symbol in enumerate(self.symbols) if self.emissionprob[i, k] > 0],
            }
            if self.origins is not None:
                entry['state'], entry['via'] = self.origins[i]
            nodes.append(entry)
        return {
            'alphabet': list(self.alphabet),
            'nodes': nodes,
            'arcs': [{'from': int(i), 'to': int(j), 'p': float(self.transmat[i, j])}
                     for i, j in zip(*np.nonzero(self.transmat))],
            'initial': [{'node': int(i), 'p': float(self.startprob[i])}
                        for i in np.flatnonzero(self.startprob)],
            'item_labels': dict(sorted(self.item_labels.items())),
            'provenance': dict(self.provenance),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Hmm":
        alphabet = [int(item) for item in data['alphabet']]
        symbols = alphabet + [END]
        column = {symbol: k for k, symbol in enumerate(symbols)}
        n = len(data['nodes'])
        startprob = np.zeros(n)
        transmat = np.zeros((n, n))
        emissionprob = np.zeros((n, len(symbols)))
        origins: List[Optional[Tuple[int, int]]] = [None] * n
        labelled = True
        for entry in data['nodes']:
            i = int(entry['id'])
            if not 0 <= i < n:
                raise InvariantViolation('node-ids', f"node id {i} outside 0..{n - 1}")
            for emission in entry['emissions']:
                item = int(emission['item'])
                if item not in column:
                    raise InvariantViolation('alphabet', f"node {i} emits unknown item {item}")
                emissionprob[i, column[item]] = float(emission['p'])
            if 'state' in entry:
                origins[i] = (int(entry['state']), int(entry['via']))
            else:
                labelled = False
        for arc in data['arcs']:
            transmat[int(arc['from']), int(arc['to'])] = float(arc['p'])
        for entry in data['initial']:
            startprob[int(entry['node'])] = float(entry['p'])
        hmm = cls(alphabet, startprob, transmat, emissionprob,
                  origins if labelled and None not in origins else None,
                  data.get('item_labels'), data.get('provenance'))
        hmm.check()
        return hmm


def to_hmm(sa: StochasticAutomaton, item_labels: Optional[Dict[str, str]] = None) -> Hmm:
    """
    Realise the automaton as an HMM by splitting transitions.

    One node per (state q, item a) with an a-labelled arc into q, emitting a;
    one end node per state with positive termination, emitting END. Every
    node projected on q jumps like q does: to (q', a) with the arc
    probability and to q's end node with the termination probability. The
    initial distribution is the root's row. For every string w the HMM
    emits w then END with exactly the automaton's probability of w.
    """
    alphabet = sa.alphabet()
    origins = sorted(
        {(arc.target, item) for node_id in sa.node_ids() for item, arc in sa.arcs.get(node_id, {}).items()}
        | {(node_id, END) for node_id in sa.node_ids() if sa.termination[node_id] > 0})
    index = {origin: i for i, origin in enumerate(origins)}
    symbols = alphabet + [END]
    column = {symbol: k for k, symbol in enumerate(symbols)}

    def jump_row(state: int) -> np.ndarray:
        row = np.zeros(len(origins))
        for item, arc in sa.arcs.get(state, {}).items():
            row[index[(arc.target, item)]] += arc.probability
        if sa.termination[state] > 0:
            row[index[(state, END)]] = sa.termination[state]
        return row

    transmat = np.zeros((len(origins), len(origins)))
    emissionprob = np.zeros((len(origins), len(symbols)))
    for i, (state, item) in enumerate(origins):
        emissionprob[i, column[item]] = 1.0
        if item != END:
            transmat[i] = jump_row(state)

    hmm = Hmm(alphabet, jump_row(sa.root), transmat, emissionprob, origins, item_labels,
              {'automaton_states': len(sa.node_ids())})
    _log.info("Converted %d-state automaton into a %d-node HMM (%d end nodes)",
              len(sa.node_ids()), hmm.n_nodes, len(hmm.end_nodes()))
    return hmm


def observation_probabilities(hmm: Hmm, node: Optional[int] = None) -> Dict[int, float]:
    """
    One jump then one emission: probability of observing each symbol.

    node=None starts from the initial distribution (the root).
    """
    row = hmm.startprob if node is None else hmm.transmat[node]
    observed = row @ hmm.emissionprob
    return {symbol: float(observed[k]) for k, symbol in enumerate(hmm.symbols) if observed[k] > 0}
