"""
Frequency Prefix Tree (FPT) over a sequence set.

Arcs carry (item, frequency), nodes count the sequences ending on them.
FrequencyGraph holds the storage shared by the tree and by the frequency
automaton that grammatical inference reduces it to.
"""

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, Iterator, List, Optional, Sequence as Seq, Tuple

from .errors import EmptySequenceError, InputError, InvariantViolation

_log = logging.getLogger(__name__)


@dataclass
class Arc:
    frequency: int
    target: int


@dataclass
class FptNode:
    id: int
    sequence_ends: int = 0
    arcs: Dict[int, Arc] = field(default_factory=dict)


class FrequencyGraph:
    """
    Deterministic graph with item/frequency arcs and end counts.

    At most one arc per item leaves a node (arcs are keyed by item).
    """

    def __init__(self, root: int = 0, total_sequences: int = 0,
                 nodes: Optional[Dict[int, FptNode]] = None):
        self.root = root
        self.total_sequences = total_sequences
        self.nodes: Dict[int, FptNode] = nodes if nodes is not None else {root: FptNode(root)}

    def __len__(self) -> int:
        return len(self.nodes)

    def node_ids(self) -> List[int]:
        return sorted(self.nodes)

    def arcs(self) -> Iterator[Tuple[int, int, Arc]]:
        """Yield (source, item, arc) ordered by source id then item."""
        for source in self.node_ids():
            node = self.nodes[source]
            for item in sorted(node.arcs):
                yield source, item, node.arcs[item]

    def out_mass(self, node_id: int) -> int:
        return sum(arc.frequency for arc in self.nodes[node_id].arcs.values())

    def mass(self, node_id: int) -> int:
        """Number of sequence passages through the node: ends + outgoing."""
        return self.nodes[node_id].sequence_ends + self.out_mass(node_id)

    def ingoing(self, node_id: int) -> List[Tuple[int, int]]:
        return [(source, item) for source, item, arc in self.arcs() if arc.target == node_id]

    def in_mass(self, node_id: int) -> int:
        total = sum(self.nodes[source].arcs[item].frequency for source, item in self.ingoing(node_id))
        if node_id == self.root:
            total += self.total_sequences
        return total

    def alphabet(self) -> List[int]:
        return sorted({item for _, item, _ in self.arcs()})

    def depths(self) -> Dict[int, int]:
        """Shortest distance from the root, children visited by item."""
        depth = {self.root: 0}
        queue = deque([self.root])
        while queue:
            node_id = queue.popleft()
            node = self.nodes[node_id]
            for item in sorted(node.arcs):
                child = node.arcs[item].target
                if child not in depth:
                    depth[child] = depth[node_id] + 1
                    queue.append(child)
        return depth

    def check_conservation(self) -> None:
        """Σ in (+ total at root) = ends + Σ out at every node."""
        incoming: Dict[int, int] = {node_id: 0 for node_id in self.nodes}
        incoming[self.root] += self.total_sequences
        for _, _, arc in self.arcs():
            if arc.target not in self.nodes:
                raise InvariantViolation('arc-target', f"arc to unknown node {arc.target}")
            incoming[arc.target] += arc.frequency
        for node_id in self.node_ids():
            if incoming[node_id] != self.mass(node_id):
                raise InvariantViolation(
                    'flow-conservation',
                    f"node {node_id}: in={incoming[node_id]} ends+out={self.mass(node_id)}")

    def copy_nodes(self) -> Dict[int, FptNode]:
        return {
            node_id: FptNode(node_id, node.sequence_ends,
                             {item: Arc(arc.frequency, arc.target) for item, arc in node.arcs.items()})
            for node_id, node in self.nodes.items()
        }

    def signature(self) -> Tuple:
        """Canonical form reachable from the root; equal for isomorphic graphs."""
        order = {self.root: 0}
        queue = deque([self.root])
        rows = []
        while queue:
            node_id = queue.popleft()
            node = self.nodes[node_id]
            row = [node.sequence_ends]
            for item in sorted(node.arcs):
                arc = node.arcs[item]
                if arc.target not in order:
                    order[arc.target] = len(order)
                    queue.append(arc.target)
                row.append((item, arc.frequency, order[arc.target]))
            rows.append(tuple(row))
        return tuple(rows)

    def graph_dict(self) -> Dict[str, Any]:
        return {
            'root': self.root,
            'total_sequences': self.total_sequences,
            'nodes': [{'id': node_id, 'sequence_ends': self.nodes[node_id].sequence_ends}
                      for node_id in self.node_ids()],
            'arcs': [{'from': source, 'item': item, 'frequency': arc.frequency, 'to': arc.target}
                     for source, item, arc in self.arcs()],
        }

    @staticmethod
    def nodes_from_dict(data: Dict[str, Any]) -> Dict[int, FptNode]:
        nodes: Dict[int, FptNode] = {}
        for entry in data['nodes']:
            node_id = int(entry['id'])
            if node_id in nodes:
                raise InvariantViolation('unique-node-ids', f"duplicate node {node_id}")
            ends = int(entry.get('sequence_ends', 0))
            if ends < 0:
                raise InvariantViolation('non-negative-ends', f"node {node_id}")
            nodes[node_id] = FptNode(node_id, ends)
        for entry in data['arcs']:
            source, item = int(entry['from']), int(entry['item'])
            frequency, target = int(entry['frequency']), int(entry['to'])
            if source not in nodes or target not in nodes:
                raise InvariantViolation('arc-target', f"arc {source}-({item})->{target}")
            if item in nodes[source].arcs:
                raise InvariantViolation('determinism', f"node {source} has two arcs on item {item}")
            if frequency <= 0:
                raise InvariantViolation('positive-frequency', f"arc {source}-({item})->{target}")
            nodes[source].arcs[item] = Arc(frequency, target)
        return nodes


class Fpt(FrequencyGraph):
    """Frequency prefix tree: rooted, acyclic, one ingoing arc per non-root node."""

    def check_tree(self) -> None:
        parents: Dict[int, int] = {}
        for source, _, arc in self.arcs():
            if arc.target == self.root or arc.target in parents:
                raise InvariantViolation('single-parent', f"node {arc.target} has several ingoing arcs")
            parents[arc.target] = source
        if len(self.depths()) != len(self.nodes):
            raise InvariantViolation('rooted', "some nodes are unreachable from the root")
        self.check_conservation()

    def to_dict(self) -> Dict[str, Any]:
        return self.graph_dict()

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Fpt":
        fpt = cls(int(data['root']), int(data['total_sequences']), cls.nodes_from_dict(data))
        fpt.check_tree()
        return fpt


def _relabel_breadth_first(graph: FrequencyGraph) -> Dict[int, FptNode]:
    order = {graph.root: 0}
    queue = deque([graph.root])
    while queue:
        node = graph.nodes[queue.popleft()]
        for item in sorted(node.arcs):
            child = node.arcs[item].target
            if child not in order:
                order[child] = len(order)
                queue.append(child)
    nodes: Dict[int, FptNode] = {}
    for old_id, new_id in order.items():
        old = graph.nodes[old_id]
        nodes[new_id] = FptNode(new_id, old.sequence_ends,
                                {item: Arc(arc.frequency, order[arc.target])
                                 for item, arc in old.arcs.items()})
    return nodes


def build_fpt(sequences: Iterable[Seq[int]]) -> Fpt:
    """
    Insert every sequence into a fresh tree.

    Traversed arcs gain one, missing arcs are created with frequency one and
    the node reached by the last item counts one more sequence end. Node ids
    are then reassigned breadth-first (children by ascending item), so any
    permutation of the input builds the same tree.
    """
    fpt = Fpt()
    next_id = 1
    for index, sequence in enumerate(sequences):
        items = tuple(sequence)
        if not items:
            raise EmptySequenceError(index)
        node = fpt.nodes[fpt.root]
        for item in items:
            if not isinstance(item, int) or item < 0:
                raise InputError(f"Sequence {index}: item {item!r} is not a non-negative integer")
            arc = node.arcs.get(item)
            if arc is None:
                arc = Arc(0, next_id)
                fpt.nodes[next_id] = FptNode(next_id)
                node.arcs[item] = arc
                next_id += 1
            arc.frequency += 1
            node = fpt.nodes[arc.target]
        node.sequence_ends += 1
        fpt.total_sequences += 1

    fpt.nodes = _relabel_breadth_first(fpt)
    _log.debug("Built FPT with %d nodes from %d sequences", len(fpt), fpt.total_sequences)
    return fpt


def fpt_stats(graph: FrequencyGraph) -> Dict[str, int]:
    depths = graph.depths()
    return {
        'nodes': len(graph),
        'non_null_nodes': sum(1 for node in graph.nodes.values() if node.sequence_ends > 0),
        'arcs': sum(len(node.arcs) for node in graph.nodes.values()),
        'depth': max(depths.values()) if depths else 0,
        'alphabet_size': len(graph.alphabet()),
        'total_sequences': graph.total_sequences,
    }
