"""
Grammatical inference: reduce a frequency prefix tree to a frequency
automaton with the RED/BLUE state-merging loop of (relaxed) Alergia.

Relaxed mode tests only the immediate outgoing arcs (and termination) of
the two candidate nodes; full mode repeats the test down matched children
to the leaves.
"""

import bisect
import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Tuple

from .errors import ConfigError, InferenceError
from .trie import Arc, FrequencyGraph, Fpt

_log = logging.getLogger(__name__)

MODES = ('relaxed', 'full')


@dataclass(frozen=True)
class GiConfig:
    alpha: float = 0.05
    mode: str = 'relaxed'
    include_termination: bool = True
    force_no_merge: bool = False

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got '{self.mode}'")


class FrequencyAutomaton(FrequencyGraph):
    """Merged graph with integer frequencies; cycles allowed."""

    def __init__(self, root: int = 0, total_sequences: int = 0, nodes=None,
                 provenance: Optional[Dict[str, Any]] = None):
        super().__init__(root, total_sequences, nodes)
        self.provenance: Dict[str, Any] = dict(provenance or {})

    @classmethod
    def from_graph(cls, graph: FrequencyGraph, provenance: Optional[Dict[str, Any]] = None) -> "FrequencyAutomaton":
        return cls(graph.root, graph.total_sequences, graph.copy_nodes(), provenance)

    def to_dict(self) -> Dict[str, Any]:
        data = self.graph_dict()
        data['cycles_allowed'] = True
        data['provenance'] = dict(self.provenance)
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "FrequencyAutomaton":
        fa = cls(int(data['root']), int(data['total_sequences']),
                 cls.nodes_from_dict(data), data.get('provenance'))
        fa.check_conservation()
        return fa


def relative_frequency_arc(graph: FrequencyGraph, node_id: int, item: int,
                           include_termination: bool = False) -> float:
    """
    Arc frequency over the outgoing mass of its start node.

    With include_termination the node's sequence ends join the denominator,
    making arcs plus termination a proper distribution. Absent arcs give 0.
    """
    node = graph.nodes[node_id]
    denominator = graph.out_mass(node_id)
    if include_termination:
        denominator += node.sequence_ends
    if denominator == 0:
        raise InferenceError(f"relative frequency undefined at node {node_id}: no outgoing mass")
    arc = node.arcs.get(item)
    return arc.frequency / denominator if arc is not None else 0.0


def relative_frequency_node(graph: FrequencyGraph, node_id: int) -> float:
    """Sequence ends over ingoing mass (over outgoing mass for the root)."""
    node = graph.nodes[node_id]
    if node_id == graph.root:
        denominator = graph.out_mass(node_id)
    else:
        denominator = graph.in_mass(node_id)
    if denominator == 0:
        _log.debug("Node %d has no mass to normalise its ends by; using 0", node_id)
        return 0.0
    return node.sequence_ends / denominator


def hoeffding_bound(n1: int, n2: int, alpha: float) -> float:
    return math.sqrt(0.5 * math.log(2.0 / alpha)) * (1.0 / math.sqrt(n1) + 1.0 / math.sqrt(n2))


def hoeffding_compatible(f1: int, n1: int, f2: int, n2: int, alpha: float) -> bool:
    """True iff the two observed ratios differ by no more than the Hoeffding bound."""
    if n1 <= 0 or n2 <= 0:
        raise ValueError("sample sizes must be positive")
    return abs(f1 / n1 - f2 / n2) <= hoeffding_bound(n1, n2, alpha)


def _locally_compatible(graph: FrequencyGraph, red: int, blue: int, cfg: GiConfig) -> bool:
    red_node, blue_node = graph.nodes[red], graph.nodes[blue]

    n_red, n_blue = graph.out_mass(red), graph.out_mass(blue)
    if cfg.include_termination:
        n_red += red_node.sequence_ends
        n_blue += blue_node.sequence_ends

    # no evidence on one side: nothing can be rejected
    if n_red > 0 and n_blue > 0:
        for item in sorted(set(red_node.arcs) | set(blue_node.arcs)):
            f_red = red_node.arcs[item].frequency if item in red_node.arcs else 0
            f_blue = blue_node.arcs[item].frequency if item in blue_node.arcs else 0
            if not hoeffding_compatible(f_red, n_red, f_blue, n_blue, cfg.alpha):
                return False
        if cfg.include_termination and not hoeffding_compatible(
                red_node.sequence_ends, n_red, blue_node.sequence_ends, n_blue, cfg.alpha):
            return False
    return True


def compatible(graph: FrequencyGraph, red: int, blue: int, cfg: Optional[GiConfig] = None) -> bool:
    cfg = cfg or GiConfig()
    if cfg.mode == 'relaxed':
        return _locally_compatible(graph, red, blue, cfg)

    stack = [(red, blue)]
    seen = set()
    while stack:
        pair = stack.pop()
        if pair in seen:
            continue
        seen.add(pair)
        r, b = pair
        if not _locally_compatible(graph, r, b, cfg):
            return False
        red_arcs, blue_arcs = graph.nodes[r].arcs, graph.nodes[b].arcs
        for item in sorted(blue_arcs):
            if item in red_arcs:
                stack.append((red_arcs[item].target, blue_arcs[item].target))
    return True


def fold(graph: FrequencyGraph, red: int, blue: int) -> FrequencyGraph:
    """
    Fold the blue node into the red one.

    Ends add up; each blue arc either adds its frequency to the red arc on the
    same item (and the two children fold recursively) or is attached to red
    unchanged with its whole subtree. Folded blue nodes are removed.
    """
    stack = [(red, blue)]
    while stack:
        r_id, b_id = stack.pop()
        r_node = graph.nodes[r_id]
        b_node = graph.nodes.pop(b_id)
        r_node.sequence_ends += b_node.sequence_ends
        for item in sorted(b_node.arcs):
            b_arc = b_node.arcs[item]
            r_arc = r_node.arcs.get(item)
            if r_arc is None:
                r_node.arcs[item] = Arc(b_arc.frequency, b_arc.target)
            else:
                r_arc.frequency += b_arc.frequency
                stack.append((r_arc.target, b_arc.target))
    return graph


def merge(graph: FrequencyGraph, red: int, blue: int,
          ingoing: Optional[List[Tuple[int, int]]] = None) -> FrequencyGraph:
    """
    Redirect every ingoing arc of blue to red, then fold blue into red.

    ingoing lists the (source, item) arcs entering blue; it is looked up
    when not given.
    """
    if red == blue:
        raise ValueError("cannot merge a node with itself")
    if ingoing is None:
        ingoing = graph.ingoing(blue)
    for source, item in ingoing:
        graph.nodes[source].arcs[item].target = red
    return fold(graph, red, blue)


def _blue_frontier(graph: FrequencyGraph, red: List[int], red_set) -> List[Tuple[int, int, int]]:
    frontier = []
    for r in red:
        for item, arc in graph.nodes[r].arcs.items():
            if arc.target not in red_set:
                frontier.append((arc.target, r, item))
    return frontier


def relaxed_alergia(fpt: Fpt, cfg: Optional[GiConfig] = None) -> FrequencyAutomaton:
    """
    RED/BLUE state merging over a copy of the tree.

    BLUE nodes are taken by (tree depth, ingoing frequency descending, id);
    RED candidates are tried by ascending id and the first compatible one
    absorbs the BLUE node. A BLUE node with no compatible RED is promoted.
    """
    cfg = cfg or GiConfig()
    fa = FrequencyAutomaton.from_graph(fpt, {
        'alpha': cfg.alpha,
        'mode': cfg.mode,
        'include_termination': cfg.include_termination,
        'force_no_merge': cfg.force_no_merge,
        'merges': 0,
        'fpt_nodes': len(fpt),
    })
    if cfg.force_no_merge:
        return fa

    depth = fpt.depths()
    red = [fa.root]
    red_set = {fa.root}
    merges = 0

    while True:
        frontier = _blue_frontier(fa, red, red_set)
        if not frontier:
            break
        blue, source, item = min(
            frontier,
            key=lambda b: (depth[b[0]], -fa.nodes[b[1]].arcs[b[2]].frequency, b[0]))

        target = next((r for r in red if compatible(fa, r, blue, cfg)), None)
        if target is None:
            bisect.insort(red, blue)
            red_set.add(blue)
        else:
            merge(fa, target, blue, ingoing=[(source, item)])
            merges += 1

    fa.provenance['merges'] = merges
    _log.info("Inference (%s, alpha=%g): %d FPT nodes -> %d states after %d merges",
              cfg.mode, cfg.alpha, len(fpt), len(fa), merges)
    return fa
