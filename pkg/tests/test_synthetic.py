#!/usr/bin/env python3
"""
Tests for the synthetic models and the sequence generator.
"""

import sys
from collections import Counter
from pathlib import Path

import numpy as np
import pytest

# Add repository root to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent))

from core.automata import StochasticArc, StochasticAutomaton
from core.errors import ConfigError
from core.synthetic import (SyntheticModel, five_state_model, generate_sequences, random_stochastic_automaton,
                            single_state_model, worked_example_model)


def test_same_seed_same_corpus():
    first = generate_sequences(five_state_model(), 200, seed=4)
    second = generate_sequences(five_state_model(), 200, seed=4)
    other = generate_sequences(five_state_model(), 200, seed=5)
    assert [s.items for s in first] == [s.items for s in second]
    assert [s.items for s in first] != [s.items for s in other]


def test_model_seed_is_default():
    model = worked_example_model(seed=9)
    assert [s.items for s in generate_sequences(model, 50)] == \
        [s.items for s in generate_sequences(model, 50, seed=9)]


def test_deterministic_model():
    sa = StochasticAutomaton(0, {0: 0.0, 1: 1.0}, {0: {1: StochasticArc(1.0, 1)}, 1: {}})
    corpus = generate_sequences(SyntheticModel(sa), 25)
    assert [s.items for s in corpus] == [(1,)] * 25


def test_n_must_be_positive():
    with pytest.raises(ValueError):
        generate_sequences(five_state_model(), 0)


def test_terminating_root_rejected():
    sa = StochasticAutomaton(0, {0: 0.5}, {0: {1: StochasticArc(0.5, 0)}})
    with pytest.raises(ConfigError):
        SyntheticModel(sa)


def test_worked_model_frequencies():
    corpus = generate_sequences(worked_example_model(), 20000, seed=1)
    last = Counter(s.items[-1] for s in corpus)
    n = len(corpus)
    for item, p in ((2, 6 / 10), (6, 2 / 10), (7, 2 / 10)):
        # every walk loops on 1 until it leaves on 2, 6 or 7
        assert abs(last[item] / n - p) < 4 * np.sqrt(p * (1 - p) / n)
    assert all(set(s.items[:-1]) <= {1} for s in corpus)


def test_single_state_lengths():
    corpus = generate_sequences(single_state_model(stop=0.5), 20000, seed=2)
    mean = np.mean([len(s) for s in corpus])
    # one forced item, then a geometric number of extra ones
    assert mean == pytest.approx(2.0, abs=0.05)


def test_generated_items_stay_in_alphabet():
    sa = five_state_model().automaton
    alphabet = set(sa.alphabet())
    for sequence in generate_sequences(five_state_model(), 500, seed=3):
        assert len(sequence) >= 1
        assert set(sequence.items) <= alphabet


def test_max_length_cuts_walks():
    sa = StochasticAutomaton(0, {0: 0.0, 1: 0.01}, {
        0: {3: StochasticArc(1.0, 1)}, 1: {3: StochasticArc(0.99, 1)}})
    corpus = generate_sequences(SyntheticModel(sa), 20, seed=0, max_length=5)
    assert max(len(s) for s in corpus) <= 5


def test_random_automaton_is_normalised():
    rng = np.random.default_rng(6)
    for _ in range(20):
        sa = random_stochastic_automaton(rng, n_states=5, alphabet_size=4, root_terminates=False)
        assert sa.termination[sa.root] == 0.0
        SyntheticModel(sa)


def main():
    """Run the synthetic model tests."""
    print("Synthetic Model Test Suite")
    print("=" * 50)
    try:
        for name, test in sorted(globals().items()):
            if name.startswith('test_') and callable(test):
                test()
                print(f"  {name} passed")
        print("\nAll synthetic model tests passed!")
    except Exception as e:
        print(f"\nTest failed with error: {e}")
        import traceback
        traceback.print_exc()
        sys.exit(1)


if __name__ == "__main__":
    main()
