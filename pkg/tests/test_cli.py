#!/usr/bin/env python3
"""
End-to-end tests for the trip_hmm command line.
Every test works in its own temporary directory.
"""

import json
import sys
import tempfile
from pathlib import Path

# Add repository root to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent))

import trip_hmm
from core.automata import Hmm, StochasticArc, StochasticAutomaton, observation_probabilities
from core.gi import FrequencyAutomaton, merge
from core.persistence import PersistenceManager
from core.synthetic import worked_example_model
from core.trie import build_fpt

REVIEWS = [
    {'user': 'b', 'area': 4, 'date': '2019-05-01'},
    {'user': 'b', 'area': 2, 'date': '2019-05-02'},
    {'user': 'a', 'area': 0, 'date': '2019-05-01'},
    {'user': 'a', 'area': 5, 'date': '2019-05-03'},
    {'user': 'a', 'area': 2, 'date': '2019-05-04'},
    {'user': 'a', 'area': 1, 'date': '2019-05-31'},
    {'user': 'a', 'area': 3, 'date': '2019-06-20'},
    {'user': 'a', 'area': 3, 'date': '2019-06-22'},
    {'user': 'a', 'area': 0, 'date': '2019-05-01'},
    {'user': 'c', 'area': 7, 'date': '2019-07-01'},
]


def run(*argv):
    return trip_hmm.main([str(a) for a in argv])


def write_reviews(path, records, extra_lines=()):
    lines = [json.dumps(r) for r in records] + list(extra_lines)
    path.write_text('\n'.join(lines) + '\n')


def load(path):
    return json.loads(Path(path).read_text())


def build_models(d, n=2000, seed=3):
    """generate -> build -> infer -> convert inside directory d."""
    assert run('generate', '--model', 'five-state', '-n', n, '--seed', seed, '--output', d / 'seq.txt') == 0
    assert run('build', '--input', d / 'seq.txt', '--output', d / 'fpt.json') == 0
    assert run('infer', '--input', d / 'fpt.json', '--output', d / 'automaton.json') == 0
    assert run('convert', '--input', d / 'automaton.json', '--output', d / 'hmm.json',
               '--stochastic', d / 'stochastic.json') == 0


def test_full_pipeline():
    with tempfile.TemporaryDirectory() as tmp:
        d = Path(tmp)
        build_models(d)
        assert len((d / 'seq.txt').read_text().splitlines()) == 2000
        assert load(d / 'fpt.json')['kind'] == 'fpt'
        hmm = load(d / 'hmm.json')
        assert hmm['schema'] == 'trip-hmm/1'
        assert hmm['data']['provenance']['inference']['merges'] > 0

        assert run('predict', '0', '--input', d / 'hmm.json', '--length', 2,
                   '--output', d / 'predictions.json') == 0
        predictions = load(d / 'predictions.json')['data']
        assert predictions['prefix'] == [0]
        assert predictions['fallback'] is False
        assert 0 < predictions['total_probability'] <= 1 + 1e-9
        assert run('predict', '0 5', '--input', d / 'hmm.json', '--output', d / 'predictions.json') == 0
        assert load(d / 'predictions.json')['data']['prefix'] == [0, 5]

        assert run('update', '--input', d / 'hmm.json', '--sequences', d / 'seq.txt',
                   '--output', d / 'hmm_updated.json', '--max-iters', 3) == 0
        trajectory = load(d / 'hmm_updated.json')['data']['provenance']['update']
        assert len(trajectory['mapes']) == trajectory['iterations'] + 1

        assert run('validate', '--input', d / 'hmm_updated.json', '--sequences', d / 'seq.txt',
                   '--output', d / 'report.json', '--stats') == 0
        report = load(d / 'report.json')['data']
        assert set(report) == {'sequences', 'predictions', 'relaxation', 'scope'}
        assert (d / 'report.csv').read_text().startswith('sequence,R,P,APE')
        assert (d / 'report.dat').exists()


def test_pipeline_is_deterministic():
    outputs = []
    for _ in range(2):
        with tempfile.TemporaryDirectory() as tmp:
            d = Path(tmp)
            build_models(d, n=500, seed=11)
            outputs.append([(d / name).read_bytes()
                            for name in ('seq.txt', 'fpt.json', 'automaton.json', 'hmm.json')])
    assert outputs[0] == outputs[1]


def test_generate_from_saved_automaton():
    with tempfile.TemporaryDirectory() as tmp:
        d = Path(tmp)
        model = worked_example_model().automaton
        PersistenceManager().save_artifact(d / 'model.json', 'stochastic', model.to_dict())
        assert run('generate', '--automaton', d / 'model.json', '-n', 50, '--output', d / 'seq.txt') == 0
        lines = (d / 'seq.txt').read_text().splitlines()
        assert len(lines) == 50
        assert all(line.split()[-1] in ('2', '6', '7') for line in lines)


def test_generate_rejects_terminating_root():
    with tempfile.TemporaryDirectory() as tmp:
        d = Path(tmp)
        sa = StochasticAutomaton(0, {0: 0.5}, {0: {1: StochasticArc(0.5, 0)}})
        PersistenceManager().save_artifact(d / 'model.json', 'stochastic', sa.to_dict())
        assert run('generate', '--automaton', d / 'model.json', '--output', d / 'seq.txt') == 2


def test_no_merge_validates_exactly():
    with tempfile.TemporaryDirectory() as tmp:
        d = Path(tmp)
        assert run('generate', '--model', 'worked-example', '-n', 200, '--output', d / 'seq.txt') == 0
        assert run('build', '--input', d / 'seq.txt', '--output', d / 'fpt.json') == 0
        assert run('infer', '--no-merge', '--input', d / 'fpt.json', '--output', d / 'automaton.json') == 0
        assert run('convert', '--input', d / 'automaton.json', '--output', d / 'hmm.json') == 0
        assert run('validate', '--scope', 'all', '--input', d / 'hmm.json', '--sequences', d / 'seq.txt',
                   '--output', d / 'report.json') == 0
        assert load(d / 'report.json')['data']['sequences']['mape'] < 1e-9


def test_convert_worked_automaton():
    with tempfile.TemporaryDirectory() as tmp:
        d = Path(tmp)
        fa = FrequencyAutomaton.from_graph(build_fpt([[2]] * 4 + [[7]] * 2 + [[1, 2]] * 2 + [[1, 6]] * 2))
        merge(fa, 0, 1)
        PersistenceManager().save_artifact(d / 'automaton.json', 'automaton', fa.to_dict())
        assert run('convert', '--input', d / 'automaton.json', '--output', d / 'hmm.json') == 0
        hmm = Hmm.from_dict(load(d / 'hmm.json')['data'])
        observed = observation_probabilities(hmm)
        for item, expected in ((1, 0.286), (6, 0.143), (7, 0.143), (2, 0.429)):
            assert abs(observed[item] - expected) < 5e-3


def test_ingest_reviews():
    with tempfile.TemporaryDirectory() as tmp:
        d = Path(tmp)
        write_reviews(d / 'reviews.jsonl', REVIEWS)
        assert run('ingest', '--input', d / 'reviews.jsonl', '--output', d / 'seq.txt') == 0
        assert (d / 'seq.txt').read_text().splitlines() == ['0 5 2', '3 3', '4 2']
        report = load(d / 'seq.report.json')
        assert report['kind'] == 'report'
        assert report['data']['sequences_dropped'] == 2


def test_ingest_labels_reach_the_hmm():
    with tempfile.TemporaryDirectory() as tmp:
        d = Path(tmp)
        records = [{'user': 'u', 'area': 'Louvre', 'date': '2019-05-01'},
                   {'user': 'u', 'area': 'Orsay', 'date': '2019-05-02'}]
        write_reviews(d / 'reviews.jsonl', records)
        assert run('ingest', '--input', d / 'reviews.jsonl', '--output', d / 'seq.txt') == 0
        assert run('build', '--input', d / 'seq.txt', '--output', d / 'fpt.json') == 0
        assert run('infer', '--input', d / 'fpt.json', '--output', d / 'automaton.json') == 0
        assert run('convert', '--input', d / 'automaton.json', '--output', d / 'hmm.json',
                   '--labels', d / 'seq.report.json') == 0
        assert load(d / 'hmm.json')['data']['item_labels'] == {'0': 'Louvre', '1': 'Orsay'}
        assert run('predict', '0', '--input', d / 'hmm.json', '--output', d / 'predictions.json') == 0
        predictions = load(d / 'predictions.json')['data']
        assert predictions['item_labels'] == {'0': 'Louvre', '1': 'Orsay'}


def test_ingest_empty_file():
    with tempfile.TemporaryDirectory() as tmp:
        d = Path(tmp)
        (d / 'reviews.jsonl').write_text('')
        assert run('ingest', '--input', d / 'reviews.jsonl', '--output', d / 'seq.txt') == 0
        assert (d / 'seq.txt').read_text() == ''


def test_ingest_skips_malformed_lines():
    with tempfile.TemporaryDirectory() as tmp:
        d = Path(tmp)
        write_reviews(d / 'reviews.jsonl', REVIEWS, extra_lines=['{broken', '{"user": "c"}'])
        assert run('ingest', '--input', d / 'reviews.jsonl', '--output', d / 'seq.txt') == 0
        report = load(d / 'seq.report.json')['data']
        assert report['reviews_skipped'] == 2
        assert len(report['diagnostics']) == 2


def test_missing_input_exits_2():
    with tempfile.TemporaryDirectory() as tmp:
        d = Path(tmp)
        assert run('build', '--input', d / 'absent.txt', '--output', d / 'fpt.json') == 2


def test_malformed_sequence_file_exits_2():
    with tempfile.TemporaryDirectory() as tmp:
        d = Path(tmp)
        (d / 'seq.txt').write_text('1 2\nx y\n')
        assert run('build', '--input', d / 'seq.txt', '--output', d / 'fpt.json') == 2
        assert not (d / 'fpt.json').exists()


def test_wrong_artifact_kind_exits_2():
    with tempfile.TemporaryDirectory() as tmp:
        d = Path(tmp)
        build_models(d, n=200)
        assert run('predict', '0', '--input', d / 'fpt.json') == 2


def test_malformed_model_payload_exits_2():
    with tempfile.TemporaryDirectory() as tmp:
        d = Path(tmp)
        store = PersistenceManager()
        store.save_artifact(d / 'hmm.json', 'hmm', {'alphabet': [1]})
        assert run('predict', '1', '--input', d / 'hmm.json') == 2
        store.save_artifact(d / 'fpt.json', 'fpt', {'root': 'zero'})
        assert run('infer', '--input', d / 'fpt.json', '--output', d / 'a.json') == 2
        store.save_artifact(d / 'automaton.json', 'automaton', [])
        assert run('convert', '--input', d / 'automaton.json', '--output', d / 'h.json') == 2
        store.save_artifact(d / 'model.json', 'stochastic', {'root': 0})
        assert run('generate', '--automaton', d / 'model.json', '--output', d / 'seq.txt') == 2
        assert not (d / 'a.json').exists()
        assert not (d / 'h.json').exists()


def test_corrupted_hmm_exits_3():
    with tempfile.TemporaryDirectory() as tmp:
        d = Path(tmp)
        build_models(d, n=200)
        document = load(d / 'hmm.json')
        document['data']['initial'][0]['p'] += 0.5
        (d / 'hmm.json').write_text(json.dumps(document))
        assert run('predict', '0', '--input', d / 'hmm.json') == 3


def test_bad_prefix_and_config_exit_2():
    with tempfile.TemporaryDirectory() as tmp:
        d = Path(tmp)
        build_models(d, n=200)
        assert run('predict', 'zero', '--input', d / 'hmm.json') == 2
        (d / 'config.json').write_text(json.dumps({'gi': {'alpha': 2.0}}))
        assert run('infer', '--config', d / 'config.json', '--input', d / 'fpt.json',
                   '--output', d / 'a.json') == 2
        assert run('infer', '--alpha', 0, '--input', d / 'fpt.json', '--output', d / 'a.json') == 2


def main():
    """Run the command-line tests."""
    print("Command Line Test Suite")
    print("=" * 50)
    try:
        for name, test in sorted(globals().items()):
            if name.startswith('test_') and callable(test):
                test()
                print(f"  {name} passed")
        print("\nAll command-line tests passed!")
    except Exception as e:
        print(f"\nTest failed with error: {e}")
        import traceback
        traceback.print_exc()
        sys.exit(1)


if __name__ == "__main__":
    main()
