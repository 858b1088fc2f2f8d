"""
Console UI for the trip HMM pipeline.
Plain-text rendering of stage stats, predictions, reports and update progress.
"""

import sys
from typing import Any, Dict, Optional

from core.automata import render_item
from .base_ui import BaseUI


class ConsoleUI(BaseUI):
    """Console-based UI implementation."""

    def __init__(self, stream=None, item_labels: Optional[Dict[str, str]] = None):
        self.stream = stream if stream is not None else sys.stdout
        self.item_labels = dict(item_labels or {})

    def _print(self, text: str = "") -> None:
        print(text, file=self.stream)

    def _label(self, item: int) -> str:
        rendered = render_item(item)
        label = self.item_labels.get(str(item))
        return f"{rendered} ({label})" if label else rendered

    def render_stats(self, title, stats):
        """Render a stats dictionary as aligned key/value lines."""
        self._print(title.upper())
        self._print("-" * len(title))
        width = max((len(key) for key in stats), default=0)
        for key, value in stats.items():
            if isinstance(value, float):
                value = f"{value:.6g}"
            self._print(f"{key.ljust(width)}  {value}")
        self._print()

    def render_predictions(self, prefix, observations):
        shown = ' '.join(str(item) for item in prefix) or '(empty)'
        self._print(f"PREFIX: {shown}")
        if observations.fallback:
            self._print("  prefix not observable, predicted from the start")
        elif observations.anchor is not None:
            self._print(f"  anchored at node {observations.anchor}")
        for rank, (suffix, probability) in enumerate(observations.entries, start=1):
            items = ' '.join(self._label(item) for item in suffix)
            self._print(f"{rank:>3}. {probability:.6f}  {items}")
        self._print(f"Total: {observations.total_probability:.6f}")

    def render_validation(self, summary):
        sequences = summary['sequences']
        predictions = summary['predictions']
        relaxation = summary['relaxation']
        self._print("VALIDATION:")
        self._print("-----------")
        self._print(f"Sequences:   {sequences['sequences']:>6}  MAPE {sequences['mape']:.2%}"
                    f"  (APE {sequences['min_ape']:.2%} to {sequences['max_ape']:.2%})")
        self._print(f"Predictions: {predictions['sequences']:>6}  MAPE {predictions['mape']:.2%}"
                    f"  (|B| = {predictions['split']})")
        self._print(f"Relaxation:  max variation {relaxation['max_variation']:.2%}"
                    f"  (bound {relaxation['bound']:.2%})")
        for anomaly in relaxation['anomalies']:
            self._print(f"  item {self._label(anomaly['item'])} at position {anomaly['position']}:"
                        f" {anomaly['variation']:.2%}")
        self._print()

    def update(self, progress: Dict[str, Any]) -> None:
        """Render one update-loop iteration."""
        log_likelihood = progress.get('log_likelihood')
        ll = "" if log_likelihood is None else f"  log-likelihood {log_likelihood:.4f}"
        self._print(f"iteration {progress['iteration']:>3}  MAPE {progress['mape']:.2%}{ll}")

    def show_message(self, message):
        """Show a message to the user."""
        self._print(message)

    def show_error(self, message):
        print(f"Error: {message}", file=sys.stderr)
