from abc import ABC, abstractmethod
from typing import Any, Dict

from core.hmm_ops import ObservationSet
from core.observer import ProgressObserver


class BaseUI(ProgressObserver, ABC):
    """Base interface for all UI implementations."""

    @abstractmethod
    def render_stats(self, title: str, stats: Dict[str, Any]) -> None:
        """Render the stats dictionary of a pipeline stage."""
        pass

    @abstractmethod
    def render_predictions(self, prefix, observations: ObservationSet) -> None:
        """Render ranked suffixes for a prefix."""
        pass

    @abstractmethod
    def render_validation(self, summary: Dict[str, Any]) -> None:
        """Render a validation summary."""
        pass

    @abstractmethod
    def show_message(self, message: str) -> None:
        """Show a message to the user."""
        pass

    @abstractmethod
    def show_error(self, message: str) -> None:
        """Show an error to the user."""
        pass
