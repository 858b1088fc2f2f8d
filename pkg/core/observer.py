"""
Observer interface for model-update progress.
The update loop publishes one progress record per iteration; UIs and
recorders subscribe to render or keep them.
"""

import logging
from abc import ABC, abstractmethod
from typing import Any, Dict, List, Optional

_log = logging.getLogger(__name__)


class ProgressObserver(ABC):
    """Abstract base class for components that follow an update loop."""

    @abstractmethod
    def update(self, progress: Dict[str, Any]) -> None:
        """
        Called after every iteration of the loop.

        Args:
            progress: iteration number, mape and log_likelihood (None
                before the first re-estimation)
        """
        pass


class ProgressRecorder(ProgressObserver):
    """Keeps every progress record in memory."""

    def __init__(self):
        self.history: List[Dict[str, Any]] = []

    def update(self, progress: Dict[str, Any]) -> None:
        self.history.append(dict(progress))

    @property
    def mapes(self) -> List[float]:
        return [record['mape'] for record in self.history]


class Subject:
    """Publishes progress records to attached observers."""

    def __init__(self):
        self._observers: List[ProgressObserver] = []
        self.last_progress: Optional[Dict[str, Any]] = None

    def attach(self, observer: ProgressObserver) -> None:
        """Subscribe an observer; attaching twice is a no-op."""
        if observer not in self._observers:
            self._observers.append(observer)

    def detach(self, observer: ProgressObserver) -> None:
        """Unsubscribe an observer that may never have been attached."""
        self._observers = [o for o in self._observers if o is not observer]

    def notify(self, progress: Dict[str, Any]) -> None:
        self.last_progress = dict(progress)
        _log.debug("progress %s", progress)
        for observer in self._observers:
            observer.update(progress)
