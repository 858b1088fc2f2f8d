"""
Exception hierarchy for the trip HMM toolkit.
The CLI maps these to exit codes (see trip_hmm.py).
"""

from typing import List, Optional


class TripHmmError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 1


class InputError(TripHmmError):
    """Bad input records or files."""

    exit_code = 2

    def __init__(self, message: str, diagnostics: Optional[List[str]] = None):
        super().__init__(message)
        self.diagnostics: List[str] = list(diagnostics or [])


class SchemaError(InputError):
    """Artifact does not match the expected schema, kind or version."""


class EmptySequenceError(InputError):
    """An empty sequence reached the prefix tree builder."""

    def __init__(self, index: int):
        super().__init__(f"Empty sequence at input index {index}")
        self.index = index


class ConfigError(TripHmmError):
    """Invalid configuration value."""

    exit_code = 2


class InvariantViolation(TripHmmError):
    """A model breaks one of its structural invariants."""

    exit_code = 3

    def __init__(self, invariant: str, detail: str):
        super().__init__(f"Invariant '{invariant}' violated: {detail}")
        self.invariant = invariant
        self.detail = detail


class InferenceError(TripHmmError):
    """Grammatical inference hit an undefined quantity."""


class UnobservableSequenceError(TripHmmError):
    """The sequence has probability zero under the model."""

    def __init__(self, sequence):
        super().__init__(f"sequence not observable: {list(sequence)}")
        self.sequence = list(sequence)
