"""
Persistence manager for pipeline artifacts.
Handles saving and loading sequence files, model JSON artifacts and reports.
"""

import json
import os
from pathlib import Path
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence as Seq, TypeVar, Union

from .errors import InputError, SchemaError
from .ingest import Sequence

SCHEMA = "trip-hmm/1"
ARTIFACT_KINDS = ('fpt', 'automaton', 'stochastic', 'hmm', 'predictions', 'report')

PathLike = Union[str, Path]
T = TypeVar("T")


class PersistenceManager:
    """
    Reads and writes pipeline artifacts.

    Artifact layout:
    - JSON artifacts: {"schema": SCHEMA, "kind": <kind>, "data": <payload>}
    - sequence files: one sequence per line, items separated by spaces
    Every write goes to a temporary file first and is renamed into place, and
    JSON is written canonically so identical inputs give identical bytes.
    """

    def __init__(self, base_dir: Optional[PathLike] = None):
        self.base_dir = Path(base_dir).expanduser() if base_dir is not None else None

    def resolve(self, filename: PathLike) -> Path:
        path = Path(filename).expanduser()
        if self.base_dir is not None and not path.is_absolute():
            path = self.base_dir / path
        return path

    def write_text(self, filename: PathLike, text: str) -> Path:
        """
        Atomically write text to a file.

        Args:
            filename: Target path (relative paths resolve against base_dir)
            text: File content

        Returns:
            The path written
        """
        path = self.resolve(filename)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_name(path.name + f".tmp.{os.getpid()}")
        try:
            with open(tmp, 'w', encoding='utf-8', newline='\n') as f:
                f.write(text)
            os.replace(tmp, path)
        except OSError as e:
            tmp.unlink(missing_ok=True)
            raise RuntimeError(f"Failed to write {path}: {e}")
        return path

    def read_text(self, filename: PathLike) -> str:
        path = self.resolve(filename)
        try:
            with open(path, 'r', encoding='utf-8') as f:
                return f.read()
        except FileNotFoundError:
            raise InputError(f"File not found: {path}")
        except OSError as e:
            raise InputError(f"Failed to read {path}: {e}")

    def save_json(self, filename: PathLike, data: Any) -> Path:
        return self.write_text(filename, json.dumps(data, indent=2, sort_keys=True) + '\n')

    def save_artifact(self, filename: PathLike, kind: str, payload: Dict[str, Any]) -> Path:
        """
        Save a model or report artifact.

        Args:
            filename: Target path
            kind: One of ARTIFACT_KINDS
            payload: The object's to_dict() output

        Returns:
            The path written
        """
        if kind not in ARTIFACT_KINDS:
            raise ValueError(f"Unknown artifact kind: {kind}")
        return self.save_json(filename, {'schema': SCHEMA, 'kind': kind, 'data': payload})

    def load_artifact(self, filename: PathLike, kind: str) -> Dict[str, Any]:
        """
        Load an artifact and check its schema and kind.

        Returns:
            The artifact payload
        """
        text = self.read_text(filename)
        try:
            document = json.loads(text)
        except ValueError as e:
            raise SchemaError(f"{filename}: not valid JSON ({e})")
        if not isinstance(document, dict) or 'data' not in document:
            raise SchemaError(f"{filename}: not a pipeline artifact")
        if document.get('schema') != SCHEMA:
            raise SchemaError(f"{filename}: schema {document.get('schema')!r}, expected {SCHEMA!r}")
        if document.get('kind') != kind:
            raise SchemaError(f"{filename}: holds a '{document.get('kind')}' artifact, expected '{kind}'")
        return document['data']

    def load_model(self, filename: PathLike, kind: str, decode: Callable[[Dict[str, Any]], T]) -> T:
        """
        Load an artifact and decode its payload.

        A payload with missing or mistyped fields raises SchemaError naming
        the file; invariant checks run by decode raise unchanged.
        """
        payload = self.load_artifact(filename, kind)
        try:
            return decode(payload)
        except (KeyError, TypeError, ValueError, IndexError, AttributeError) as e:
            raise SchemaError(f"{filename}: malformed '{kind}' payload ({type(e).__name__}: {e})")

    def save_sequences(self, filename: PathLike, sequences: Iterable[Seq[int]]) -> Path:
        lines = [' '.join(str(item) for item in sequence) for sequence in sequences]
        return self.write_text(filename, ''.join(line + '\n' for line in lines))

    def load_sequences(self, filename: PathLike) -> List[Sequence]:
        """
        Load a sequence file; blank lines are ignored.

        Raises:
            InputError: naming every malformed line
        """
        sequences: List[Sequence] = []
        diagnostics: List[str] = []
        for line_no, line in enumerate(self.read_text(filename).splitlines(), start=1):
            if not line.strip():
                continue
            try:
                items = tuple(int(token) for token in line.split())
            except ValueError:
                diagnostics.append(f"line {line_no}: not a list of integers: {line!r}")
                continue
            if any(item < 0 for item in items):
                diagnostics.append(f"line {line_no}: negative item")
                continue
            sequences.append(Sequence(items))
        if diagnostics:
            raise InputError(f"{filename}: {len(diagnostics)} malformed lines", diagnostics)
        return sequences
