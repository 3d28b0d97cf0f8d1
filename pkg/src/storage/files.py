"""Atomic file output and headered CSV tables.

Every file is written to a temporary sibling and renamed into place once all
files of a command are complete, so a failed command leaves no partial output.
"""

import csv
import logging
import os
from contextlib import contextmanager
from pathlib import Path
from tempfile import NamedTemporaryFile
from typing import Iterator, List, Sequence, TextIO, Tuple, Union

import numpy as np

from ..errors import PalmError

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


class StagedFiles:
    """Temporary siblings of several outputs, renamed into place together"""

    def __init__(self) -> None:
        self._staged: List[Tuple[Path, TextIO]] = []

    def open(self, path: PathLike) -> TextIO:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = NamedTemporaryFile(
            "w", dir=path.parent, prefix=f".{path.name}.", suffix=".tmp",
            delete=False, newline="", encoding="utf-8",
        )
        self._staged.append((path, tmp))
        return tmp

    def _commit(self) -> None:
        for _, tmp in self._staged:
            tmp.close()
        for path, tmp in self._staged:
            os.replace(tmp.name, path)
            logger.debug(f"Wrote {path}")

    def _discard(self) -> None:
        for _, tmp in self._staged:
            tmp.close()
            Path(tmp.name).unlink(missing_ok=True)


@contextmanager
def staged_outputs() -> Iterator[StagedFiles]:
    """Stage any number of files; none appears unless the whole block succeeds"""
    stage = StagedFiles()
    try:
        yield stage
        stage._commit()
    except BaseException:
        stage._discard()
        raise


@contextmanager
def atomic_write(path: PathLike) -> Iterator[TextIO]:
    """Open a temporary file next to ``path``; rename it over ``path`` on success"""
    with staged_outputs() as stage:
        yield stage.open(path)


def format_value(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_rows(f: TextIO, header: Sequence[str], rows) -> None:
    """Comma-separated, '.' decimal, header row, LF line endings"""
    writer = csv.writer(f, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_value(v) for v in row])


def write_table(path: PathLike, header: Sequence[str], rows) -> None:
    with atomic_write(path) as f:
        write_rows(f, header, rows)


def read_table(path: PathLike) -> Tuple[List[str], np.ndarray]:
    """Header and a float matrix (zero rows for a header-only file)"""
    path = Path(path)
    if not path.exists():
        raise PalmError(f"File not found: {path}")
    with path.open("r", newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise PalmError(f"Empty CSV file (no header): {path}")
        try:
            rows = [[float(v) for v in row] for row in reader if row]
        except ValueError as e:
            raise PalmError(f"Non-numeric value in {path}: {e}") from e
    if any(len(row) != len(header) for row in rows):
        raise PalmError(f"Ragged rows in {path}: expected {len(header)} columns")
    data = np.asarray(rows, dtype=float).reshape(len(rows), len(header))
    return header, data
