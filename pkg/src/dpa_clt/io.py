"""CSV/JSON persistence and run manifests.

CSV: header row, comma separated, LF endings, floats in shortest round-trip
form (``repr``).  JSON: UTF-8, sorted keys, trailing newline.
"""

from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from . import __version__


def _cell(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])
    return path


def _parse(text: str):
    try:
        return int(text)
    except ValueError:
        return float(text)


def read_csv(path) -> tuple[list[str], list[list]]:
    """Header and rows, numeric fields parsed back to int or float."""
    with Path(path).open(newline="", encoding="utf-8") as fh:
        r = csv.reader(fh)
        header = next(r)
        return header, [[_parse(x) for x in row] for row in r]


def dumps_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(dumps_json(obj), encoding="utf-8", newline="\n")
    return path


def read_json(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


@dataclass
class RunManifest:
    """What was run, with which inputs, and digests of everything written.

    Timestamps live only here, never in the outputs themselves, so rerunning
    a command reproduces its outputs byte for byte.
    """

    command: str
    argv: list[str]
    params: dict
    seeds: dict = field(default_factory=dict)
    version: str = __version__
    started: str = field(default_factory=_now)
    finished: str | None = None
    inputs: dict[str, str] = field(default_factory=dict)
    outputs: dict[str, str] = field(default_factory=dict)

    def add_input(self, path) -> None:
        self.inputs[str(path)] = sha256_file(path)

    def add_output(self, path) -> None:
        self.outputs[str(path)] = sha256_file(path)

    def finish(self) -> "RunManifest":
        self.finished = _now()
        return self

    def write(self, path) -> Path:
        return write_json(path, asdict(self))

    @classmethod
    def read(cls, path) -> "RunManifest":
        return cls(**read_json(path))

    def verify_outputs(self) -> dict[str, bool]:
        """Recompute digests of the listed outputs."""
        return {p: Path(p).exists() and sha256_file(p) == d for p, d in self.outputs.items()}
