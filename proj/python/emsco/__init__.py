"""Python access to the EMSCO search core.

Commands mirror the ``emsco`` executable. Each returns the artifacts it would
write as a mapping of path to text; pass ``write=True`` to also write them.
"""

import json
from typing import Dict, Iterable, Mapping, Optional

from ._emsco import (
    Chromosome,
    EmscoError,
    aggregate_metric,
    count_space,
    default_max_stages,
    enumerate_space,
    neighbors,
    space_ratio,
    stirling2,
)
from . import _emsco

COMMANDS = ("synth", "split", "evolve", "bruteforce", "baseline", "neighborhood", "report")


def run(
    command: str,
    config: Optional[Mapping] = None,
    overrides: Iterable[str] = (),
    write: bool = False,
) -> Dict[str, str]:
    if command not in COMMANDS:
        raise ValueError(f"unknown command {command!r}; expected one of {COMMANDS}")
    text = json.dumps(dict(config)) if config else ""
    artifacts = _emsco._run_command(command, text, list(overrides))
    if write:
        _emsco._commit(artifacts)
    return dict(artifacts)


def evolve(config: Optional[Mapping] = None, overrides: Iterable[str] = ()) -> dict:
    """Runs the evolutionary search and returns the parsed run report."""
    artifacts = run("evolve", config, overrides)
    (text,) = artifacts.values()
    return json.loads(text)


__all__ = [
    "COMMANDS",
    "Chromosome",
    "EmscoError",
    "aggregate_metric",
    "count_space",
    "default_max_stages",
    "enumerate_space",
    "evolve",
    "neighbors",
    "run",
    "space_ratio",
    "stirling2",
]
