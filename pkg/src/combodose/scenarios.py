"""Bundled toxicity scenarios and the scenario file format.

A scenario file is a JSON array of objects ``{"name": ..., "rows": [[p, ...], ...]}``
with the truth matrix row-major (row = drug A level). A single object instead
of an array is also accepted. The fifteen evaluation scenarios ship with the
package and can be extended by pointing the loader at a user file.
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

import numpy as np

from .core import Scenario

_BUNDLED: dict[str, Scenario] | None = None


def _parse_entry(obj: dict) -> Scenario:
    try:
        name = str(obj["name"])
        rows = obj["rows"]
    except (KeyError, TypeError) as exc:
        raise ValueError("scenario entries need 'name' and 'rows'") from exc
    return Scenario(name=name, truth=np.asarray(rows, dtype=float))


def parse_scenarios(text: str) -> dict[str, Scenario]:
    data = json.loads(text)
    if isinstance(data, dict):
        data = [data]
    out: dict[str, Scenario] = {}
    for obj in data:
        sc = _parse_entry(obj)
        if sc.name in out:
            raise ValueError(f"duplicate scenario name {sc.name!r}")
        out[sc.name] = sc
    return out


def load_scenarios(path: str | Path) -> dict[str, Scenario]:
    return parse_scenarios(Path(path).read_text())


def bundled_scenarios() -> dict[str, Scenario]:
    """The fifteen shipped evaluation scenarios, keyed by name '1'..'15'."""
    global _BUNDLED
    if _BUNDLED is None:
        text = resources.files("combodose.data").joinpath("scenarios.json").read_text()
        _BUNDLED = parse_scenarios(text)
    return _BUNDLED


def get_scenario(name: str | int, path: str | Path | None = None) -> Scenario:
    """Look up a scenario by name, optionally from a user file."""
    table = load_scenarios(path) if path is not None else bundled_scenarios()
    key = str(name)
    if key not in table:
        raise KeyError(f"unknown scenario {key!r}; available: {sorted(table)}")
    return table[key]
