"""JSON manifests describing a chart with its optional splittings, connections and sections.

Exact rationals are always strings (``"3/2"``); polynomials use the text
grammar of :func:`~tangent_groupoid.polyfields.parse_polynomial`. Index keys
are 1-based and comma separated: ``"3,1"`` for a splitting correction
``s_31``, ``"1,1,2"`` for the Christoffel symbol ``Gamma_{11}^2``.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any

from .exponential_charts import ChartDomain, GradedConnection
from .filtration import FilteredChart, Splitting, canonical_splitting
from .polyfields import PolynomialParseError
from .tangent_algebroid import make_section


class ManifestError(ValueError):
    def __init__(self, message: str, line: int = 1, column: int = 1):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


def _locate(text: str, needle: str) -> tuple[int, int]:
    pos = text.find(needle)
    if pos < 0:
        return 1, 1
    line = text.count("\n", 0, pos) + 1
    return line, pos - (text.rfind("\n", 0, pos) + 1) + 1


def _rational(value, what: str) -> Fraction:
    if isinstance(value, bool) or not isinstance(value, (str, int)):
        raise ValueError(f"{what}: exact rationals must be strings or integers, got {value!r}")
    try:
        return Fraction(value)
    except (ValueError, ZeroDivisionError):
        raise ValueError(f"{what}: not a rational number: {value!r}") from None


def _indices(key: str, count: int, n: int, what: str) -> tuple[int, ...]:
    parts = key.split(",")
    if len(parts) != count or not all(p.strip().isdigit() for p in parts):
        raise ValueError(f"{what}: key {key!r} must be {count} comma-separated indices")
    idx = tuple(int(p) - 1 for p in parts)
    if not all(0 <= i < n for i in idx):
        raise ValueError(f"{what}: index out of range in {key!r}")
    return idx


@dataclass
class Manifest:
    name: str
    chart: FilteredChart
    splittings: dict[str, Splitting]
    connections: dict[str, GradedConnection]
    sections: dict[str, Any] = field(default_factory=dict)
    run: dict[str, Any] = field(default_factory=dict)
    source: dict = field(default_factory=dict, repr=False)

    def splitting(self, name: str | None = None) -> Splitting:
        name = name or self.run.get("splitting", "canonical")
        if name not in self.splittings:
            raise KeyError(f"unknown splitting {name!r}; have {sorted(self.splittings)}")
        return self.splittings[name]

    def connection(self, name: str | None = None) -> GradedConnection:
        name = name or self.run.get("connection", "flat")
        if name not in self.connections:
            raise KeyError(f"unknown connection {name!r}; have {sorted(self.connections)}")
        return self.connections[name]

    def domain(self, **overrides) -> ChartDomain:
        params = {"radius": float(self.run.get("radius", 1.0)),
                  "steps": int(self.run.get("steps", 256)),
                  "tol": float(self.run.get("tol", 1e-12))}
        params.update({k: v for k, v in overrides.items() if v is not None})
        return ChartDomain(**params)

    def rationals(self, key: str, default=None):
        value = self.run.get(key, default)
        if value is None:
            return None
        if isinstance(value, list):
            return [Fraction(v) for v in value]
        return Fraction(value)

    def to_json(self) -> str:
        return json.dumps(self.source, indent=2, sort_keys=True) + "\n"


def parse_manifest(text: str, name: str = "") -> Manifest:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ManifestError(exc.msg, exc.lineno, exc.colno) from None
    try:
        return build_manifest(data, name)
    except PolynomialParseError as exc:
        line, col = _locate(text, json.dumps(exc.text))
        raise ManifestError(str(exc), line, col + exc.column) from None
    except (KeyError, TypeError, ValueError) as exc:
        message = exc.args[0] if exc.args else str(exc)
        needle = re.search(r"'([^']+)'|\"([^\"]+)\"", str(message))
        line, col = _locate(text, needle.group(0).strip("'\"")) if needle else (1, 1)
        raise ManifestError(str(message), line, col) from None


def build_manifest(data: dict, name: str = "") -> Manifest:
    if not isinstance(data, dict) or "chart" not in data:
        raise KeyError("manifest needs a 'chart' object")
    c = data["chart"]
    coords = c["coordinates"]
    n = len(coords)
    if "dim" in c and int(c["dim"]) != n:
        raise ValueError(f"'dim' is {c['dim']} but {n} coordinates are listed")
    frame = c["frame"]
    if len(frame) != n or any(len(row) != n for row in frame):
        raise ValueError(f"'frame' must hold {n} rows of {n} coefficient strings")
    points = [tuple(_rational(v, "sample_points") for v in p) for p in c.get("sample_points", [])]
    name = data.get("name", name)
    chart = FilteredChart.from_strings(coords, frame, c["orders"], int(c["depth"]),
                                       sample_points=tuple(points), name=name)

    splittings = {"canonical": canonical_splitting(chart)}
    for sname, spec in data.get("splittings", {}).items():
        corr = {_indices(k, 2, n, f"splitting '{sname}'"): v
                for k, v in spec.get("corrections", {}).items()}
        splittings[sname] = Splitting(chart, corr)

    connections = {"flat": GradedConnection.flat(chart)}
    for cname, spec in data.get("connections", {}).items():
        table = {_indices(k, 3, n, f"connection '{cname}'"): v
                 for k, v in spec.get("christoffel", {}).items()}
        connections[cname] = GradedConnection(chart, table, cname)

    sections = {}
    for sname, spec in data.get("sections", {}).items():
        sections[sname] = make_section(spec.get("kind", "H"), chart, spec["coefficients"])

    run = dict(data.get("run", {}))
    for key in ("splitting", "connection"):
        pool = splittings if key == "splitting" else connections
        if key in run and run[key] not in pool:
            raise KeyError(f"run.{key} refers to unknown name '{run[key]}'")
    for key in ("point", "vector", "second_vector"):
        if key in run:
            if len(run[key]) != n:
                raise ValueError(f"run.{key} needs {n} entries")
            run[key] = [_rational(v, f"run.{key}") for v in run[key]]
    if "t" in run:
        run["t"] = _rational(run["t"], "run.t")
    if "t_sequence" in run:
        run["t_sequence"] = [_rational(v, "run.t_sequence") for v in run["t_sequence"]]
    return Manifest(name, chart, splittings, connections, sections, run, data)


def load_manifest(ref: str) -> Manifest:
    """Load a manifest from a path, or a bundled example by name."""
    if bundled_source(ref) is not None and not Path(ref).exists():
        return parse_manifest(json.dumps(bundled_source(ref), indent=2), ref)
    try:
        text = Path(ref).read_text()
    except OSError as exc:
        raise ManifestError(f"cannot read manifest {ref!r}: {exc.strerror}") from None
    return parse_manifest(text, Path(ref).stem)


# -- bundled examples ---------------------------------------------------------

_HEISENBERG_FRAME = [["1", "0", "-1/2*y"], ["0", "1", "1/2*x"], ["0", "0", "1"]]

_BUNDLED = {
    "heisenberg3": {
        "name": "heisenberg3",
        "chart": {"coordinates": ["x", "y", "z"], "depth": 2, "orders": [1, 1, 2],
                  "frame": _HEISENBERG_FRAME},
        "splittings": {"shifted": {"corrections": {"3,1": "1"}},
                       "sheared": {"corrections": {"3,1": "x", "3,2": "-1/2*y^2"}}},
        "connections": {"curved": {"christoffel": {"1,1,2": "z", "2,2,1": "1/2*x*y", "1,3,3": "y"}}},
        "sections": {"tX1": {"kind": "H", "coefficients": ["t", "0", "0"]},
                     "tX2": {"kind": "H", "coefficients": ["0", "t", "0"]},
                     "t2X3": {"kind": "H", "coefficients": ["0", "0", "t^2"]}},
        "run": {"point": ["1/3", "-1/2", "2"], "vector": ["1", "1/2", "1/3"],
                "second_vector": ["-1/2", "2", "1"], "t": "1/2",
                "t_sequence": ["1", "1/2", "1/4", "1/8"], "radius": 4, "steps": 256,
                "tol": 1e-12, "seed": 20240601, "samples": 2000},
    },
    "engel4": {
        "name": "engel4",
        "chart": {"coordinates": ["x", "y", "z", "w"], "depth": 3, "orders": [1, 1, 2, 3],
                  "frame": [["1", "0", "0", "0"], ["0", "1", "x", "1/2*x^2"],
                            ["0", "0", "1", "x"], ["0", "0", "0", "1"]]},
        "splittings": {"shifted": {"corrections": {"3,1": "y", "4,2": "1", "4,3": "x"}}},
        "run": {"point": ["1/2", "-1", "1/3", "0"], "vector": ["1", "-1/2", "1/4", "1/3"],
                "second_vector": ["1/2", "1", "-1", "1/5"], "t": "1/2",
                "t_sequence": ["1", "1/2", "1/4", "1/8"], "radius": 4, "steps": 256,
                "tol": 1e-12, "seed": 20240601, "samples": 2000},
    },
    # the bracket [X1, X2] = (1 + y^2) X3 is not constant, so no group structure fits the frame
    "twisted-heisenberg": {
        "name": "twisted-heisenberg",
        "chart": {"coordinates": ["x", "y", "z"], "depth": 2, "orders": [1, 1, 2],
                  "frame": [["1", "0", "-1/2*y"], ["0", "1", "1/2*x + x*y^2"], ["0", "0", "1"]]},
        "run": {"point": ["1/3", "1/5", "0"], "vector": ["1", "1/2", "1/3"],
                "second_vector": ["-1/2", "1", "1/4"], "t": "1/4",
                "t_sequence": ["1/8", "1/16", "1/32", "1/64", "1/128", "1/256"],
                "radius": 4, "steps": 256, "tol": 1e-12, "seed": 20240601, "samples": 2000},
    },
}


def _abelian(n: int) -> dict:
    coords = [f"x{i + 1}" for i in range(n)]
    frame = [["1" if i == j else "0" for j in range(n)] for i in range(n)]
    vec = [str(Fraction(i + 1, 2)) for i in range(n)]
    return {
        "name": f"abelian-{n}",
        "chart": {"coordinates": coords, "depth": 1, "orders": [1] * n, "frame": frame},
        "run": {"point": ["0"] * n, "vector": vec, "second_vector": [str(-Fraction(i, 3)) for i in range(n)],
                "t": "1/2", "t_sequence": ["1", "1/2", "1/4", "1/8"], "radius": 8, "steps": 256,
                "tol": 1e-12, "seed": 20240601, "samples": 2000},
    }


BUNDLED_NAMES = ("abelian-3", "heisenberg3", "engel4", "twisted-heisenberg")


def bundled_source(name: str) -> dict | None:
    m = re.fullmatch(r"abelian-(\d+)", name)
    if m and int(m.group(1)) >= 1:
        return _abelian(int(m.group(1)))
    src = _BUNDLED.get(name)
    return json.loads(json.dumps(src)) if src is not None else None


def bundled(name: str) -> Manifest:
    src = bundled_source(name)
    if src is None:
        raise KeyError(f"no bundled manifest named {name!r}")
    return build_manifest(src, name)
