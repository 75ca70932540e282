"""World geometry: wall segments, circular obstacles and a spawn pose."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from gcg.errors import InvariantError, ParseError

HALLWAY_NAMES = ("empty", "cluttered")


@dataclass
class World:
    walls: np.ndarray  # (S, 4): x1, y1, x2, y2
    obstacles: np.ndarray  # (C, 3): cx, cy, r
    spawn: tuple[float, float, float]
    name: str = "empty"
    source: str | None = field(default=None, compare=False)

    def __post_init__(self):
        self.walls = np.asarray(self.walls, dtype=np.float64).reshape(-1, 4)
        self.obstacles = np.asarray(self.obstacles, dtype=np.float64).reshape(-1, 3)
        self.spawn = tuple(float(v) for v in self.spawn)
        if len(self.walls) == 0:
            raise InvariantError("a world needs at least one wall")
        if self.name not in HALLWAY_NAMES:
            raise InvariantError(f"hallway name must be one of {HALLWAY_NAMES}, got {self.name!r}")
        sx, sy, _ = self.spawn
        for i, (cx, cy, r) in enumerate(self.obstacles):
            if r <= 0:
                raise InvariantError(f"obstacle {i} has non-positive radius {r}")
            if np.hypot(sx - cx, sy - cy) < r:
                raise InvariantError(f"spawn ({sx}, {sy}) lies inside obstacle {i}")

    def mirrored(self) -> "World":
        """Reflection across the x axis (y -> -y, heading -> -heading)."""
        w = self.walls.copy()
        w[:, [1, 3]] *= -1.0
        o = self.obstacles.copy()
        o[:, 1] *= -1.0
        sx, sy, st = self.spawn
        return World(w, o, (sx, -sy, -st), self.name)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "walls": self.walls.tolist(),
            "obstacles": self.obstacles.tolist(),
            "spawn": list(self.spawn),
        }


def _line_of(text: str, key: str) -> int | None:
    m = re.search(rf'"{re.escape(key)}"', text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def _numbers(value, n, what, text, key, path):
    if not isinstance(value, list) or len(value) != n or not all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
    ):
        raise ParseError(f"{what} must be a list of {n} numbers, got {value!r}", _line_of(text, key), path)
    return [float(v) for v in value]


def parse_world(text: str, path: str | None = None) -> World:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno, path) from None
    if not isinstance(doc, dict):
        raise ParseError("world file must hold a JSON object", 1, path)
    unknown = set(doc) - {"walls", "obstacles", "spawn", "name"}
    if unknown:
        key = sorted(unknown)[0]
        raise ParseError(f"unknown key {key!r}", _line_of(text, key), path)
    for key in ("walls", "spawn"):
        if key not in doc:
            raise ParseError(f"missing required key {key!r}", None, path)
    if not isinstance(doc["walls"], list):
        raise ParseError("'walls' must be a list", _line_of(text, "walls"), path)
    walls = [_numbers(w, 4, f"walls[{i}]", text, "walls", path) for i, w in enumerate(doc["walls"])]
    obstacles_doc = doc.get("obstacles", [])
    if not isinstance(obstacles_doc, list):
        raise ParseError("'obstacles' must be a list", _line_of(text, "obstacles"), path)
    obstacles = [_numbers(o, 3, f"obstacles[{i}]", text, "obstacles", path) for i, o in enumerate(obstacles_doc)]
    spawn = _numbers(doc["spawn"], 3, "spawn", text, "spawn", path)
    name = doc.get("name", "empty")
    if not isinstance(name, str):
        raise ParseError("'name' must be a string", _line_of(text, "name"), path)
    return World(np.array(walls).reshape(-1, 4), np.array(obstacles).reshape(-1, 3), spawn, name, source=path)


def load_world(path) -> World:
    """Load a world JSON file; bare fixture names resolve to the shipped worlds."""
    p = Path(path)
    if not p.exists():
        bundled = resolve_fixture(str(path))
        if bundled is None:
            raise ParseError("world file not found", None, str(path))
        p = bundled
    return parse_world(p.read_text(), str(p))


def resolve_fixture(name: str) -> Path | None:
    stem = name[:-5] if name.endswith(".json") else name
    stem = stem.replace("-", "_")
    candidate = resources.files("gcg.sim") / "worlds" / f"{stem}.json"
    return Path(str(candidate)) if candidate.is_file() else None


def fixture_names() -> list[str]:
    root = resources.files("gcg.sim") / "worlds"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))
