"""Domains, points, and finite point patterns.

Coordinates are plain model units.  A torus identifies opposite faces and
carries the quotient metric; a window is a closed axis-aligned box with an
inner censoring margin of width ``buffer`` along every face.  Patterns are
immutable after construction and are always simple: no two points share the
same coordinate tuple.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Iterator

import numpy as np

TORUS = "torus"
WINDOW = "window"


class ConfigError(ValueError):
    """Invalid configuration or a violated operation precondition."""


class PatternError(ValueError):
    """Structurally invalid point data."""


@dataclass(frozen=True)
class Domain:
    """Observation domain: a flat torus or a buffered window."""

    kind: str
    extents: tuple[float, ...]
    buffer: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in (TORUS, WINDOW):
            raise ConfigError(f"unknown domain kind {self.kind!r}")
        ext = tuple(float(e) for e in self.extents)
        if not ext or any(not np.isfinite(e) or e <= 0.0 for e in ext):
            raise ConfigError("extents must be positive and finite")
        object.__setattr__(self, "extents", ext)
        buf = float(self.buffer)
        if self.kind == TORUS and buf != 0.0:
            raise ConfigError("a torus takes no censoring buffer")
        if buf < 0.0 or buf >= min(ext) / 2.0:
            raise ConfigError("buffer must satisfy 0 <= buffer < min(extent)/2")
        object.__setattr__(self, "buffer", buf)

    @classmethod
    def torus(cls, *extents: float) -> "Domain":
        return cls(TORUS, tuple(extents))

    @classmethod
    def window(cls, *extents: float, buffer: float = 0.0) -> "Domain":
        return cls(WINDOW, tuple(extents), buffer)

    @property
    def dimension(self) -> int:
        return len(self.extents)

    @property
    def volume(self) -> float:
        return float(np.prod(self.extents))


@dataclass(frozen=True)
class Point:
    """One point of a pattern: its coordinates and dense index."""

    coords: tuple[float, ...]
    id: int


def _coords_of(p: Any) -> np.ndarray:
    return np.asarray(getattr(p, "coords", p), dtype=float)


def distance(p: Any, q: Any, dom: Domain) -> float:
    """Metric distance between two points: quotient metric on a torus,
    Euclidean on a window."""
    a = _coords_of(p)
    b = _coords_of(q)
    if a.shape != (dom.dimension,) or b.shape != (dom.dimension,):
        raise ConfigError("dimension mismatch")
    d = np.abs(a - b)
    if dom.kind == TORUS:
        ext = np.asarray(dom.extents)
        d = d % ext
        d = np.minimum(d, ext - d)
    return float(np.sqrt(np.dot(d, d)))


def distances_to(coords: np.ndarray, x: np.ndarray, dom: Domain) -> np.ndarray:
    """Distances from every row of ``coords`` to the single point ``x``."""
    d = np.abs(coords - x)
    if dom.kind == TORUS:
        ext = np.asarray(dom.extents)
        d = d % ext
        d = np.minimum(d, ext - d)
    return np.sqrt((d * d).sum(axis=1))


def lex_compare(p: Any, q: Any) -> int:
    """Coordinatewise lexicographic comparison: -1, 0 or +1."""
    a = _coords_of(p)
    b = _coords_of(q)
    if a.shape != b.shape:
        raise ConfigError("dimension mismatch")
    for u, v in zip(a, b):
        if u < v:
            return -1
        if u > v:
            return 1
    return 0


def face_distances(coords: np.ndarray, dom: Domain) -> np.ndarray:
    """Distance of each point to the nearest domain face (inf on a torus)."""
    if dom.kind == TORUS:
        return np.full(len(coords), np.inf)
    ext = np.asarray(dom.extents)
    return np.minimum(coords, ext - coords).min(axis=1)


def is_censored(p: Any, dom: Domain) -> bool:
    """True when a window point sits inside the censoring margin."""
    if dom.kind == TORUS:
        return False
    x = _coords_of(p)
    ext = np.asarray(dom.extents)
    return bool(np.minimum(x, ext - x).min() < dom.buffer)


@dataclass(frozen=True)
class PointPattern:
    """A finite simple point configuration on a domain.

    ``coords`` is an (N, d) float array; point ids are the row indices.
    ``metadata`` carries generator annotations (RNG id, grid shift, cluster
    parents/types) needed by shifts that rely on them.
    """

    domain: Domain
    coords: np.ndarray
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        c = np.array(self.coords, dtype=float, copy=True)
        if c.size == 0:
            c = c.reshape(0, self.domain.dimension)
        if c.ndim != 2 or c.shape[1] != self.domain.dimension:
            raise PatternError("coords must have shape (N, dimension)")
        if c.size and not np.all(np.isfinite(c)):
            raise PatternError("coordinates must be finite")
        ext = np.asarray(self.domain.extents)
        if c.size:
            if self.domain.kind == TORUS:
                if np.any(c < 0.0) or np.any(c >= ext):
                    raise PatternError("torus coordinates must lie in [0, extent)")
            else:
                if np.any(c < 0.0) or np.any(c > ext):
                    raise PatternError("window coordinates must lie in [0, extent]")
            if np.unique(c, axis=0).shape[0] != c.shape[0]:
                raise PatternError("pattern is not simple (duplicate coordinates)")
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)

    def __len__(self) -> int:
        return self.coords.shape[0]

    @property
    def size(self) -> int:
        return self.coords.shape[0]

    @property
    def dimension(self) -> int:
        return self.domain.dimension

    def point(self, i: int) -> Point:
        return Point(tuple(float(v) for v in self.coords[i]), int(i))

    def points(self) -> Iterator[Point]:
        for i in range(len(self)):
            yield self.point(i)

    def censored_mask(self) -> np.ndarray:
        return face_distances(self.coords, self.domain) < self.domain.buffer

    def to_json(self) -> str:
        dom = {
            "kind": self.domain.kind,
            "extents": list(self.domain.extents),
            "buffer": self.domain.buffer,
        }
        obj: dict[str, Any] = {
            "dimension": self.dimension,
            "domain": dom,
            "points": [[float(v) for v in row] for row in self.coords],
        }
        if self.metadata:
            obj["metadata"] = _jsonable_metadata(self.metadata)
        return json.dumps(obj)

    @classmethod
    def from_json(cls, text: str) -> "PointPattern":
        obj = json.loads(text)
        dom = obj["domain"]
        domain = Domain(dom["kind"], tuple(dom["extents"]), dom.get("buffer", 0.0))
        coords = np.asarray(obj["points"], dtype=float)
        if coords.size == 0:
            coords = coords.reshape(0, int(obj["dimension"]))
        meta = _metadata_from_jsonable(obj.get("metadata", {}))
        return cls(domain, coords, meta)


_META_INT_ARRAYS = ("cluster_parent", "cluster_type", "cluster_is_parent")


def _jsonable_metadata(meta: dict[str, Any]) -> dict[str, Any]:
    out: dict[str, Any] = {}
    for key in sorted(meta):
        val = meta[key]
        if isinstance(val, np.ndarray):
            out[key] = val.tolist()
        elif isinstance(val, tuple):
            out[key] = list(val)
        elif isinstance(val, (np.integer,)):
            out[key] = int(val)
        elif isinstance(val, (np.floating,)):
            out[key] = float(val)
        else:
            out[key] = val
    return out


def _metadata_from_jsonable(meta: dict[str, Any]) -> dict[str, Any]:
    out: dict[str, Any] = {}
    for key, val in meta.items():
        if key in _META_INT_ARRAYS:
            out[key] = np.asarray(val, dtype=np.int64)
        elif key == "grid_shift":
            out[key] = tuple(float(v) for v in val)
        else:
            out[key] = val
    return out


def lattice_coords(pattern: PointPattern) -> np.ndarray | None:
    """Integer lattice coordinates of a grid pattern, None otherwise.

    Exact: recovered by subtracting the stored shift and rounding, so they
    are immune to the float noise of absolute positions.
    """
    if "grid_shift" not in pattern.metadata:
        return None
    u = np.asarray(pattern.metadata["grid_shift"], dtype=float)
    return np.rint(pattern.coords - u).astype(np.int64)


def translate(pattern: PointPattern, t: Any) -> PointPattern:
    """Translate a torus pattern by ``t`` (wrapping), keeping point ids.

    Grid metadata is shifted along so lattice row/column recovery stays
    exact after the move.
    """
    if pattern.domain.kind != TORUS:
        raise ConfigError("translation is only defined on torus domains")
    ext = np.asarray(pattern.domain.extents)
    tv = np.asarray(t, dtype=float)
    if tv.shape != (pattern.dimension,):
        raise ConfigError("dimension mismatch")
    coords = (pattern.coords + tv) % ext
    # float mod can land exactly on the upper face; wrap it home
    coords = np.where(coords >= ext, 0.0, coords)
    meta = dict(pattern.metadata)
    if "grid_shift" in meta:
        u = (np.asarray(meta["grid_shift"], dtype=float) + tv) % 1.0
        u = np.where(u >= 1.0, 0.0, u)
        meta["grid_shift"] = tuple(float(v) for v in u)
    return PointPattern(pattern.domain, coords, meta)


def crop(pattern: PointPattern, fraction: float) -> PointPattern:
    """Centered sub-window of a window pattern, rescaled to the origin.

    Used by the nested-core ladder: the same realization restricted to a
    concentric box of ``fraction`` times the extents, same buffer.
    """
    if pattern.domain.kind != WINDOW:
        raise ConfigError("crop is only defined on window domains")
    if not 0.0 < fraction <= 1.0:
        raise ConfigError("fraction must lie in (0, 1]")
    if fraction == 1.0:
        return pattern
    ext = np.asarray(pattern.domain.extents)
    new_ext = ext * fraction
    offset = (ext - new_ext) / 2.0
    keep = np.all(
        (pattern.coords >= offset) & (pattern.coords <= offset + new_ext), axis=1
    )
    idx = np.flatnonzero(keep)
    coords = pattern.coords[idx] - offset
    coords = np.clip(coords, 0.0, new_ext)
    meta = dict(pattern.metadata)
    if "grid_shift" in meta:
        u = (np.asarray(meta["grid_shift"], dtype=float) - offset) % 1.0
        u = np.where(u >= 1.0, 0.0, u)
        meta["grid_shift"] = tuple(float(v) for v in u)
    if "cluster_parent" in meta:
        remap = np.full(len(pattern), -1, dtype=np.int64)
        remap[idx] = np.arange(len(idx))
        parent = np.asarray(meta["cluster_parent"], dtype=np.int64)[idx]
        meta["cluster_parent"] = np.where(parent >= 0, remap[parent], -1)
        meta["cluster_type"] = np.asarray(meta["cluster_type"], dtype=np.int64)[idx]
        meta["cluster_is_parent"] = np.asarray(
            meta["cluster_is_parent"], dtype=np.int64
        )[idx]
    domain = Domain(WINDOW, tuple(float(e) for e in new_ext), pattern.domain.buffer)
    return PointPattern(domain, coords, meta)
