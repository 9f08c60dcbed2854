"""Seeded generators for the supported point-process families.

All randomness comes from numpy's PCG64 stream so identical seeds give
bit-identical patterns; the algorithm name is recorded in the pattern
metadata to keep golden files portable.  Draw order is fixed per model and
must not change: counts first, then positions, then thinning/marks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .patterns import TORUS, WINDOW, ConfigError, Domain, PointPattern

RNG_ALGORITHM = "pcg64"

MODELS = ("poisson", "bernoulli_grid", "poisson_cluster")


@dataclass(frozen=True)
class GenSpec:
    """Which model to draw, on which domain, from which seed."""

    model: str
    domain: Domain
    seed: int
    intensity: float = 1.0
    p: float = 0.5
    parent_intensity: float = 1.0
    mark_circle_radius: float = 1.0
    mark_intensity: float = 1.0

    def __post_init__(self) -> None:
        if self.model not in MODELS:
            raise ConfigError(f"unknown model {self.model!r}")
        seed = int(self.seed)
        if not 0 <= seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        object.__setattr__(self, "seed", seed)
        if self.model == "poisson":
            if not (np.isfinite(self.intensity) and self.intensity > 0):
                raise ConfigError("poisson intensity must be positive")
        elif self.model == "bernoulli_grid":
            if not 0.0 <= self.p <= 1.0:
                raise ConfigError("p must lie in [0, 1]")
            if self.domain.kind == TORUS and any(
                not float(e).is_integer() for e in self.domain.extents
            ):
                raise ConfigError("bernoulli grid on a torus needs integer extents")
        else:
            if not (np.isfinite(self.parent_intensity) and self.parent_intensity > 0):
                raise ConfigError("parent intensity must be positive")
            if self.mark_circle_radius <= 0 or self.mark_intensity <= 0:
                raise ConfigError("mark circle radius and intensity must be positive")
            if self.domain.dimension != 2:
                raise ConfigError("cluster model is planar (dimension 2)")

    def with_seed(self, seed: int) -> "GenSpec":
        return GenSpec(
            self.model,
            self.domain,
            seed,
            self.intensity,
            self.p,
            self.parent_intensity,
            self.mark_circle_radius,
            self.mark_intensity,
        )


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def _clamp_torus(coords: np.ndarray, ext: np.ndarray) -> np.ndarray:
    # u*extent can round up to the extent itself at the last ulp
    return np.minimum(coords, np.nextafter(ext, 0.0))


def gen_poisson(spec: GenSpec) -> PointPattern:
    """Homogeneous Poisson sample: Poisson count, i.i.d. uniform positions."""
    if spec.model != "poisson":
        raise ConfigError("spec model is not poisson")
    rng = _rng(spec.seed)
    n = int(rng.poisson(spec.intensity * spec.domain.volume))
    ext = np.asarray(spec.domain.extents)
    coords = rng.random((n, spec.domain.dimension)) * ext
    if spec.domain.kind == TORUS:
        coords = _clamp_torus(coords, ext)
    meta = {
        "model": "poisson",
        "rng": RNG_ALGORITHM,
        "seed": spec.seed,
        "intensity": spec.intensity,
    }
    return PointPattern(spec.domain, coords, meta)


def gen_bernoulli_grid(spec: GenSpec) -> PointPattern:
    """Integer lattice, uniformly shifted, each site kept with probability p.

    The uniform shift is stored in the metadata so row/column membership can
    be recovered by subtracting it and rounding, instead of parsing floats.
    """
    if spec.model != "bernoulli_grid":
        raise ConfigError("spec model is not bernoulli_grid")
    rng = _rng(spec.seed)
    d = spec.domain.dimension
    ext = np.asarray(spec.domain.extents)
    u = rng.random(d)
    if spec.domain.kind == TORUS:
        counts = ext.astype(np.int64)
    else:
        counts = (np.floor(ext - u) + 1).astype(np.int64)
    axes = [np.arange(c) for c in counts]
    sites = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    keep = rng.random(len(sites)) < spec.p
    coords = sites[keep].astype(float) + u
    meta = {
        "model": "bernoulli_grid",
        "rng": RNG_ALGORITHM,
        "seed": spec.seed,
        "p": spec.p,
        "grid_shift": tuple(float(v) for v in u),
    }
    return PointPattern(spec.domain, coords, meta)


def gen_poisson_cluster(spec: GenSpec) -> PointPattern:
    """Poisson parents, each dressed with a Poisson number of satellites
    placed uniformly on a circle around it.

    Points are parents first, then surviving children.  Annotations give
    every point its parent id and its type (the generated satellite count of
    its cluster); children falling off a window are clipped, on a torus they
    wrap.
    """
    if spec.model != "poisson_cluster":
        raise ConfigError("spec model is not poisson_cluster")
    rng = _rng(spec.seed)
    ext = np.asarray(spec.domain.extents)
    n_parents = int(rng.poisson(spec.parent_intensity * spec.domain.volume))
    parents = rng.random((n_parents, 2)) * ext
    if spec.domain.kind == TORUS:
        parents = _clamp_torus(parents, ext)
    mean_children = 2.0 * math.pi * spec.mark_intensity * spec.mark_circle_radius
    counts = rng.poisson(mean_children, size=n_parents).astype(np.int64)
    total = int(counts.sum())
    angles = rng.random(total) * (2.0 * math.pi)
    offsets = spec.mark_circle_radius * np.column_stack(
        (np.cos(angles), np.sin(angles))
    )
    parent_of_child = np.repeat(np.arange(n_parents), counts)
    children = parents[parent_of_child] + offsets
    if spec.domain.kind == TORUS:
        children = _clamp_torus(children % ext, ext)
        child_keep = np.ones(total, dtype=bool)
    else:
        child_keep = np.all((children >= 0.0) & (children <= ext), axis=1)
    children = children[child_keep]
    parent_of_child = parent_of_child[child_keep]
    coords = np.vstack([parents, children]) if n_parents else parents.reshape(0, 2)
    parent_ids = np.concatenate([np.arange(n_parents), parent_of_child])
    meta = {
        "model": "poisson_cluster",
        "rng": RNG_ALGORITHM,
        "seed": spec.seed,
        "parent_intensity": spec.parent_intensity,
        "mark_circle_radius": spec.mark_circle_radius,
        "mark_intensity": spec.mark_intensity,
        "cluster_parent": parent_ids.astype(np.int64),
        "cluster_type": counts[parent_ids] if n_parents else np.empty(0, np.int64),
        "cluster_is_parent": np.concatenate(
            [np.ones(n_parents, np.int64), np.zeros(len(children), np.int64)]
        ),
    }
    return PointPattern(spec.domain, coords, meta)


_GENERATORS = {
    "poisson": gen_poisson,
    "bernoulli_grid": gen_bernoulli_grid,
    "poisson_cluster": gen_poisson_cluster,
}


def generate(spec: GenSpec) -> PointPattern:
    return _GENERATORS[spec.model](spec)


def read_config(path: str | Path) -> dict[str, str]:
    """Parse a ``key = value`` config file; '#' starts a comment."""
    out: dict[str, str] = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"bad config line: {raw!r}")
        key, val = line.split("=", 1)
        out[key.strip()] = val.strip()
    return out


def parse_extents(text: str) -> tuple[float, ...]:
    """'50x50' or '10000' -> extents tuple."""
    try:
        return tuple(float(part) for part in str(text).lower().split("x"))
    except ValueError as exc:
        raise ConfigError(f"bad extents {text!r}") from exc


def spec_from_config(conf: Mapping[str, Any], **overrides: Any) -> GenSpec:
    """Build a GenSpec from a flat config mapping.

    Recognized keys: model, domain (torus|window), extents (WxH), buffer,
    seed, intensity, p, parent_intensity, mark_circle_radius, mark_intensity.
    Keyword overrides win over the mapping (used for --seed).
    """
    data = {str(k): v for k, v in conf.items()}
    data.update({k: v for k, v in overrides.items() if v is not None})
    try:
        model = str(data["model"])
        kind = str(data.get("domain", TORUS))
        extents = parse_extents(data["extents"])
    except KeyError as exc:
        raise ConfigError(f"missing config key: {exc.args[0]}") from exc
    if kind not in (TORUS, WINDOW):
        raise ConfigError(f"unknown domain kind {kind!r}")
    domain = Domain(kind, extents, float(data.get("buffer", 0.0)))
    return GenSpec(
        model=model,
        domain=domain,
        seed=int(data.get("seed", 0)),
        intensity=float(data.get("intensity", 1.0)),
        p=float(data.get("p", 0.5)),
        parent_intensity=float(data.get("parent_intensity", 1.0)),
        mark_circle_radius=float(data.get("mark_circle_radius", 1.0)),
        mark_intensity=float(data.get("mark_intensity", 1.0)),
    )
