"""Order machinery on top of a foliation: DFS preorder, the royal-line
total order per component, and the two canonical foliation-preserving
bijections (the foil-cyclic successor and the component-cyclic successor)
together with the signed step count between foil mates.

All tie-breaking is lexicographic in coordinates taken relative to a
reference node of the component, so on a torus the constructions commute
with translations exactly; on a window relative and absolute orders agree.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .foliation import FoliationResult
from .patterns import TORUS, ConfigError, PointPattern, lattice_coords
from .shifts import ShiftMap


def _rel_order(ids: np.ndarray, ref: int, pattern: PointPattern) -> np.ndarray:
    """ids sorted lexicographically by coordinates relative to point ref.

    Grid patterns sort in exact integer lattice coordinates; equal
    displacements would otherwise carry position-dependent float noise.
    """
    lattice = lattice_coords(pattern)
    if lattice is not None:
        rel = lattice[ids] - lattice[ref]
        if pattern.domain.kind == TORUS:
            rel = rel % np.asarray(pattern.domain.extents, dtype=np.int64)
    else:
        rel = pattern.coords[ids] - pattern.coords[ref]
        if pattern.domain.kind == TORUS:
            rel = rel % np.asarray(pattern.domain.extents)
    return ids[np.lexsort(tuple(rel.T[::-1]))]


def _preimage_lists(image: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """CSR arrays (indptr, ids) of preimages per target id."""
    ok = image >= 0
    targets = image[ok]
    sources = np.flatnonzero(ok)
    order = np.argsort(targets, kind="stable")
    counts = np.bincount(targets, minlength=n)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    return indptr, sources[order]


def dfs_preorder(pattern: PointPattern, shift_map: ShiftMap, root: int) -> list[int]:
    """Preorder over the descendants of ``root`` in the reversed map.

    Sons are visited lexicographically (relative to their father).  A cycle
    anywhere below the root is a hard error: descendant trees only.
    """
    n = len(shift_map)
    if not 0 <= root < n:
        raise ConfigError("root out of range")
    indptr, pre = _preimage_lists(shift_map.image, n)
    seen = np.zeros(n, dtype=bool)
    out: list[int] = []
    stack = [int(root)]
    while stack:
        v = stack.pop()
        if seen[v]:
            raise ConfigError("cycle reachable below root")
        seen[v] = True
        out.append(v)
        kids = pre[indptr[v] : indptr[v + 1]]
        if kids.size:
            ordered = _rel_order(kids, v, pattern)
            stack.extend(int(k) for k in ordered[::-1])
    return out


@dataclass(frozen=True)
class RlsOrder:
    """Total order per component: rank[x] in 0..|C|-1.

    Cycle nodes come in cycle order from the component anchor, each followed
    by a DFS of its hanging trees; dead-end components are a single DFS from
    the root."""

    rank: np.ndarray


def build_rls_order(
    pattern: PointPattern, shift_map: ShiftMap, foliation: FoliationResult
) -> RlsOrder:
    n = len(shift_map)
    indptr, pre = _preimage_lists(shift_map.image, n)
    rank = np.full(n, -1, dtype=np.int64)

    def tree_dfs(start_children: np.ndarray, father: int, counter: int) -> int:
        stack: list[int] = []
        if start_children.size:
            ordered = _rel_order(start_children, father, pattern)
            stack.extend(int(k) for k in ordered[::-1])
        while stack:
            v = stack.pop()
            rank[v] = counter
            counter += 1
            kids = pre[indptr[v] : indptr[v + 1]]
            if kids.size:
                ordered = _rel_order(kids, v, pattern)
                stack.extend(int(k) for k in ordered[::-1])
        return counter

    for comp in foliation.components:
        counter = 0
        if comp.cycle:
            cyc = comp.cycle
            L = len(cyc)
            pred = {cyc[k]: cyc[k - 1] for k in range(L)}
            for v in cyc:
                rank[v] = counter
                counter += 1
                kids = pre[indptr[v] : indptr[v + 1]]
                kids = kids[(kids != pred[v]) & (kids != v)]
                counter = tree_dfs(kids, v, counter)
        else:
            root = comp.root
            rank[root] = 0
            kids = pre[indptr[root] : indptr[root + 1]]
            counter = tree_dfs(kids[kids != root], root, 1)
    return RlsOrder(rank=rank)


@dataclass(frozen=True)
class StableMaps:
    """The two canonical dense bijections of one foliation."""

    f_perp: np.ndarray
    h_dense: np.ndarray
    rls: RlsOrder


def _foil_reference(foliation: FoliationResult, comp_id: int) -> int:
    comp = foliation.components[comp_id]
    return comp.cycle[0] if comp.cycle else comp.root


def foil_order(
    pattern: PointPattern,
    foliation: FoliationResult,
    f: int,
    rls: RlsOrder | None = None,
    use_rls: bool = False,
) -> np.ndarray:
    """Members of foil ``f`` in their cyclic order."""
    members = foliation.foil_members(f)
    if len(members) <= 1:
        return members
    if use_rls and rls is not None:
        return members[np.argsort(rls.rank[members], kind="stable")]
    ref = _foil_reference(foliation, int(foliation.foil_component[f]))
    return _rel_order(members, ref, pattern)


def build_f_perp(
    pattern: PointPattern,
    foliation: FoliationResult,
    rls: RlsOrder | None = None,
    rls_components: frozenset[int] | set[int] = frozenset(),
) -> np.ndarray:
    """Bijection whose orbits are exactly the foils.

    Finite-class foils cycle through their members in (relative) lex order;
    components diagnosed as infinite-foil use the royal-line order instead.
    """
    f = np.arange(foliation.n_points, dtype=np.int64)
    for fid in range(foliation.n_foils):
        use_rls = int(foliation.foil_component[fid]) in rls_components
        order = foil_order(pattern, foliation, fid, rls, use_rls)
        if len(order) > 1:
            f[order] = np.roll(order, -1)
    return f


def build_h_dense(foliation: FoliationResult, rls: RlsOrder) -> np.ndarray:
    """Bijection whose orbits are exactly the components: the cyclic
    successor in royal-line rank."""
    h = np.arange(foliation.n_points, dtype=np.int64)
    for comp in foliation.components:
        members = foliation.component_members(comp.id)
        if len(members) > 1:
            order = members[np.argsort(rls.rank[members], kind="stable")]
            h[order] = np.roll(order, -1)
    return h


def build_stable_maps(
    pattern: PointPattern,
    shift_map: ShiftMap,
    foliation: FoliationResult,
    rls_components: frozenset[int] | set[int] = frozenset(),
) -> StableMaps:
    rls = build_rls_order(pattern, shift_map, foliation)
    return StableMaps(
        f_perp=build_f_perp(pattern, foliation, rls, rls_components),
        h_dense=build_h_dense(foliation, rls),
        rls=rls,
    )


def delta(
    f_perp: np.ndarray, foliation: FoliationResult, x: int, y: int
) -> int:
    """Number of f_perp steps from x to y inside their common foil.

    Nonnegative, taken in the step direction; delta(x, y) and -delta(y, x)
    agree modulo the foil size.
    """
    if foliation.foil_id[x] != foliation.foil_id[y]:
        raise ConfigError("points lie in different foils")
    limit = int(foliation.foil_size[foliation.foil_id[x]])
    z = int(x)
    for k in range(limit):
        if z == int(y):
            return k
        z = int(f_perp[z])
    raise ConfigError("f_perp orbit does not reach the target")


def stable_to_json(table: np.ndarray, role: str) -> str:
    rows = [
        {"id": int(i), "image": int(table[i]), "censored": False, "role": role}
        for i in range(len(table))
    ]
    return json.dumps(rows)


def orbit(table: np.ndarray, start: int) -> list[int]:
    """Cycle of ``table`` through ``start``; the table must be a permutation."""
    out = [int(start)]
    z = int(table[start])
    while z != start:
        out.append(z)
        z = int(table[z])
        if len(out) > len(table):
            raise ConfigError("orbit exceeds table size; not a permutation")
    return out


def foil_windings(
    pattern: PointPattern,
    shift_map: ShiftMap,
    foliation: FoliationResult,
    stable: StableMaps,
) -> list[tuple[int, int, int]]:
    """Per foil: (foil id, winding, senior size) of the image sequence.

    Walking a foil once along f_perp, the images advance through the senior
    foil's f_perp order; summing the forward step counts must wind exactly
    once around the senior foil (or not at all when every image coincides).
    This is the finite form of the order-preservation property: any
    backtracking inflates the winding beyond one lap.
    """
    out: list[tuple[int, int, int]] = []
    for fid in range(foliation.n_foils):
        members = foliation.foil_members(fid)
        senior = int(foliation.senior_foil[fid])
        if senior < 0:
            continue
        if np.any(shift_map.censored[members]):
            continue
        start = int(members[0])
        seq = orbit_restricted(stable.f_perp, start, len(members))
        images = [int(shift_map.image[z]) for z in seq]
        senior_members = foliation.foil_members(senior)
        sorder = orbit_restricted(stable.f_perp, int(senior_members[0]), len(senior_members))
        pos = {z: i for i, z in enumerate(sorder)}
        m_plus = len(sorder)
        total = 0
        for a, b in zip(images, images[1:] + images[:1]):
            total += (pos[b] - pos[a]) % m_plus
        out.append((fid, total // m_plus if m_plus else 0, m_plus))
    return out


def orbit_restricted(table: np.ndarray, start: int, expect: int) -> list[int]:
    seq = [int(start)]
    z = int(table[start])
    while z != start and len(seq) <= expect:
        seq.append(z)
        z = int(table[z])
    if len(seq) != expect:
        raise ConfigError("orbit does not cover its foil")
    return seq


def check_order_preservation(
    pattern: PointPattern,
    shift_map: ShiftMap,
    foliation: FoliationResult,
    stable: StableMaps,
) -> bool:
    """True when no foil's image walk backtracks (winding 0 or 1 per foil)."""
    windings = foil_windings(pattern, shift_map, foliation, stable)
    return all(w in (0, 1) for _, w, _ in windings)
