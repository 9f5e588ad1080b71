"""Structure learning for tree- and polytree-shaped belief networks.

The pairwise dependence of two variables is the smaller of two divergences:
how badly the product of their marginals approximates their true pair
marginal, and how badly the best single-mediator reconstruction does.  A
maximum-dependence spanning skeleton plus an orientation pass recovers the
generating structure; a collider score decides head-to-head meetings for
polytrees.
"""

from __future__ import annotations

import math
import warnings
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .evidence import (
    MassFunction,
    anti_condition,
    combine,
    commonality,
    marginalize,
    mass,
    reframe,
    vacuous_extend,
)
from .frames import FrameSpec, Variable, product_set
from .network import (
    BeliefNetwork,
    Source,
    _source_mass,
    fit_valuations,
    joint,
    network_with_structure,
)


class MarginalCache:
    """Marginals of one source mass, memoized by variable subset."""

    def __init__(self, source: Union[Source, "MarginalCache"]):
        if isinstance(source, MarginalCache):
            self.mass = source.mass
            self._memo = source._memo
        else:
            self.mass = _source_mass(source)
            self._memo: dict[frozenset, MassFunction] = {}

    @property
    def names(self) -> tuple[str, ...]:
        return self.mass.frame.names

    def marginal(self, names: Iterable[str]) -> MassFunction:
        key = frozenset(names)
        got = self._memo.get(key)
        if got is None:
            got = marginalize(self.mass, [n for n in self.names if n in key])
            self._memo[key] = got
        return got


def divergence(reference: MassFunction, approx: MassFunction) -> float:
    """Reference-weighted absolute log-ratio of commonalities.

    Sums m_ref(A) * |ln(Q_ref(A) / Q_approx(A))| over the reference's
    positive focal sets; any nonpositive ratio contributes plus infinity.
    """
    if approx.frame != reference.frame:
        approx = reframe(approx, reference.frame)
    total = 0.0
    for a, v in reference.focals:
        if v <= 0.0:
            continue
        q_ref = commonality(reference, a)
        q_apx = commonality(approx, a)
        if q_apx <= 0.0 or q_ref <= 0.0:
            return math.inf
        total += v * abs(math.log(q_ref / q_apx))
    return total


def _pair_product(cache: MarginalCache, x1: str, x2: str) -> MassFunction:
    frame = cache.mass.frame.subframe([x1, x2])
    return combine(
        vacuous_extend(cache.marginal([x1]), frame),
        vacuous_extend(cache.marginal([x2]), frame),
    ).mass


def mediated_marginal(source, x1: str, x2: str, via: str) -> MassFunction:
    """Reconstruction of the (x1, x2) marginal routed through one mediator.

    Combines the two pair marginals anti-conditioned on the mediator with
    the mediator's own marginal, then projects back onto (x1, x2).
    """
    cache = MarginalCache(source)
    if len({x1, x2, via}) != 3:
        raise ValueError("mediated marginal needs three distinct variables")
    frame = cache.mass.frame.subframe([x1, x2, via])
    a1 = vacuous_extend(anti_condition(cache.marginal([x1, via]), [via]), frame)
    a2 = vacuous_extend(anti_condition(cache.marginal([x2, via]), [via]), frame)
    m3 = vacuous_extend(cache.marginal([via]), frame)
    full = combine(combine(a1, a2).mass, m3).mass
    return marginalize(full, [n for n in frame.names if n in (x1, x2)])


def dependence(source, x1: str, x2: str) -> float:
    """Pairwise dependence: the best of the product and single-mediator fits.

    Zero for exactly independent pairs and for pairs rendered conditionally
    independent by some single mediator; strictly positive along real edges.
    """
    cache = MarginalCache(source)
    true_pair = cache.marginal([x1, x2])
    best = divergence(true_pair, _pair_product(cache, x1, x2))
    for via in cache.names:
        if via in (x1, x2):
            continue
        if best == 0.0:
            break
        best = min(best, divergence(true_pair, mediated_marginal(cache, x1, x2, via)))
    return best


def collider_score(source, x1: str, x2: str, mid: str, alpha: float = 1.0) -> float:
    """Head-to-head evidence for edges (x1, mid), (x2, mid).

    Mediator-fit divergence minus alpha times the product-fit divergence of
    the (x1, x2) marginal.  Nonnegative for an exact collider (the product
    term vanishes on marginally independent parents); negative when the
    mediator reconstruction is exact but the pair is dependent.
    """
    if alpha <= 0.0:
        raise ValueError("alpha must be positive")
    cache = MarginalCache(source)
    true_pair = cache.marginal([x1, x2])
    d_med = divergence(true_pair, mediated_marginal(cache, x1, x2, mid))
    d_prod = divergence(true_pair, _pair_product(cache, x1, x2))
    if math.isinf(d_med) and math.isinf(d_prod):
        return 0.0
    if math.isinf(d_med):
        return math.inf
    if math.isinf(d_prod):
        return -math.inf
    return d_med - alpha * d_prod


def declares_collider(score: float, paper_sign: bool = False) -> bool:
    """Orientation convention: by default a nonnegative score means head-to-head."""
    return score < 0.0 if paper_sign else score >= 0.0


DEP_ZERO_TOL = 1e-12


def _dependence_table(cache: MarginalCache) -> dict[tuple[str, str], float]:
    names = sorted(cache.names)
    return {
        (a, b): dependence(cache, a, b)
        for i, a in enumerate(names)
        for b in names[i + 1 :]
    }


def _spanning_skeleton(
    cache: MarginalCache,
) -> tuple[list[tuple[str, str]], dict[tuple[str, str], float]]:
    """Greedy maximum-dependence spanning tree (ties broken lexicographically)."""
    table = _dependence_table(cache)
    names = sorted(cache.names)
    if all(v <= DEP_ZERO_TOL for v in table.values()):
        return [], table
    # seed edge: maximum dependence over all pairs, lexicographic tie-break
    seed = min(table, key=lambda p: (-table[p], p))
    edges = [seed]
    connected = set(seed)
    loose = [n for n in names if n not in connected]
    while loose:
        cand = [
            (p, r) for p in sorted(connected) for r in loose
        ]
        pick = min(cand, key=lambda pr: (-table[tuple(sorted(pr))], pr))
        edges.append(pick)
        connected.add(pick[1])
        loose.remove(pick[1])
    return edges, table


def _orient_away_from(nodes, undirected_edges, root) -> list[tuple[str, str]]:
    adj: dict[str, set] = {n: set() for n in nodes}
    for a, b in undirected_edges:
        adj[a].add(b)
        adj[b].add(a)
    directed = []
    seen = {root}
    frontier = [root]
    while frontier:
        nxt = []
        for u in frontier:
            for v in sorted(adj[u]):
                if v not in seen:
                    directed.append((u, v))
                    seen.add(v)
                    nxt.append(v)
        frontier = nxt
    return directed


def learn_tree(source: Source, root: Optional[str] = None) -> BeliefNetwork:
    """Recover a directed-tree belief network from data or an exact joint.

    Grows a maximum-dependence spanning tree, orients every edge away from
    the root (the first frame variable unless given) and fits valuations.
    When all pairwise dependences vanish a disconnected structure is
    returned with a warning rather than fabricating a tree.
    """
    cache = MarginalCache(source)
    names = cache.names
    if len(names) < 3:
        raise ValueError("tree recovery needs at least 3 variables")
    root = root if root is not None else names[0]
    if root not in names:
        raise ValueError(f"unknown root variable {root!r}")
    edges, _ = _spanning_skeleton(cache)
    if not edges:
        warnings.warn("all pairwise dependences are zero: returning an edgeless forest")
        structure = network_with_structure(cache.mass.frame, [])
        return fit_valuations(structure, cache.mass)
    directed = _orient_away_from(names, edges, root)
    structure = network_with_structure(cache.mass.frame, directed)
    return fit_valuations(structure, cache.mass)


def learn_polytree(
    source: Source, alpha: float = 1.0, paper_sign: bool = False
) -> BeliefNetwork:
    """Recover a polytree: tree skeleton plus collider-score orientation.

    Head-to-head triples are oriented in decreasing score magnitude (so the
    strongest evidence wins conflicts); remaining edges are then oriented
    so as not to create new colliders.
    """
    cache = MarginalCache(source)
    names = cache.names
    if len(names) < 3:
        raise ValueError("polytree recovery needs at least 3 variables")
    edges, _ = _spanning_skeleton(cache)
    if not edges:
        warnings.warn("all pairwise dependences are zero: returning an edgeless forest")
        structure = network_with_structure(cache.mass.frame, [])
        return fit_valuations(structure, cache.mass)
    adj: dict[str, set] = {n: set() for n in names}
    for a, b in edges:
        adj[a].add(b)
        adj[b].add(a)
    triples = []
    for mid in sorted(names):
        nbrs = sorted(adj[mid])
        for i, x in enumerate(nbrs):
            for y in nbrs[i + 1 :]:
                triples.append((x, y, mid, collider_score(cache, x, y, mid, alpha)))
    oriented: dict[frozenset, tuple[str, str]] = {}

    def try_orient(tail, head):
        key = frozenset((tail, head))
        if key in oriented and oriented[key] != (tail, head):
            return  # conflicting earlier (stronger) decision wins
        oriented[key] = (tail, head)

    for x, y, mid, score in sorted(triples, key=lambda t: (-abs(t[3]), t)):
        if declares_collider(score, paper_sign):
            try_orient(x, mid)
            try_orient(y, mid)
    # propagate: an undirected edge at a node with an incoming arrow must
    # point away from it, otherwise a new collider would appear
    changed = True
    while changed:
        changed = False
        for e in sorted(tuple(sorted(edge)) for edge in edges):
            key = frozenset(e)
            if key in oriented:
                continue
            u, v = e
            u_in = any(h == u for (_, h) in oriented.values())
            v_in = any(h == v for (_, h) in oriented.values())
            if u_in:
                oriented[key] = (u, v)
                changed = True
            elif v_in:
                oriented[key] = (v, u)
                changed = True
    # leftover components: orient away from the smallest node, creating no
    # new head-to-head meetings
    left = [tuple(sorted(e)) for e in edges if frozenset(e) not in oriented]
    if left:
        seen = set()
        for start in sorted({n for e in left for n in e}):
            if start in seen:
                continue
            comp = {start}
            frontier = [start]
            while frontier:
                u = frontier.pop()
                for a, b in left:
                    if u in (a, b):
                        w = b if a == u else a
                        if w not in comp:
                            comp.add(w)
                            frontier.append(w)
            seen |= comp
            comp_edges = [e for e in left if e[0] in comp]
            for tail, head in _orient_away_from(sorted(comp), comp_edges, min(comp)):
                oriented[frozenset((tail, head))] = (tail, head)
    structure = network_with_structure(cache.mass.frame, list(oriented.values()))
    return fit_valuations(structure, cache.mass)


# ---------------------------------------------------------------------------
# random experiment models

def _random_valuation(
    frame: FrameSpec, rng: np.random.Generator, extra_focals: int
) -> MassFunction:
    """Random proper valuation: one full-frame focal plus product-form focals.

    The full-frame focal keeps every commonality strictly positive, so all
    divergences stay finite and anti-conditioning never divides by zero.
    """
    focals = {frame.full_set(): float(rng.uniform(0.05, 0.25))}
    for _ in range(extra_focals):
        sub = {}
        for v in frame.variables:
            size = int(rng.integers(1, v.size + 1))
            picks = rng.choice(v.size, size=size, replace=False)
            sub[v.name] = [v.domain[i] for i in sorted(picks)]
        key = product_set(frame, sub)
        focals[key] = focals.get(key, 0.0) + float(rng.uniform(0.3, 1.0))
    return mass(frame, focals)


def _tree_edges(
    n_vars: int,
    names: Sequence[str],
    rng: np.random.Generator,
    shape: str,
    max_parents: int,
):
    edges = []
    indeg = {n: 0 for n in names}
    for i in range(1, n_vars):
        j = int(rng.integers(0, i))
        a, b = names[j], names[i]
        if shape == "tree":
            edges.append((a, b))
            continue
        # polytree: random orientation, but keep node frames invertible
        if rng.random() < 0.5:
            a, b = b, a
        if indeg[b] >= max_parents:
            a, b = b, a
        if indeg[b] >= max_parents:
            continue  # drop, caller re-draws if the skeleton is too small
        edges.append((a, b))
        indeg[b] += 1
    return edges


def _edges_visible(model: BeliefNetwork, exact: MassFunction, min_dep: float) -> bool:
    """Reject models whose structure leaves no statistical trace.

    Every edge must carry real dependence; every skeleton triple must give
    its orientation away (collider parents: the mediated fit through the
    collider must be visibly bad; others: the pair must be visibly
    dependent marginally).
    """
    cache = MarginalCache(exact)
    for p, c in model.edges():
        if not (dependence(cache, p, c) >= min_dep):
            return False
    triple_floor = min_dep / 10
    for mid in model.frame.names:
        around = sorted(
            set(model.parents[mid]) | {c for c, ps in model.parents.items() if mid in ps}
        )
        for i, x in enumerate(around):
            for y in around[i + 1 :]:
                true_pair = cache.marginal([x, y])
                if x in model.parents[mid] and y in model.parents[mid]:
                    d = divergence(true_pair, mediated_marginal(cache, x, y, mid))
                else:
                    d = divergence(true_pair, _pair_product(cache, x, y))
                if not (d >= triple_floor):
                    return False
    return True


def random_model(
    shape: str,
    n_vars: int,
    domain_size: int = 2,
    focals_per_valuation: int = 3,
    seed: int = 0,
    min_edge_dependence: float = 0.02,
) -> BeliefNetwork:
    """Random tree or polytree model with genuinely visible structure.

    Draws random product-form valuations, combines them, and stores the
    anti-conditionals of the combined joint as the node valuations (one fit
    round), which makes the result a belief network of its own dag.  Models
    whose edges carry less than ``min_edge_dependence`` are redrawn so that
    structure recovery is statistically meaningful.
    """
    if shape not in ("tree", "polytree"):
        raise ValueError(f"unknown shape {shape!r}")
    if n_vars < 3:
        raise ValueError("models need at least 3 variables")
    names = [f"X{i:02d}" for i in range(n_vars)]
    domain = tuple(f"v{i}" for i in range(domain_size))
    frame = FrameSpec(tuple(Variable(n, domain) for n in names))
    # node frames (the variable plus its parents) must stay invertible
    max_parents = max(1, int(math.log(16, domain_size)) - 1)
    rng = np.random.default_rng(seed)
    for _attempt in range(200):
        edges = _tree_edges(n_vars, names, rng, shape, max_parents)
        if len(edges) != n_vars - 1:
            continue
        structure = network_with_structure(frame, edges)
        vals = {
            n: _random_valuation(structure.node_frame(n), rng, focals_per_valuation - 1)
            for n in names
        }
        raw = BeliefNetwork(frame, structure.parents, valuations=vals)
        model = fit_valuations(structure, joint(raw))
        exact = joint(model)
        if exact.pseudo:
            continue
        if _edges_visible(model, exact, min_edge_dependence):
            return model
    raise RuntimeError("could not draw a model with visible structure in 200 attempts")
