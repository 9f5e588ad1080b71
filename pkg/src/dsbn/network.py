"""Belief networks: a dag plus one anti-conditional valuation per node.

The joint distribution is the Dempster combination of all node valuations
(each over the node and its parents).  Hidden nodes are allowed; their
valuations, and those of their children, stay vacuous placeholders because
nothing observable pins them down.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence, Union

import networkx as nx

from .evidence import (
    DecombinationError,
    MassFunction,
    anti_condition,
    combine,
    is_vacuous,
    marginalize,
    mass,
    reframe,
    settle_proper,
    vacuous,
    vacuous_extend,
)
from .frames import FrameError, FrameSpec, Variable
from .population import Population, draw_population, empirical_mass


class NetworkError(ValueError):
    """Raised for malformed belief networks."""


class FitError(RuntimeError):
    """Valuation fitting failed for a specific node."""


Source = Union[MassFunction, Population]


def _source_mass(source: Source) -> MassFunction:
    if isinstance(source, Population):
        return empirical_mass(source)
    return source


@dataclass(frozen=True)
class BeliefNetwork:
    """Immutable dag + valuations; all node names must exist in the frame."""

    frame: FrameSpec
    parents: Mapping[str, tuple[str, ...]]
    hidden: frozenset = frozenset()
    valuations: Mapping[str, MassFunction] = field(default_factory=dict)

    def __post_init__(self):
        names = set(self.frame.names)
        object.__setattr__(
            self, "parents", {n: tuple(ps) for n, ps in self.parents.items()}
        )
        object.__setattr__(self, "hidden", frozenset(self.hidden))
        if set(self.parents) != names:
            raise NetworkError("parent map must cover exactly the frame variables")
        for n, ps in self.parents.items():
            for p in ps:
                if p not in names:
                    raise NetworkError(f"unknown parent {p!r} of {n!r}")
            if len(set(ps)) != len(ps) or n in ps:
                raise NetworkError(f"bad parent list for {n!r}")
        if not self.hidden <= names:
            raise NetworkError("hidden markers must name frame variables")
        g = self.digraph()
        if not nx.is_directed_acyclic_graph(g):
            raise NetworkError("parent structure has a directed cycle")
        vals = dict(self.valuations)
        for n in self.frame.names:
            want = self.node_frame(n)
            got = vals.get(n)
            if got is None:
                vals[n] = vacuous(want)
            elif got.frame != want:
                raise NetworkError(f"valuation of {n!r} is not over the node and its parents")
        object.__setattr__(self, "valuations", vals)

    def digraph(self) -> nx.DiGraph:
        g = nx.DiGraph()
        g.add_nodes_from(self.frame.names)
        for n, ps in self.parents.items():
            g.add_edges_from((p, n) for p in ps)
        return g

    def node_frame(self, name: str) -> FrameSpec:
        return self.frame.subframe((name, *self.parents[name]))

    def edges(self) -> list[tuple[str, str]]:
        return [(p, n) for n in self.frame.names for p in self.parents[n]]

    @property
    def visible(self) -> tuple[str, ...]:
        return tuple(n for n in self.frame.names if n not in self.hidden)


def joint(net: BeliefNetwork) -> MassFunction:
    """Dempster combination of all node valuations over the full frame."""
    acc = vacuous(net.frame)
    for name in net.frame.names:
        acc = combine(acc, net.valuations[name]).mass
    return settle_proper(acc)


def d_separated(net_or_graph, j: Iterable[str], k: Iterable[str], l: Iterable[str] = ()) -> bool:
    """Standard d-separation of node sets ``j`` and ``k`` given ``l``."""
    if isinstance(net_or_graph, BeliefNetwork):
        g = net_or_graph.digraph()
    else:
        g = net_or_graph
    j, k, l = set(j), set(k), set(l)
    if (j & k) or (j & l) or (k & l):
        raise NetworkError("d-separation sets must be disjoint")
    unknown = (j | k | l) - set(g.nodes)
    if unknown:
        raise NetworkError(f"unknown nodes {sorted(unknown)}")
    if not j or not k:
        return True
    return nx.is_d_separator(g, j, k, l)


def ci_statement_holds(
    m: MassFunction,
    xj: Sequence[str],
    xk: Sequence[str],
    xl: Sequence[str] = (),
    tol: float = 1e-9,
) -> bool:
    """Whether the factorized conditional-independence identity holds in ``m``.

    Compares the (j+k+l) marginal against the combination of the
    anti-conditioned (j+l) and (k+l) marginals with the l marginal,
    focal set by focal set.
    """
    xj, xk, xl = list(xj), list(xk), list(xl)
    if set(xj) & set(xk) or set(xj) & set(xl) or set(xk) & set(xl):
        raise NetworkError("independence statement sets must be disjoint")
    if not xj or not xk:
        return True
    lhs = marginalize(m, xj + xk + xl)
    frame = lhs.frame
    if xl:
        a_jl = vacuous_extend(anti_condition(marginalize(m, xj + xl), xl), frame)
        a_kl = vacuous_extend(anti_condition(marginalize(m, xk + xl), xl), frame)
        m_l = vacuous_extend(marginalize(m, xl), frame)
        rhs = combine(combine(a_jl, a_kl).mass, m_l).mass
    else:
        rhs = combine(
            vacuous_extend(marginalize(m, xj), frame),
            vacuous_extend(marginalize(m, xk), frame),
        ).mass
    keys = set(lhs.focal_dict) | set(rhs.focal_dict)
    return all(abs(lhs.value(a) - rhs.value(a)) <= tol for a in keys)


def fit_valuations(structure: BeliefNetwork, source: Source) -> BeliefNetwork:
    """Fit node valuations from data: anti-conditioned empirical marginals.

    Hidden nodes, and visible nodes with hidden parents, keep vacuous
    placeholder valuations since their conditionals are not identified by
    the observed sample.
    """
    m = _source_mass(source)
    vals: dict[str, MassFunction] = {}
    for name in structure.frame.names:
        node_frame = structure.node_frame(name)
        ps = structure.parents[name]
        if name in structure.hidden or any(p in structure.hidden for p in ps):
            vals[name] = vacuous(node_frame)
            continue
        marg = reframe(marginalize(m, (name, *ps)), node_frame)
        if not ps:
            vals[name] = marg
            continue
        try:
            vals[name] = anti_condition(marg, ps)
        except DecombinationError as e:
            raise FitError(f"cannot fit valuation of node {name!r}: {e}") from e
    return BeliefNetwork(structure.frame, structure.parents, structure.hidden, vals)


def sample_network(net: BeliefNetwork, n: int, seed: int = 0) -> Population:
    """Draw an unlabeled population of visible-variable value sets from the joint."""
    full = joint(net)
    observable = marginalize(full, net.visible) if net.hidden else full
    return draw_population(observable, n, seed)


# ---------------------------------------------------------------------------
# small structural helpers shared by the learners and the experiment harness

def skeleton(net: BeliefNetwork) -> frozenset:
    """Undirected edge set as a frozenset of frozen pairs."""
    return frozenset(frozenset(e) for e in net.edges())


def v_structures(net: BeliefNetwork) -> frozenset:
    """Colliders with non-adjacent parents, as (low, mid, high) triples."""
    adj = skeleton(net)
    out = set()
    for child, ps in net.parents.items():
        for i, a in enumerate(ps):
            for b in ps[i + 1 :]:
                if frozenset((a, b)) not in adj:
                    lo, hi = sorted((a, b))
                    out.add((lo, child, hi))
    return frozenset(out)


def network_with_structure(
    frame: FrameSpec,
    edges: Iterable[tuple[str, str]],
    hidden: Iterable[str] = (),
) -> BeliefNetwork:
    """Structure-only network (vacuous valuations) from a directed edge list."""
    parents: dict[str, list[str]] = {n: [] for n in frame.names}
    for p, c in edges:
        parents[c].append(p)
    return BeliefNetwork(frame, {n: tuple(ps) for n, ps in parents.items()}, frozenset(hidden))
