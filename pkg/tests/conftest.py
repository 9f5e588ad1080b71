"""Shared helpers: tiny frames, independent oracles, random generators."""

from __future__ import annotations

import numpy as np
import pytest

from dsbn.frames import ConfigSet, FrameSpec, Variable, build_frame
from dsbn.evidence import MassFunction, mass


def make_frame(*specs: tuple[str, tuple[str, ...]]) -> FrameSpec:
    return build_frame([Variable(n, tuple(d)) for n, d in specs])


def cs(frame: FrameSpec, *value_tuples) -> ConfigSet:
    """ConfigSet from value tuples, e.g. cs(f, ('a','x'), ('b','y'))."""
    members = []
    for vt in value_tuples:
        if isinstance(vt, str):
            vt = (vt,)
        members.append(frame.encode(tuple(vt)))
    return ConfigSet(frame, tuple(members))


@pytest.fixture
def frame1():
    """Single binary variable X with domain {a, b}."""
    return make_frame(("X", ("a", "b")))


@pytest.fixture
def frame2():
    """Two binary variables X1:{a,b} x X2:{x,y}."""
    return make_frame(("X1", ("a", "b")), ("X2", ("x", "y")))


def random_subset(frame: FrameSpec, rng: np.random.Generator) -> ConfigSet:
    n = frame.config_count
    while True:
        picks = rng.random(n) < rng.uniform(0.2, 0.8)
        if picks.any():
            return ConfigSet(frame, tuple(int(i) for i in np.nonzero(picks)[0]))


def random_mass(frame: FrameSpec, rng: np.random.Generator, max_focals: int = 6) -> MassFunction:
    """Random proper mass with 1..max_focals distinct random focal sets."""
    k = int(rng.integers(1, max_focals + 1))
    focals = {}
    for _ in range(k):
        focals[random_subset(frame, rng)] = float(rng.uniform(0.05, 1.0))
    return mass(frame, focals)


# ---------------------------------------------------------------------------
# independent oracles (value-tuple based, no index arithmetic shared with the
# implementation)

def oracle_combine(m1: MassFunction, m2: MassFunction):
    """Brute-force Dempster rule over decoded value tuples.

    Returns (dict frozenset-of-value-tuples -> mass, conflict).  Both inputs
    must share a frame.
    """
    assert m1.frame == m2.frame
    acc: dict[frozenset, float] = {}
    conflict = 0.0
    for a, va in m1.focals:
        fa = frozenset(a.values())
        for b, vb in m2.focals:
            fb = frozenset(b.values())
            inter = fa & fb
            if not inter:
                conflict += va * vb
            else:
                acc[inter] = acc.get(inter, 0.0) + va * vb
    total = sum(abs(v) for v in acc.values())
    return {k: v / total for k, v in acc.items()}, conflict


def oracle_bel(m: MassFunction, value_set: frozenset) -> float:
    return sum(v for a, v in m.focals if frozenset(a.values()) <= value_set)


def oracle_q(m: MassFunction, value_set: frozenset) -> float:
    return sum(v for a, v in m.focals if frozenset(a.values()) >= value_set)


def all_subsets(frame: FrameSpec):
    """Every nonempty ConfigSet of a small frame."""
    n = frame.config_count
    assert n <= 16
    for bits in range(1, 1 << n):
        yield ConfigSet(frame, tuple(i for i in range(n) if bits >> i & 1))


def as_value_dict(m: MassFunction) -> dict[frozenset, float]:
    return {frozenset(a.values()): v for a, v in m.focals}
