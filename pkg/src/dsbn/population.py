"""Labeled populations of set-valued objects and their empirical masses.

Each object carries a nonempty true value set and a label restricting what
measurements can see.  A measurement of a query set answers whether the query
(cut down to the label) intersects the value set; the empirical mass function
counts effective sets (value set intersected with label) over the objects
that still carry a nonempty label.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

from .evidence import MASS_TOL, MassError, MassFunction, mass
from .frames import ConfigSet, FrameError, FrameSpec


class PopulationError(ValueError):
    """Raised for malformed objects, populations or selection specs."""


@dataclass(frozen=True)
class LabeledObject:
    """One object: a true value set plus its current label.

    An empty label means the object has been discarded.  A live label must
    intersect the value set, otherwise the labeling would contradict the
    measurement it is supposed to summarize.
    """

    value_set: ConfigSet
    label: ConfigSet

    def __post_init__(self):
        if self.value_set.is_empty:
            raise PopulationError("object value set must be nonempty")
        if self.value_set.frame != self.label.frame:
            raise PopulationError("value set and label live on different frames")
        if not self.label.is_empty and self.value_set.intersect(self.label).is_empty:
            raise PopulationError("live label does not intersect the value set")

    @property
    def discarded(self) -> bool:
        return self.label.is_empty

    @property
    def effective_set(self) -> ConfigSet:
        return self.value_set.intersect(self.label)


@dataclass(frozen=True)
class Population:
    frame: FrameSpec
    objects: tuple[LabeledObject, ...]

    def __post_init__(self):
        object.__setattr__(self, "objects", tuple(self.objects))
        for o in self.objects:
            if o.value_set.frame != self.frame:
                raise PopulationError("object frame differs from population frame")

    def __len__(self) -> int:
        return len(self.objects)

    @property
    def active(self) -> tuple[LabeledObject, ...]:
        return tuple(o for o in self.objects if not o.discarded)

    @property
    def active_count(self) -> int:
        return sum(1 for o in self.objects if not o.discarded)


@dataclass(frozen=True)
class SelectionSpec:
    """Candidate labels with positive selection probabilities summing to one."""

    labels: tuple[ConfigSet, ...]
    probs: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "probs", tuple(float(p) for p in self.probs))
        if len(self.labels) != len(self.probs) or not self.labels:
            raise PopulationError("labels and probabilities must align and be nonempty")
        if len(set(self.labels)) != len(self.labels):
            raise PopulationError("duplicate labels in selection spec")
        if any(l.is_empty for l in self.labels):
            raise PopulationError("selection labels must be nonempty sets")
        if any(p <= 0.0 for p in self.probs):
            raise PopulationError("selection probabilities must be positive")
        if abs(sum(self.probs) - 1.0) > MASS_TOL:
            raise PopulationError(f"selection probabilities sum to {sum(self.probs):.6g}, not 1")


def draw_population(m: MassFunction, n: int, seed: int = 0) -> Population:
    """Sample ``n`` objects whose value sets are focals drawn with mass ``m``.

    Labels start out as the full frame (an unlabeled population), so the
    empirical mass of the result estimates ``m``.
    """
    if m.pseudo:
        raise PopulationError("cannot sample from a pseudo mass function")
    if n <= 0:
        raise PopulationError("population size must be positive")
    rng = np.random.default_rng(seed)
    focal_sets = m.focal_sets()
    probs = np.array([v for _, v in m.focals])
    probs = probs / probs.sum()
    picks = rng.choice(len(focal_sets), size=n, p=probs)
    full = m.frame.full_set()
    objects = tuple(LabeledObject(focal_sets[i], full) for i in picks)
    return Population(m.frame, objects)


def measure(obj: LabeledObject, a: ConfigSet, modified: bool = False) -> bool:
    """Whether the query ``a`` hits the object's value set.

    With ``modified=True`` the query is first cut down to the object's
    label, so anything outside the label is invisible.
    """
    query = a.intersect(obj.label) if modified else a
    return not query.intersect(obj.value_set).is_empty


def selection_mass(spec: Union[SelectionSpec, ConfigSet]) -> MassFunction:
    """The mass function of a relabeling step.

    A single label carries all the mass; a :class:`SelectionSpec` maps each
    candidate label to its selection probability.
    """
    if isinstance(spec, ConfigSet):
        if spec.is_empty:
            raise PopulationError("relabeling by the empty set is not defined")
        return mass(spec.frame, {spec: 1.0})
    frame = spec.labels[0].frame
    return mass(frame, dict(zip(spec.labels, spec.probs)))


def _relabel_one(obj: LabeledObject, chosen: ConfigSet) -> LabeledObject:
    if obj.discarded:
        return obj
    if not measure(obj, chosen, modified=True):
        return LabeledObject(obj.value_set, ConfigSet(obj.value_set.frame, ()))
    return LabeledObject(obj.value_set, obj.label.intersect(chosen))


def relabel_simple(pop: Population, label: ConfigSet) -> Population:
    """Relabel every object by one query set.

    Objects whose labeled measurement of the query fails are discarded; the
    rest get their label intersected with the query.  Value sets never change.
    """
    if label.is_empty:
        raise PopulationError("relabeling by the empty set is not defined")
    if label.frame != pop.frame:
        raise FrameError("label frame differs from population frame")
    return Population(pop.frame, tuple(_relabel_one(o, label) for o in pop.objects))


# counter-based per-object generator: splitmix64 keyed by (seed, index),
# so relabeling is order-independent and reproducible
_SM_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_SM_M1 = np.uint64(0xBF58476D1CE4E5B9)
_SM_M2 = np.uint64(0x94D049BB133111EB)


def _splitmix64(x: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):  # uint64 wraparound is the point
        z = x + _SM_GAMMA
        z = (z ^ (z >> np.uint64(30))) * _SM_M1
        z = (z ^ (z >> np.uint64(27))) * _SM_M2
        return z ^ (z >> np.uint64(31))


def keyed_uniform(seed: int, indices: np.ndarray) -> np.ndarray:
    """Uniform [0,1) numbers keyed by (seed, index), independent of order."""
    idx = np.asarray(indices, dtype=np.uint64)
    base = _splitmix64(np.uint64(seed & 0xFFFFFFFFFFFFFFFF))
    bits = _splitmix64(base ^ _splitmix64(idx + np.uint64(1)))
    return (bits >> np.uint64(11)).astype(np.float64) / float(1 << 53)


def relabel_general(pop: Population, spec: SelectionSpec, seed: int = 0) -> Population:
    """Relabel with a per-object random choice among candidate labels.

    Each object independently draws a label according to the selection
    probabilities (keyed by (seed, object index)), then the simple
    relabeling semantics apply with the drawn label.
    """
    if spec.labels[0].frame != pop.frame:
        raise FrameError("selection spec frame differs from population frame")
    cum = np.cumsum(spec.probs)
    cum[-1] = 1.0
    u = keyed_uniform(seed, np.arange(len(pop.objects)))
    picks = np.searchsorted(cum, u, side="right")
    return Population(
        pop.frame,
        tuple(_relabel_one(o, spec.labels[int(k)]) for o, k in zip(pop.objects, picks)),
    )


def empirical_mass(pop: Population) -> MassFunction:
    """Frequency of effective sets over the non-discarded objects."""
    counts: Counter = Counter()
    for o in pop.objects:
        if not o.discarded:
            counts[(o.value_set, o.label)] += 1
    if not counts:
        raise PopulationError("no active objects: empirical mass undefined")
    focals: dict[ConfigSet, float] = {}
    total = sum(counts.values())
    for (vs, label), k in counts.items():
        eff = vs.intersect(label)
        focals[eff] = focals.get(eff, 0.0) + k / total
    return mass(pop.frame, focals)


def population_from_counts(frame: FrameSpec, counts: Mapping[ConfigSet, int]) -> Population:
    """Exact population: ``counts[A]`` unlabeled objects with value set A."""
    full = frame.full_set()
    objects = []
    for a in sorted(counts, key=lambda s: s.members):
        k = counts[a]
        if k < 0:
            raise PopulationError("negative object count")
        objects.extend(LabeledObject(a, full) for _ in range(k))
    if not objects:
        raise PopulationError("empty population")
    return Population(frame, tuple(objects))
