"""Product frames of discernment and exact set algebra over configurations.

A frame is the cartesian product of the domains of a list of named discrete
variables.  Configurations (one value per variable) are encoded as mixed-radix
integers with the first declared variable most significant, and sets of
configurations are kept as sorted index tuples, so all set algebra is exact.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from itertools import product
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

#: Hard cap on the number of configurations of a frame.  Sorted index tuples
#: stay small and exact below this size; desk-scale experiments fit easily.
CONFIG_CAP = 1 << 20

_NAME_RE = re.compile(r"^[A-Za-z0-9_.+-]+$")


class FrameError(ValueError):
    """Raised for malformed variables, frames or configuration sets."""


def _check_name(name: str, what: str) -> None:
    if not isinstance(name, str) or not _NAME_RE.match(name):
        raise FrameError(f"{what} {name!r} is not a plain identifier")


@dataclass(frozen=True)
class Variable:
    """A named discrete variable with an ordered domain of value labels."""

    name: str
    domain: tuple[str, ...]

    def __post_init__(self):
        _check_name(self.name, "variable name")
        object.__setattr__(self, "domain", tuple(self.domain))
        if not self.domain:
            raise FrameError(f"variable {self.name}: empty domain")
        for v in self.domain:
            _check_name(v, f"value of {self.name}")
        if len(set(self.domain)) != len(self.domain):
            raise FrameError(f"variable {self.name}: duplicate domain values")

    @property
    def size(self) -> int:
        return len(self.domain)


@dataclass(frozen=True)
class FrameSpec:
    """An ordered product of variables with deterministic mixed-radix indexing.

    The first variable is the most significant digit, so configuration index
    0 is the tuple of first domain values and indexing is a bijection between
    ``range(config_count)`` and value tuples.
    """

    variables: tuple[Variable, ...]
    _hash: int = field(init=False, repr=False, compare=False, default=0)

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        if not self.variables:
            raise FrameError("frame needs at least one variable")
        names = [v.name for v in self.variables]
        if len(set(names)) != len(names):
            raise FrameError(f"duplicate variable names in frame: {names}")
        count = math.prod(v.size for v in self.variables)
        if count > CONFIG_CAP:
            raise FrameError(f"cap exceeded: {count} configurations > {CONFIG_CAP}")
        object.__setattr__(self, "_hash", hash(self.variables))

    def __hash__(self) -> int:
        return self._hash

    @property
    def config_count(self) -> int:
        return math.prod(v.size for v in self.variables)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.variables)

    def place_values(self) -> tuple[int, ...]:
        """Mixed-radix weight of each variable position."""
        places = []
        weight = 1
        for v in reversed(self.variables):
            places.append(weight)
            weight *= v.size
        return tuple(reversed(places))

    def variable(self, name: str) -> Variable:
        for v in self.variables:
            if v.name == name:
                return v
        raise FrameError(f"unknown variable {name!r}")

    def position(self, name: str) -> int:
        for i, v in enumerate(self.variables):
            if v.name == name:
                return i
        raise FrameError(f"unknown variable {name!r}")

    def encode(self, values: Sequence[str]) -> int:
        """Index of the configuration given one value label per variable."""
        if len(values) != len(self.variables):
            raise FrameError("wrong number of values for frame")
        idx = 0
        for v, val in zip(self.variables, values):
            try:
                d = v.domain.index(val)
            except ValueError:
                raise FrameError(f"value {val!r} not in domain of {v.name}") from None
            idx = idx * v.size + d
        return idx

    def decode(self, index: int) -> tuple[str, ...]:
        """Value-label tuple of the configuration with the given index."""
        if not 0 <= index < self.config_count:
            raise FrameError(f"configuration index {index} out of range")
        out = []
        for v in reversed(self.variables):
            out.append(v.domain[index % v.size])
            index //= v.size
        return tuple(reversed(out))

    def subframe(self, names: Iterable[str]) -> "FrameSpec":
        """Sub-frame spanned by ``names``, keeping this frame's variable order."""
        wanted = set(names)
        missing = wanted - set(self.names)
        if missing:
            raise FrameError(f"unknown variables {sorted(missing)}")
        if not wanted:
            raise FrameError("empty variable selection")
        return FrameSpec(tuple(v for v in self.variables if v.name in wanted))

    def full_set(self) -> "ConfigSet":
        return ConfigSet(self, tuple(range(self.config_count)))

    def singleton(self, values: Sequence[str]) -> "ConfigSet":
        return ConfigSet(self, (self.encode(values),))


@dataclass(frozen=True)
class ConfigSet:
    """A subset of a frame's configurations in canonical sorted-index form."""

    frame: FrameSpec
    members: tuple[int, ...]
    _hash: int = field(init=False, repr=False, compare=False, default=0)

    def __post_init__(self):
        members = tuple(self.members)
        n = self.frame.config_count
        if any(not 0 <= m < n for m in members):
            raise FrameError("configuration index out of range")
        if any(b <= a for a, b in zip(members, members[1:])):
            members = tuple(sorted(set(members)))
        object.__setattr__(self, "members", members)
        object.__setattr__(self, "_hash", hash((self.frame._hash, members)))

    def __hash__(self) -> int:
        return self._hash

    def __len__(self) -> int:
        return len(self.members)

    def __contains__(self, index: int) -> bool:
        return index in self.member_set

    @property
    def member_set(self) -> frozenset:
        got = self.__dict__.get("_member_set")
        if got is None:
            got = frozenset(self.members)
            object.__setattr__(self, "_member_set", got)
        return got

    @property
    def is_empty(self) -> bool:
        return not self.members

    @property
    def is_full(self) -> bool:
        return len(self.members) == self.frame.config_count

    def values(self) -> list[tuple[str, ...]]:
        """Member configurations as value-label tuples."""
        return [self.frame.decode(m) for m in self.members]

    def intersect(self, other: "ConfigSet") -> "ConfigSet":
        if other.frame != self.frame:
            raise FrameError("frame mismatch in intersection")
        if self.is_full:
            return other
        if other.is_full:
            return self
        return ConfigSet(self.frame, tuple(sorted(self.member_set & other.member_set)))

    def union(self, other: "ConfigSet") -> "ConfigSet":
        if other.frame != self.frame:
            raise FrameError("frame mismatch in union")
        return ConfigSet(self.frame, tuple(sorted(self.member_set | other.member_set)))

    def complement(self) -> "ConfigSet":
        mine = self.member_set
        return ConfigSet(self.frame, tuple(i for i in range(self.frame.config_count) if i not in mine))

    def issubset(self, other: "ConfigSet") -> bool:
        return self.member_set <= other.member_set

    def issuperset(self, other: "ConfigSet") -> bool:
        return self.member_set >= other.member_set


def build_frame(variables: Sequence[Variable]) -> FrameSpec:
    """Build a frame from variables; rejects duplicate names and cap overflow."""
    return FrameSpec(tuple(variables))


def product_set(frame: FrameSpec, subsets: Mapping[str, Iterable[str]]) -> ConfigSet:
    """Cartesian product of per-variable value subsets as a ConfigSet.

    Variables missing from ``subsets`` contribute their full domain.  Each
    listed subset must be nonempty and drawn from its variable's domain.
    """
    unknown = set(subsets) - set(frame.names)
    if unknown:
        raise FrameError(f"unknown variables {sorted(unknown)}")
    digit_choices = []
    for v in frame.variables:
        if v.name in subsets:
            vals = list(dict.fromkeys(subsets[v.name]))
            if not vals:
                raise FrameError(f"empty value subset for {v.name}")
            try:
                digit_choices.append(sorted(v.domain.index(val) for val in vals))
            except ValueError:
                bad = [val for val in vals if val not in v.domain]
                raise FrameError(f"values {bad} not in domain of {v.name}") from None
        else:
            digit_choices.append(list(range(v.size)))
    places = frame.place_values()
    idx = np.zeros(1, dtype=np.int64)
    for place, digits in zip(places, digit_choices):
        idx = (idx[:, None] + np.asarray(digits, dtype=np.int64)[None, :] * place).reshape(-1)
    idx.sort()
    return ConfigSet(frame, tuple(int(i) for i in idx))


def project_set(a: ConfigSet, target: Iterable[str]) -> ConfigSet:
    """Projection of ``a`` onto the sub-frame spanned by ``target`` variables."""
    sub = a.frame.subframe(target)
    if a.is_empty:
        return ConfigSet(sub, ())
    src_places = a.frame.place_values()
    sub_places = sub.place_values()
    idx = np.asarray(a.members, dtype=np.int64)
    out = np.zeros_like(idx)
    pos_by_name = {v.name: i for i, v in enumerate(a.frame.variables)}
    for tgt_pos, v in enumerate(sub.variables):
        src_pos = pos_by_name[v.name]
        digit = (idx // src_places[src_pos]) % v.size
        out += digit * sub_places[tgt_pos]
    uniq = np.unique(out)
    return ConfigSet(sub, tuple(int(i) for i in uniq))


def cylinder_extend(a: ConfigSet, target: FrameSpec) -> ConfigSet:
    """Vacuous (cylindrical) extension of ``a`` onto the superframe ``target``."""
    if a.is_empty:
        raise FrameError("cannot extend an empty configuration set")
    src = a.frame
    tgt_names = set(target.names)
    for v in src.variables:
        if v.name not in tgt_names:
            raise FrameError(f"variable {v.name} missing from target frame")
        if target.variable(v.name).domain != v.domain:
            raise FrameError(f"domain mismatch for {v.name}")
    src_places = src.place_values()
    tgt_places = target.place_values()
    src_pos = {v.name: i for i, v in enumerate(src.variables)}
    idx = np.asarray(a.members, dtype=np.int64)
    base = np.zeros_like(idx)
    for name, pos in src_pos.items():
        size = src.variables[pos].size
        digit = (idx // src_places[pos]) % size
        base += digit * tgt_places[target.position(name)]
    out = base
    for i, v in enumerate(target.variables):
        if v.name in src_pos:
            continue
        digits = np.arange(v.size, dtype=np.int64) * tgt_places[i]
        out = (out[:, None] + digits[None, :]).reshape(-1)
    out.sort()
    return ConfigSet(target, tuple(int(i) for i in out))


def factorize_product(a: ConfigSet) -> Optional[dict[str, tuple[str, ...]]]:
    """Per-variable factors of ``a`` if it is a product of its projections.

    Returns ``None`` when ``a`` is not of product form (e.g. a diagonal set).
    """
    if a.is_empty:
        raise FrameError("cannot factorize an empty configuration set")
    factors: dict[str, tuple[str, ...]] = {}
    size = 1
    for v in a.frame.variables:
        proj = project_set(a, [v.name])
        vals = tuple(v.domain[i] for i in proj.members)
        factors[v.name] = vals
        size *= len(vals)
    # a is always a subset of the product of its projections, so comparing
    # cardinalities decides equality.
    if size != len(a):
        return None
    return factors
