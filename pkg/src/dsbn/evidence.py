"""The Dempster-Shafer mass-function calculus.

Mass functions are sparse maps from focal configuration sets to signed
masses with the absolute masses summing to one.  Signed ("pseudo") masses
arise from decombination and anti-conditioning; they are first-class values
here because the whole calculus stays closed over them as long as the
commonality stays nonnegative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, NamedTuple, Optional, Sequence

import numpy as np

from .frames import ConfigSet, FrameError, FrameSpec, cylinder_extend, project_set

#: Focal masses below this magnitude are dropped after every operation.
PRUNE_EPS = 1e-12
#: Tolerance for mass-sum and vacuity checks.
MASS_TOL = 1e-9
#: Largest frame (in configurations) for which full-subset tables are built.
MOEBIUS_CAP = 16
#: Largest frame for which pseudo-mass validation checks every subset.
FULL_VALIDATION_CAP = 12


class MassError(ValueError):
    """Raised for malformed mass functions."""


class TotalConflictError(ArithmeticError):
    """Dempster combination had all intersection mass on the empty set."""


class DecombinationError(ArithmeticError):
    """Commonality division hit a zero divisor on a needed subset."""


@dataclass(frozen=True)
class MassFunction:
    """A (pseudo-)mass function: canonical focal list plus a pseudo flag."""

    frame: FrameSpec
    focals: tuple[tuple[ConfigSet, float], ...]
    pseudo: bool

    @property
    def focal_dict(self) -> dict[ConfigSet, float]:
        got = self.__dict__.get("_focal_dict")
        if got is None:
            got = dict(self.focals)
            object.__setattr__(self, "_focal_dict", got)
        return got

    def value(self, a: ConfigSet) -> float:
        return self.focal_dict.get(a, 0.0)

    def focal_sets(self) -> tuple[ConfigSet, ...]:
        return tuple(a for a, _ in self.focals)

    @property
    def variable_names(self) -> tuple[str, ...]:
        return self.frame.names

    def __repr__(self) -> str:  # compact, for debugging
        parts = ", ".join(
            "{%s}: %.4g" % ("|".join(",".join(v) for v in a.values()[:4]) + ("…" if len(a) > 4 else ""), m)
            for a, m in self.focals[:6]
        )
        more = "…" if len(self.focals) > 6 else ""
        return f"MassFunction(vars={self.variable_names}, {{{parts}{more}}})"


class MeasureTriple(NamedTuple):
    bel: float
    pl: float
    q: float


class CombineResult(NamedTuple):
    mass: MassFunction
    conflict: float


@dataclass(frozen=True)
class MassValidation:
    """Report produced by :func:`validate_mass`; never raises."""

    sum_abs: float
    empty_focal: bool
    negative_focals: int
    min_q: float
    vacuous: bool
    valid: bool
    issues: tuple[str, ...]


def mass(frame: FrameSpec, focals: Mapping[ConfigSet, float]) -> MassFunction:
    """Canonical mass function: prune tiny focals, renormalize sum(|m|) to 1.

    Empty focal sets are rejected; the pseudo flag is set iff any stored
    mass is negative.
    """
    acc: dict[tuple[int, ...], float] = {}
    sets: dict[tuple[int, ...], ConfigSet] = {}
    for a, m in focals.items():
        if a.frame != frame:
            raise MassError("focal set frame differs from mass-function frame")
        if a.is_empty:
            raise MassError("empty set cannot be a focal set")
        acc[a.members] = acc.get(a.members, 0.0) + float(m)
        sets.setdefault(a.members, a)
    items = [(k, m) for k, m in acc.items() if abs(m) >= PRUNE_EPS]
    total = sum(abs(m) for _, m in items)
    if total <= 0.0:
        raise MassError("all mass pruned away: nothing to normalize")
    items.sort(key=lambda km: km[0])
    focal_tuple = tuple((sets[k], m / total) for k, m in items)
    pseudo = any(m < 0.0 for _, m in focal_tuple)
    return MassFunction(frame, focal_tuple, pseudo)


def vacuous(frame: FrameSpec) -> MassFunction:
    return mass(frame, {frame.full_set(): 1.0})


def categorical(b: ConfigSet) -> MassFunction:
    """All mass on the single set ``b``."""
    return mass(b.frame, {b: 1.0})


def is_vacuous(m: MassFunction) -> bool:
    """True iff the single focal is the full frame with mass 1 up to tolerance."""
    if len(m.focals) != 1:
        return False
    a, v = m.focals[0]
    return a.is_full and abs(v - 1.0) <= MASS_TOL


def measures(m: MassFunction, a: ConfigSet) -> MeasureTriple:
    """Belief, plausibility and commonality of ``a`` by direct summation."""
    if a.frame != m.frame:
        raise MassError("frame mismatch in measures()")
    a_set = a.member_set
    bel = 0.0
    q = 0.0
    bel_comp = 0.0
    for b, v in m.focals:
        b_set = b.member_set
        if b_set <= a_set:
            bel += v
        if b_set >= a_set:
            q += v
        if not b_set & a_set:
            bel_comp += v
    # Pl(A) = 1 - Bel(Xi - A); for proper masses this is the mass hitting A.
    return MeasureTriple(bel, 1.0 - bel_comp, q)


def belief(m: MassFunction, a: ConfigSet) -> float:
    return measures(m, a).bel


def plausibility(m: MassFunction, a: ConfigSet) -> float:
    return measures(m, a).pl


def commonality(m: MassFunction, a: ConfigSet) -> float:
    return measures(m, a).q


# ---------------------------------------------------------------------------
# dense full-subset transforms (frames up to MOEBIUS_CAP configurations)

def _require_small(frame: FrameSpec, what: str) -> int:
    n = frame.config_count
    if n > MOEBIUS_CAP:
        raise MassError(f"{what} needs a full-subset table: frame has {n} > {MOEBIUS_CAP} configurations")
    return n


def _mask_of(a: ConfigSet) -> int:
    bits = 0
    for i in a.members:
        bits |= 1 << i
    return bits


def _set_of(mask: int, frame: FrameSpec) -> ConfigSet:
    return ConfigSet(frame, tuple(i for i in range(frame.config_count) if mask >> i & 1))


def _dense(m: MassFunction) -> np.ndarray:
    n = _require_small(m.frame, "dense transform")
    arr = np.zeros(1 << n)
    for a, v in m.focals:
        arr[_mask_of(a)] += v
    return arr


def _zeta_subsets(arr: np.ndarray, n: int) -> np.ndarray:
    """out[S] = sum over B subseteq S of arr[B] (belief-style accumulation)."""
    a = arr.copy()
    for i in range(n):
        a = a.reshape(-1, 2, 1 << i)
        a[:, 1, :] += a[:, 0, :]
    return a.reshape(-1)


def _moebius_subsets(arr: np.ndarray, n: int) -> np.ndarray:
    a = arr.copy()
    for i in range(n):
        a = a.reshape(-1, 2, 1 << i)
        a[:, 1, :] -= a[:, 0, :]
    return a.reshape(-1)


def _zeta_supersets(arr: np.ndarray, n: int) -> np.ndarray:
    """out[S] = sum over B superseteq S of arr[B] (commonality-style)."""
    a = arr.copy()
    for i in range(n):
        a = a.reshape(-1, 2, 1 << i)
        a[:, 0, :] += a[:, 1, :]
    return a.reshape(-1)


def _moebius_supersets(arr: np.ndarray, n: int) -> np.ndarray:
    a = arr.copy()
    for i in range(n):
        a = a.reshape(-1, 2, 1 << i)
        a[:, 0, :] -= a[:, 1, :]
    return a.reshape(-1)


def _mass_from_dense(arr: np.ndarray, frame: FrameSpec) -> MassFunction:
    focals = {}
    for mask in np.nonzero(np.abs(arr) >= PRUNE_EPS)[0]:
        mask = int(mask)
        if mask == 0:
            continue
        focals[_set_of(mask, frame)] = float(arr[mask])
    if not focals:
        raise MassError("transform produced no focal sets")
    return mass(frame, focals)


def moebius_invert(table: Mapping[ConfigSet, float], kind: str = "bel") -> MassFunction:
    """Mass function recovered from a full belief or commonality table.

    ``table`` must cover every nonempty subset of the frame (the empty set
    entry is optional and implied).  ``kind`` selects the inversion:
    ``"bel"`` uses m(A) = sum over B subseteq A of (-1)^|A-B| Bel(B),
    ``"q"`` uses m(A) = sum over B superseteq A of (-1)^|B-A| Q(B).
    """
    if kind not in ("bel", "q"):
        raise MassError(f"unknown table kind {kind!r}")
    if not table:
        raise MassError("empty table")
    frame = next(iter(table)).frame
    n = _require_small(frame, "moebius_invert")
    size = 1 << n
    arr = np.full(size, np.nan)
    arr[0] = 0.0 if kind == "bel" else np.nan  # empty-set entry unused for q
    for a, v in table.items():
        if a.frame != frame:
            raise MassError("table mixes frames")
        arr[_mask_of(a)] = float(v)
    if np.isnan(arr[1:]).any():
        missing = int(np.isnan(arr[1:]).sum())
        raise MassError(f"table incomplete: {missing} subsets missing")
    if kind == "bel":
        dense = _moebius_subsets(arr, n)
    else:
        arr[0] = 0.0  # never read by the superset sweep for nonempty sets
        dense = _moebius_supersets(arr, n)
    return _mass_from_dense(dense, frame)


def _closure_masks(m: MassFunction, limit: int = 4096) -> list[int]:
    """Intersection closure of the focal sets, as bitmasks (bounded)."""
    masks = {_mask_of(a) for a, _ in m.focals}
    frontier = list(masks)
    while frontier and len(masks) < limit:
        nxt = []
        for f in frontier:
            for g in list(masks):
                h = f & g
                if h and h not in masks:
                    masks.add(h)
                    nxt.append(h)
                    if len(masks) >= limit:
                        break
            else:
                continue
            break
        frontier = nxt
    return sorted(masks)


def min_commonality(m: MassFunction) -> float:
    """Smallest commonality over checked subsets.

    Every subset is checked on frames of at most FULL_VALIDATION_CAP
    configurations; above that only the intersection closure of the focal
    sets, where minima of Q occur.
    """
    n = m.frame.config_count
    if n <= FULL_VALIDATION_CAP:
        q = _zeta_supersets(_dense(m), n)
        return float(q[1:].min())
    best = math.inf
    masks = [(mask, frozenset(i for i in range(n) if mask >> i & 1)) for mask in _closure_masks(m)]
    focals = [(a.member_set, v) for a, v in m.focals]
    for _, members in masks:
        q = sum(v for b, v in focals if b >= members)
        best = min(best, q)
    return best


def validate_mass(frame: FrameSpec, focals: Mapping[ConfigSet, float]) -> MassValidation:
    """Diagnostic report on a raw focal table (no normalization applied)."""
    issues = []
    sum_abs = sum(abs(v) for v in focals.values())
    empty_focal = any(a.is_empty and abs(v) >= PRUNE_EPS for a, v in focals.items())
    negatives = sum(1 for v in focals.values() if v < -PRUNE_EPS)
    if abs(sum_abs - 1.0) > MASS_TOL:
        issues.append(f"sum(|m|) = {sum_abs:.6g}, not 1")
    if empty_focal:
        issues.append("empty set carries mass")
    min_q = math.inf
    stored = {a: v for a, v in focals.items() if not a.is_empty and abs(v) >= PRUNE_EPS}
    if stored:
        probe = MassFunction(frame, tuple(sorted(stored.items(), key=lambda kv: kv[0].members)), negatives > 0)
        min_q = min_commonality(probe)
        if negatives and min_q < -MASS_TOL:
            issues.append(f"pseudo mass with negative commonality {min_q:.3g}")
    else:
        issues.append("no focal sets")
    vac = len(stored) == 1 and next(iter(stored)).is_full and abs(next(iter(stored.values())) - 1.0) <= MASS_TOL
    return MassValidation(
        sum_abs=sum_abs,
        empty_focal=empty_focal,
        negative_focals=negatives,
        min_q=min_q,
        vacuous=vac,
        valid=not issues,
        issues=tuple(issues),
    )


# ---------------------------------------------------------------------------
# frame unification and reordering

def _merge_frames(f1: FrameSpec, f2: FrameSpec) -> FrameSpec:
    """Closest common superframe; shared variables must agree on domains."""
    if f1 == f2:
        return f1
    vars1 = {v.name: v for v in f1.variables}
    vars2 = {v.name: v for v in f2.variables}
    for name in vars1.keys() & vars2.keys():
        if vars1[name].domain != vars2[name].domain:
            raise FrameError(f"variable {name} has conflicting domains")
    if set(vars2) <= set(vars1):
        return f1
    if set(vars1) <= set(vars2):
        return f2
    merged = {**vars1, **vars2}
    return FrameSpec(tuple(merged[name] for name in sorted(merged)))


def vacuous_extend(m: MassFunction, target: FrameSpec) -> MassFunction:
    """Lift ``m`` onto a superframe by cylindrifying every focal set."""
    if m.frame == target:
        return m
    return mass(target, {cylinder_extend(a, target): v for a, v in m.focals})


def reframe(m: MassFunction, target: FrameSpec) -> MassFunction:
    """Re-encode ``m`` on a frame with the same variables in another order."""
    if m.frame == target:
        return m
    if set(m.frame.names) != set(target.names):
        raise FrameError("reframe requires identical variable sets")
    perm = tuple(m.frame.position(v.name) for v in target.variables)
    out = {}
    for a, v in m.focals:
        members = tuple(target.encode(tuple(vals[p] for p in perm)) for vals in a.values())
        out[ConfigSet(target, members)] = v
    return mass(target, out)


def _coextend(m1: MassFunction, m2: MassFunction) -> tuple[MassFunction, MassFunction]:
    common = _merge_frames(m1.frame, m2.frame)
    return vacuous_extend(m1, common), vacuous_extend(m2, common)


# ---------------------------------------------------------------------------
# the calculus proper

def combine(m1: MassFunction, m2: MassFunction) -> CombineResult:
    """Dempster combination, auto-extending to the closest common frame.

    Returns the normalized combination and the raw conflict (intersection
    mass landing on the empty set).  Raises TotalConflictError when nothing
    survives normalization.
    """
    m1, m2 = _coextend(m1, m2)
    acc: dict[tuple[int, ...], float] = {}
    sets: dict[tuple[int, ...], ConfigSet] = {}
    conflict = 0.0
    for b, vb in m1.focals:
        b_set = b.member_set
        b_full = b.is_full
        for c, vc in m2.focals:
            if b_full:
                inter_members = c.members
                inter = c
            elif c.is_full:
                inter_members = b.members
                inter = b
            else:
                common = b_set & c.member_set
                if not common:
                    conflict += vb * vc
                    continue
                inter_members = tuple(sorted(common))
                inter = None
            key = inter_members
            acc[key] = acc.get(key, 0.0) + vb * vc
            if key not in sets:
                sets[key] = inter if inter is not None else ConfigSet(m1.frame, inter_members)
    live = {sets[k]: v for k, v in acc.items() if abs(v) >= PRUNE_EPS}
    if not live:
        raise TotalConflictError(f"total conflict: {conflict:.6g} mass on empty intersections")
    return CombineResult(mass(m1.frame, live), conflict)


def marginalize(m: MassFunction, target: Iterable[str]) -> MassFunction:
    """Projection of ``m`` onto the sub-frame spanned by ``target``."""
    target = list(target)
    sub = m.frame.subframe(target)
    if sub == m.frame:
        return m
    acc: dict[ConfigSet, float] = {}
    for a, v in m.focals:
        p = project_set(a, target)
        acc[p] = acc.get(p, 0.0) + v
    return mass(sub, acc)


def condition(m: MassFunction, b: ConfigSet) -> MassFunction:
    """Shafer conditioning on evidence ``b``: combination with a categorical mass."""
    if b.is_empty:
        raise MassError("cannot condition on the empty set")
    return combine(m, categorical(b)).mass


def decombine(m12: MassFunction, m2: MassFunction) -> MassFunction:
    """Inverse of combination by commonality division (pseudo-mass result).

    Computes the mass whose commonality is proportional to Q12/Q2, via the
    full-subset Moebius inversion.  Wherever Q12 vanishes the quotient is
    taken as zero; a vanishing divisor under nonzero Q12 is an error.
    """
    m12, m2 = _coextend(m12, m2)
    n = _require_small(m12.frame, "decombine")
    q12 = _zeta_supersets(_dense(m12), n)
    q2 = _zeta_supersets(_dense(m2), n)
    ratio = np.zeros_like(q12)
    needed = np.abs(q12) >= PRUNE_EPS
    bad = needed & (np.abs(q2) < PRUNE_EPS)
    if bad.any():
        k = int(np.nonzero(bad)[0][0])
        raise DecombinationError(f"zero commonality divisor on subset mask {k:#x}")
    ratio[needed] = q12[needed] / q2[needed]
    ratio[0] = 0.0
    dense = _moebius_supersets(ratio, n)
    dense[0] = 0.0
    return _mass_from_dense(dense, m12.frame)


def anti_condition(m: MassFunction, h: Iterable[str]) -> MassFunction:
    """Decombine ``m`` by (the vacuous extension of) its own marginal on ``h``.

    This is the node-valuation transform of belief networks; for
    all-singleton (Bayesian) masses it reduces to ordinary conditioning of
    the probability table on ``h``.
    """
    h = list(h)
    if not h:
        raise MassError("anti-conditioning on the empty variable set is not defined")
    return decombine(m, marginalize(m, h))


def settle_proper(m: MassFunction, tol: float = MASS_TOL) -> MassFunction:
    """Drop sub-tolerance negative focals, returning a proper mass if possible."""
    if not m.pseudo:
        return m
    worst = min(v for _, v in m.focals)
    if worst < -tol:
        return m
    kept = {a: v for a, v in m.focals if v > 0.0}
    return mass(m.frame, kept)
