"""Chi-square independence tests on focal contingency tables.

The marginal test compares the joint focal-cell distribution against the
product of the two marginal focal distributions; the conditional test
compares it against the recombination of anti-conditioned marginals.  For
population sources the statistic is scaled by the number of active objects
so the usual chi-square asymptotics apply; for exact mass-function sources
the unscaled fraction-based statistic is returned (useful for structural
zero checks).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Union

from scipy.special import gammaincc, ndtri

from .evidence import (
    MassFunction,
    anti_condition,
    combine,
    marginalize,
    vacuous_extend,
)
from .frames import ConfigSet, project_set
from .population import Population, empirical_mass

Source = Union[MassFunction, Population]


@dataclass(frozen=True)
class TestResult:
    statistic: float
    df: int
    p_value: float
    independent: bool
    alpha: float


@dataclass(frozen=True)
class RelevanceResult:
    """Single-variable relevance: 1 minus the marginal mass of the full domain."""

    score: float
    interval: Optional[tuple[float, float]]


def _resolve(source: Source) -> tuple[MassFunction, Optional[int]]:
    if isinstance(source, Population):
        return empirical_mass(source), source.active_count
    return source, None


def chi2_survival(statistic: float, df: int) -> float:
    """Upper-tail chi-square probability via the regularized incomplete gamma."""
    if df < 1:
        raise ValueError(f"degrees of freedom must be >= 1, got {df}")
    if statistic < 0:
        raise ValueError("chi-square statistic cannot be negative")
    if math.isinf(statistic):
        return 0.0
    return float(gammaincc(df / 2.0, statistic / 2.0))


def chi2_marginal(
    source: Source,
    x1: Sequence[str],
    x2: Sequence[str],
    alpha: float = 0.05,
) -> TestResult:
    """Chi-square test of marginal independence between variable groups.

    The table cells are pairs of focal sets of the two marginals; the
    statistic sums (observed - expected)^2 / expected over all cells with
    expected = product of marginal masses.  Degrees of freedom are
    (F1 - 1) * (F2 - 1) over the focal counts.
    """
    x1, x2 = list(x1), list(x2)
    if not x1 or not x2 or set(x1) & set(x2):
        raise ValueError("variable groups must be nonempty and disjoint")
    m, n_active = _resolve(source)
    joint = marginalize(m, x1 + x2)
    m1 = marginalize(joint, x1)
    m2 = marginalize(joint, x2)
    f1, f2 = len(m1.focals), len(m2.focals)
    df = (f1 - 1) * (f2 - 1)
    if df < 1:
        raise ValueError(f"degenerate focal table: df = {df}")
    observed: dict[tuple[ConfigSet, ConfigSet], float] = {}
    for c, v in joint.focals:
        key = (project_set(c, x1), project_set(c, x2))
        observed[key] = observed.get(key, 0.0) + v
    stat = 0.0
    for a, va in m1.focals:
        for b, vb in m2.focals:
            expected = va * vb
            obs = observed.pop((a, b), 0.0)
            stat += (obs - expected) ** 2 / expected
    # only a pseudo joint can put cells outside the marginal focal grid;
    # pool such stray mass into one conservative extra cell
    stray = sum(observed.values())
    if stray > 0.0:
        e = 1.0 / (2 * (n_active if n_active is not None else 1))
        stat += (stray - e) ** 2 / e
    if n_active is not None:
        stat *= n_active
    p = chi2_survival(stat, df)
    return TestResult(stat, df, p, p > alpha, alpha)


def variable_relevance(
    source: Source, xi: str, confidence: float = 0.95
) -> RelevanceResult:
    """How much the joint depends on one variable: 1 - marginal mass of its domain.

    For population sources a Wilson score interval for the underlying
    Bernoulli proportion is attached.
    """
    m, n_active = _resolve(source)
    marg = marginalize(m, [xi])
    score = 1.0 - marg.value(marg.frame.full_set())
    if n_active is None:
        return RelevanceResult(score, None)
    z = float(ndtri(0.5 + confidence / 2.0))
    n = n_active
    center = (score + z * z / (2 * n)) / (1 + z * z / n)
    half = (z / (1 + z * z / n)) * math.sqrt(score * (1 - score) / n + z * z / (4 * n * n))
    return RelevanceResult(score, (max(0.0, center - half), min(1.0, center + half)))


def conditional_independence(
    source: Source,
    x: Sequence[str],
    y: Sequence[str],
    given: Sequence[str] = (),
    alpha: float = 0.05,
) -> TestResult:
    """Chi-square test of conditional independence of ``x`` and ``y`` given ``given``.

    The expected distribution is built by anti-conditioning both
    (x, given) and (y, given) marginals on ``given`` and recombining them
    with the ``given`` marginal.  Degrees of freedom: focal count of the
    joint minus the focal counts of the two multi-variable marginals plus
    one, floored at one.  An empty ``given`` reduces to the marginal test.
    """
    x, y, z = list(x), list(y), list(given)
    if not x or not y:
        raise ValueError("variable groups must be nonempty")
    if set(x) & set(y) or set(x) & set(z) or set(y) & set(z):
        raise ValueError("variable groups must be disjoint")
    if not z:
        return chi2_marginal(source, x, y, alpha)
    m, n_active = _resolve(source)
    joint = marginalize(m, x + y + z)
    frame = joint.frame
    m_xz = marginalize(joint, x + z)
    m_yz = marginalize(joint, y + z)
    m_z = marginalize(joint, z)
    a_xz = vacuous_extend(anti_condition(m_xz, z), frame)
    a_yz = vacuous_extend(anti_condition(m_yz, z), frame)
    expected = combine(combine(a_xz, a_yz).mass, vacuous_extend(m_z, frame)).mass
    df = len(joint.focals) - len(m_xz.focals) - len(m_yz.focals) + 1
    df = max(df, 1)
    n_eff = n_active if n_active is not None else 1
    stat = 0.0
    stray = 0.0  # observed mass on cells the expected support misses
    exp_d = expected.focal_dict
    obs_d = dict(joint.focals)
    for cell, e in exp_d.items():
        o = obs_d.pop(cell, 0.0)
        if e <= 0.0:
            stray += o
            continue
        stat += (o - e) ** 2 / e
    stray += sum(obs_d.values())
    if stray > 0.0:
        # pool unexpected observations into one conservative extra cell
        e = 1.0 / (2 * n_eff)
        stat += (stray - e) ** 2 / e
    if n_active is not None:
        stat *= n_active
    p = chi2_survival(stat, df)
    return TestResult(stat, df, p, p > alpha, alpha)
