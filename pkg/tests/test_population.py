import numpy as np
import pytest

from dsbn.evidence import combine, commonality, marginalize, mass, measures, vacuous
from dsbn.frames import ConfigSet, factorize_product, product_set
from dsbn.population import (
    LabeledObject,
    Population,
    PopulationError,
    SelectionSpec,
    draw_population,
    empirical_mass,
    keyed_uniform,
    measure,
    population_from_counts,
    relabel_general,
    relabel_simple,
    selection_mass,
)

from conftest import as_value_dict, cs, make_frame, random_mass


def test_labeled_object_invariants(frame1):
    with pytest.raises(PopulationError):
        LabeledObject(ConfigSet(frame1, ()), frame1.full_set())
    with pytest.raises(PopulationError):
        LabeledObject(cs(frame1, "a"), cs(frame1, "b"))
    ok = LabeledObject(cs(frame1, "a"), ConfigSet(frame1, ()))
    assert ok.discarded


def test_draw_population_degenerate(frame1):
    pop = draw_population(vacuous(frame1), 10, seed=1)
    assert len(pop) == 10
    assert all(o.value_set.is_full for o in pop.objects)
    point = mass(frame1, {cs(frame1, "a"): 1.0})
    pop = draw_population(point, 5, seed=1)
    assert all(o.value_set == cs(frame1, "a") for o in pop.objects)


def test_draw_population_errors(frame1):
    with pytest.raises(PopulationError):
        draw_population(vacuous(frame1), 0)
    pseudo = mass(frame1, {cs(frame1, "a"): 1.2, frame1.full_set(): -0.2})
    assert pseudo.pseudo
    with pytest.raises(PopulationError):
        draw_population(pseudo, 5)


def test_draw_population_estimates_mass(frame1):
    m = mass(frame1, {cs(frame1, "a"): 0.5, cs(frame1, "b"): 0.5})
    pop = draw_population(m, 100_000, seed=42)
    est = empirical_mass(pop)
    # binomial 3 sigma at N=1e5 is about 0.005; the stated bound is 0.01
    for a, v in m.focals:
        assert est.value(a) == pytest.approx(v, abs=0.01)


def test_draw_population_deterministic(frame2):
    rng = np.random.default_rng(0)
    m = random_mass(frame2, rng)
    p1 = draw_population(m, 500, seed=7)
    p2 = draw_population(m, 500, seed=7)
    assert p1 == p2


def test_measure_axioms(frame2):
    obj = LabeledObject(cs(frame2, ("a", "x")), frame2.full_set())
    assert measure(obj, frame2.full_set()) is True
    assert measure(obj, ConfigSet(frame2, ())) is False
    # supersets of a hit are hits
    assert measure(obj, cs(frame2, ("a", "x"), ("b", "y"))) is True


def test_measure_modified_respects_label(frame1):
    obj = LabeledObject(cs(frame1, "a", "b"), cs(frame1, "b"))
    assert measure(obj, cs(frame1, "a"), modified=False) is True
    assert measure(obj, cs(frame1, "a"), modified=True) is False


def test_selection_mass(frame1):
    L = cs(frame1, "a", "b")
    m = selection_mass(L)
    assert m.value(L) == pytest.approx(1.0)
    assert selection_mass(SelectionSpec((frame1.full_set(),), (1.0,))).value(frame1.full_set()) == 1.0
    two = selection_mass(SelectionSpec((cs(frame1, "a"), frame1.full_set()), (0.3, 0.7)))
    assert two.value(cs(frame1, "a")) == pytest.approx(0.3)


def test_selection_spec_validation(frame1):
    with pytest.raises(PopulationError):
        SelectionSpec((cs(frame1, "a"),), (0.5,))
    with pytest.raises(PopulationError):
        SelectionSpec((cs(frame1, "a"), cs(frame1, "b")), (1.2, -0.2))
    with pytest.raises(PopulationError):
        SelectionSpec((ConfigSet(frame1, ()),), (1.0,))


def test_relabel_simple_clauses(frame1):
    full = frame1.full_set()
    pop = Population(
        frame1,
        (
            LabeledObject(cs(frame1, "a"), full),
            LabeledObject(cs(frame1, "a", "b"), full),
        ),
    )
    # label = full frame: nothing changes
    assert relabel_simple(pop, full) == pop
    # all value sets {a}, relabel by {b}: everything discarded
    only_a = Population(frame1, (LabeledObject(cs(frame1, "a"), full),) * 3)
    gone = relabel_simple(only_a, cs(frame1, "b"))
    assert gone.active_count == 0
    # value {a,b} with full label relabeled by {a}: kept with label {a}
    kept = relabel_simple(pop, cs(frame1, "a"))
    assert kept.objects[1].label == cs(frame1, "a")
    assert not kept.objects[1].discarded


def test_relabel_simple_empty_label(frame1):
    pop = population_from_counts(frame1, {cs(frame1, "a"): 2})
    with pytest.raises(PopulationError):
        relabel_simple(pop, ConfigSet(frame1, ()))


def test_relabel_general_degenerate_cases(frame1):
    pop = population_from_counts(frame1, {cs(frame1, "a"): 4, cs(frame1, "a", "b"): 4})
    unchanged = relabel_general(pop, SelectionSpec((frame1.full_set(),), (1.0,)), seed=3)
    assert unchanged == pop
    spec = SelectionSpec((cs(frame1, "a"),), (1.0,))
    assert relabel_general(pop, spec, seed=5) == relabel_simple(pop, cs(frame1, "a"))


def test_relabel_general_seed_dependence(frame1):
    pop = population_from_counts(frame1, {cs(frame1, "a"): 50, cs(frame1, "b"): 50})
    spec = SelectionSpec((cs(frame1, "a"), cs(frame1, "b")), (0.5, 0.5))
    r1 = relabel_general(pop, spec, seed=1)
    r2 = relabel_general(pop, spec, seed=2)
    assert relabel_general(pop, spec, seed=1) == r1  # reproducible
    assert r1 != r2  # different labelings are possible run to run


def test_keyed_uniform_order_independent():
    u = keyed_uniform(9, np.arange(100))
    assert np.all((0 <= u) & (u < 1))
    # value at index i does not depend on what other indices were asked
    assert keyed_uniform(9, np.array([17]))[0] == u[17]


def test_empirical_mass_counting(frame1):
    pop = population_from_counts(frame1, {cs(frame1, "a"): 5, cs(frame1, "a", "b"): 5})
    est = empirical_mass(pop)
    assert est.value(cs(frame1, "a")) == pytest.approx(0.5)
    assert est.value(cs(frame1, "a", "b")) == pytest.approx(0.5)
    lone = population_from_counts(frame1, {cs(frame1, "a"): 3})
    assert empirical_mass(lone).value(cs(frame1, "a")) == pytest.approx(1.0)


def test_empirical_mass_requires_active(frame1):
    pop = population_from_counts(frame1, {cs(frame1, "a"): 2})
    emptied = relabel_simple(pop, cs(frame1, "b"))
    with pytest.raises(PopulationError):
        empirical_mass(emptied)


def test_simple_relabeling_theorem_exact(frame1):
    # exact rational population: relabeled empirical mass equals the
    # Dempster combination of the prior empirical mass with the label mass
    counts = {cs(frame1, "a"): 256, cs(frame1, "b"): 256, cs(frame1, "a", "b"): 512}
    pop = population_from_counts(frame1, counts)
    L = cs(frame1, "a")
    after = empirical_mass(relabel_simple(pop, L))
    want = combine(empirical_mass(pop), selection_mass(L)).mass
    assert as_value_dict(after) == pytest.approx(as_value_dict(want), abs=1e-12)


def test_simple_relabeling_theorem_exact_two_vars(frame2):
    counts = {
        cs(frame2, ("a", "x")): 128,
        cs(frame2, ("a", "x"), ("a", "y")): 256,
        cs(frame2, ("b", "y")): 128,
        frame2.full_set(): 512,
    }
    pop = population_from_counts(frame2, counts)
    L = cs(frame2, ("a", "x"), ("b", "x"), ("b", "y"))
    after = empirical_mass(relabel_simple(pop, L))
    want = combine(empirical_mass(pop), selection_mass(L)).mass
    assert as_value_dict(after) == pytest.approx(as_value_dict(want), abs=1e-12)


def test_general_relabeling_theorem_in_expectation(frame1):
    counts = {cs(frame1, "a"): 300, cs(frame1, "b"): 200, cs(frame1, "a", "b"): 500}
    pop = population_from_counts(frame1, counts)
    spec = SelectionSpec((cs(frame1, "a"), frame1.full_set()), (0.4, 0.6))
    want = combine(empirical_mass(pop), selection_mass(spec)).mass
    sets = [cs(frame1, "a"), cs(frame1, "b"), frame1.full_set()]
    bel_sum = {a: 0.0 for a in sets}
    runs = 300
    for s in range(runs):
        est = empirical_mass(relabel_general(pop, spec, seed=s))
        for a in sets:
            bel_sum[a] += measures(est, a).bel
    for a in sets:
        assert bel_sum[a] / runs == pytest.approx(measures(want, a).bel, abs=0.01)


def test_composite_measurement_closure(frame2):
    # product-form value sets and product-form labels keep every effective
    # set product-form
    rng = np.random.default_rng(53)
    full = frame2.full_set()
    pops = []
    for _ in range(50):
        vals = {
            "X1": [v for v in ("a", "b") if rng.random() < 0.7] or ["a"],
            "X2": [v for v in ("x", "y") if rng.random() < 0.7] or ["x"],
        }
        pops.append(LabeledObject(product_set(frame2, vals), full))
    pop = Population(frame2, tuple(pops))
    label = product_set(frame2, {"X1": ["a", "b"], "X2": ["y"]})
    out = relabel_simple(pop, label)
    for o in out.objects:
        if not o.discarded:
            assert factorize_product(o.effective_set) is not None


def test_discard_rate_matches_conflict(frame1):
    # discarding frequency approximates the Dempster conflict with the label
    m = mass(frame1, {cs(frame1, "a"): 0.3, cs(frame1, "b"): 0.3, frame1.full_set(): 0.4})
    pop = draw_population(m, 50_000, seed=11)
    L = cs(frame1, "a")
    out = relabel_simple(pop, L)
    discard_rate = 1 - out.active_count / len(out)
    conflict = combine(empirical_mass(pop), selection_mass(L)).conflict
    assert discard_rate == pytest.approx(conflict, abs=1e-12)
