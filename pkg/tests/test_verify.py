import random
from dataclasses import replace
from fractions import Fraction as F

import pytest

from gwtaut import oracle as O
from gwtaut.cli import BUILTINS
from gwtaut.dsl import builtin_path, load_builtin, parse, parse_expression
from gwtaut.expr import Equation, Expression, canonicalize, multiply, \
    specialize_l
from gwtaut.rewrite import rule_jet_vanish
from gwtaut.verify import (EXPECTED_L2, expansion, l2_pattern_sum,
                           reduce_genus0, reduce_genus1,
                           verify_r_invariance_mumford,
                           verify_r_invariance_user, verify_s_invariance)


def scaled(eq, k, factor=F(3, 2)):
    terms = list(eq.lhs.terms)
    terms[k] = replace(terms[k], coeff=terms[k].coeff * factor)
    return replace(eq, lhs=Expression(tuple(terms)))


def descends(t):
    """Does the term carry an explicit descendant or a genus zero
    two-point factor?"""
    return any(x.level.lin.c > 0 or (c.genus == 0 and len(c.insertions) == 2)
               for c in t.factors for x in c.insertions)


@pytest.mark.parametrize("name", BUILTINS)
def test_s_invariance_builtins(name):
    rep = verify_s_invariance(load_builtin(name))
    assert rep.proved, rep.to_text()
    assert rep.residual() == []


@pytest.mark.parametrize("name", ["mumford", "trr0", "trr1", "dilaton"])
def test_s_negative_controls(name):
    eq = load_builtin(name)
    ks = [k for k, t in enumerate(eq.lhs.terms) if descends(t)]
    assert ks
    for k in ks:
        assert not verify_s_invariance(scaled(eq, k)).proved


def test_s_blind_to_level_zero_products():
    # products of level zero correlators are S-invariant one by one, so a
    # corruption there is invisible to this pipeline (the R pipeline and
    # the oracle catch it)
    eq = load_builtin("mumford")
    k = next(k for k, t in enumerate(eq.lhs.terms) if t.coeff == F(7, 10))
    bad = scaled(eq, k, F(10, 7) * F(7, 11))
    assert verify_s_invariance(bad).proved
    assert not verify_r_invariance_user(bad).proved
    assert O.mumford_battery(trials=5, seed=2, E=bad)[0] > 0


def test_r_mumford_pipeline():
    rep = verify_r_invariance_mumford()
    assert rep.proved, rep.to_text()
    names = [s.name for s in rep.stages]
    assert names[0] == "expansion" and names[-1] == "vanishing"
    assert rep.to_dict()["l_range"] == [1, 2]


def test_r_user_path_on_mumford():
    assert verify_r_invariance_user(load_builtin("mumford")).proved


@pytest.mark.parametrize("name", ["trr0", "trr1", "wdvv", "string",
                                  "dilaton"])
def test_r_other_builtins(name):
    assert verify_r_invariance_user(load_builtin(name)).proved


def test_l2_pattern_contributions():
    kept, _ = expansion(load_builtin("mumford"))
    res = l2_pattern_sum(kept)
    assert sorted(res["contributions"]) == EXPECTED_L2
    assert sum(EXPECTED_L2) == 0


def test_bad_equation_fails_with_residual():
    text = builtin_path("mumford").read_text(encoding="utf-8")
    bad = parse(text.replace("7/10", "7/11"))
    rep = verify_r_invariance_user(bad)
    assert not rep.proved
    assert rep.residual()
    assert any(s.name.startswith("l=1:type1") and s.status == "failed"
               for s in rep.stages)


def test_genus_one_constant_needs_the_oracle():
    # the 1/24 of the genus one TRR is invisible to both actions
    bad = parse("1 <x_1+>_1 - 1 <x_0+ m><m>_1 - 1/23 <x_0+ m m> = 0")
    assert verify_r_invariance_user(bad).proved
    assert verify_s_invariance(bad).proved
    assert not O.validate_rule(O.corrupted_trr1(), trials=20).ok


@pytest.fixture(scope="module")
def product():
    m = load_builtin("mumford")
    e = canonicalize(multiply(parse_expression("1 <y_0+ z_0+>_1"), m.lhs))
    return Equation(e, "product"), m


def test_helper_needed_for_genus_two(product):
    eq, m = product
    rep = verify_r_invariance_user(eq)
    assert not rep.proved
    assert any("unreducible genus two" in r for r in rep.residual())
    assert verify_r_invariance_user(eq, [m]).proved


def _mat(rng, l, n=2):
    a = [[F(rng.randint(-5, 5), rng.randint(1, 4)) for _ in range(n)]
         for _ in range(n)]
    sg = 1 if l % 2 else -1
    return tuple(tuple(a[i][j] + sg * a[j][i] for j in range(n))
                 for i in range(n))


@pytest.mark.parametrize("l", [1, 2, 3])
def test_expansion_vanishes_on_ancestor_jets(l):
    """End to end: the R expansion of Mumford is zero in the rank two
    diagonal theory for concrete r_l, and each reduction step preserves
    the value of every single term."""
    kept, _ = expansion(load_builtin("mumford"))
    s = specialize_l(kept, l)
    rng = random.Random(l)
    for _ in range(2):
        p = O.random_jet(2, "ancestor", order=6, height=4, seed=rng)
        M = _mat(rng, l)
        b = {"x": (rng.randrange(2), rng.randint(0, 1))}
        mats = {("r", l): M}
        assert O.is_zero(O.evaluate(s, p, b, mats, l))
        for t in s.terms[:6]:
            one = Expression((t,))
            red = reduce_genus0(reduce_genus1(one, l))
            assert O._trim(O.evaluate(one, p, b, mats, l)) == \
                O._trim(O.evaluate(red, p, b, mats, l))


def test_helper_elimination_is_sound(product):
    eq, m = product
    kept, _ = expansion(eq)
    rng = random.Random(9)
    red = reduce_genus1(kept, 1, [m])
    raw = rule_jet_vanish(specialize_l(kept, 1))
    for _ in range(2):
        p = O.random_jet(2, "ancestor", order=6, height=3, seed=rng)
        b = {n: (0, 0) for n in "xyz"}
        mats = {("r", 1): _mat(rng, 1)}
        assert O._trim(O.evaluate(raw, p, b, mats, 1)) == \
            O._trim(O.evaluate(red, p, b, mats, 1))


def test_reports_are_deterministic():
    a = verify_r_invariance_mumford().to_json()
    b = verify_r_invariance_mumford(jobs=3).to_json()
    assert a == b
    s1 = verify_s_invariance(load_builtin("trr1")).to_json()
    s2 = verify_s_invariance(load_builtin("trr1"), jobs=2).to_json()
    assert s1 == s2
