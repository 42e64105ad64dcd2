import random
from fractions import Fraction as F

import pytest
from hypothesis import given, settings

from gwtaut.dsl import load_builtin, parse_expression
from gwtaut.expr import Insertion, canonicalize, free, specialize_l
from gwtaut.rewrite import (RULES, exhaust, feasible_points,
                            prove_vanishing_threshold, reduce_modulo_certificate,
                            rule_jet_vanish, rule_trr0, rule_trr1, solve_span,
                            translate_desc_to_anc, trr0_pieces, vanishes,
                            wdvv_instance)
from gwtaut.verify import expansion
from termgen import random_term, seeds


def E(src):
    return parse_expression(src)


def corr(src):
    return E(src).terms[0].factors[0]


def same(a, b):
    return canonicalize(a - b).is_zero()


def test_trr0_on_three_points():
    assert same(rule_trr0(corr("1 <x_1 y z>")), E("1 <x m><y z m>"))


def test_trr1_on_one_point():
    assert same(rule_trr1(corr("1 <x_1>_1")),
                E("1 <m>_1<x m> + 1/24 <x m m>"))


def test_rules_decline_when_inapplicable():
    assert rule_trr0(corr("1 <x y z>")) is None
    assert rule_trr1(corr("1 <x>_2")) is None
    assert set(RULES) == {"string", "dilaton", "trr0", "trr1"}


def test_exhaust_removes_genus_zero_descendants():
    out = exhaust(E("1 <x_2 y z w>"), trr0_pieces, ancestor=False)
    for t in out.terms:
        for c in t.factors:
            assert trr0_pieces(c) is None


def test_translation_display():
    got = translate_desc_to_anc(corr("1 <x_0+>_2"), 0, 2)
    want = E("1 <x_2+>_2 - 1 <m>_2<m x_1+> - 1 <m_1>_2<m x_0+>"
             " + 1 <m>_2<m n><n x_0+>")
    assert same(got, want)


def test_translation_zero_is_identity():
    c = corr("1 <x_1 y>_1")
    assert same(translate_desc_to_anc(c, 0, 0), E("1 <x_1 y>_1"))
    with pytest.raises(ValueError):
        translate_desc_to_anc(c, 0, -1)


def test_translation_term_count_doubles_then_merges():
    # psibar^k gives 2^k raw terms; all survive for k <= 2
    for k, n in [(1, 2), (2, 4)]:
        assert len(translate_desc_to_anc(corr("1 <x>_3"), 0, k).terms) == n


def _ins(*names):
    return [Insertion(free(n)) for n in names]


def test_wdvv_instance_certifies():
    w = wdvv_instance(*_ins("x", "y", "z", "w"))
    cert = reduce_modulo_certificate(w + w + w)
    assert cert.ok and cert.check()
    assert cert.coefficients


def test_non_identity_is_not_certified():
    cert = reduce_modulo_certificate(E("1 <x y m><z w m>"))
    assert not cert.ok
    assert cert.remainder is not None


def test_tampered_certificate_fails_check():
    w = wdvv_instance(*_ins("x", "y", "z", "w"))
    cert = reduce_modulo_certificate(w)
    cert.coefficients = [c * 2 for c in cert.coefficients]
    assert not cert.check()


def test_solve_span():
    assert solve_span({0: F(3), 1: F(1)}, [{0: F(1)}, {1: F(1)}]) == \
        {0: F(3), 1: F(1)}
    assert solve_span({2: F(1)}, [{0: F(1)}]) is None


@pytest.fixture(scope="module")
def kept():
    return expansion(load_builtin("mumford"))[0]


def test_threshold_three(kept):
    assert prove_vanishing_threshold(kept) == 3
    assert rule_jet_vanish(specialize_l(kept, 3)).is_zero()
    assert rule_jet_vanish(specialize_l(kept, 4)).is_zero()


def test_low_slices_survive(kept):
    for l in (1, 2):
        assert not rule_jet_vanish(specialize_l(kept, l)).is_zero()


def test_threshold_of_zero_expression():
    assert prove_vanishing_threshold(E("1 <x> - 1 <x>")) == 1


@settings(max_examples=200, deadline=None)
@given(seeds)
def test_jet_vanish_is_idempotent(seed):
    e = E(random_term(random.Random(seed)))
    once = rule_jet_vanish(e)
    assert rule_jet_vanish(once) == once


@settings(max_examples=200, deadline=None)
@given(seeds)
def test_vanishing_means_no_feasible_point(seed):
    e = E(random_term(random.Random(seed)))
    for t in e.terms:
        assert vanishes(t) == (not feasible_points(t))
