# coding: utf-8

# # Intersection numbers of the point

# The oracle computes psi class integrals on moduli of curves from the
# Virasoro recursion and memoizes them. Everything is an exact Fraction.

from fractions import Fraction

from gwtaut import oracle

print(oracle.point_intersection(0, (0, 0, 0)))
print(oracle.point_intersection(1, (1,)))
print(oracle.point_intersection(2, (4,)))


# Values off the dimension locus are zero rather than an error.

print(oracle.point_intersection(2, (3,)))


# ## A table you can keep

# Build every entry up to six points and check string, dilaton and
# dimension on the whole table. An empty list means no inconsistency.

table = oracle.PointTheory(gmax=3).build(6)
print(len(table.table), "entries")
print(oracle.check_consistency(table))


# ## Jets

# Expressions are evaluated at random jet points of a rank N diagonal
# theory. In the descendent regime the coordinates are small (a power
# series in eps); in the ancestor regime q_0 = 0 and the dilaton shift
# is absorbed into t_1.

from gwtaut.dsl import load_builtin

p = oracle.random_jet(rank=2, regime="ancestor", order=6, seed=1)
wdvv = load_builtin("wdvv")
print(oracle.evaluate(wdvv, p, {n: (0, 0) for n in "xyzw"}))


# Rules get the same treatment: both sides on random correlators.

from gwtaut.rewrite import RULES

for name, rule in RULES.items():
    rep = oracle.validate_rule(rule, trials=20, rank=2)
    print(name, "ok" if rep.ok else rep.counterexamples[0])

bad = oracle.validate_rule(oracle.corrupted_trr1(), trials=20)
print("1/23 instead of 1/24 caught:", not bad.ok)


# The genus two one-point number, a second way: solve Mumford's equation
# for its only genus two term.

print(oracle.mumford_forced_genus2(4) == Fraction(1, 1152))
