# coding: utf-8

# # Checking an equation of your own

# Any .gw source works. Here: Mumford's relation multiplied by a genus one
# two-point correlator. The result is still a tautological equation.

from gwtaut.dsl import load_builtin, parse, parse_expression, print_equation
from gwtaut.expr import Equation, canonicalize, multiply
from gwtaut.verify import verify_r_invariance_user, verify_s_invariance

mumford = load_builtin("mumford")

E = Equation(canonicalize(multiply(parse_expression("1 <y_0+ z_0+>_1"),
                                   mumford.lhs)), "product")


# Without help the r pipeline gets stuck on one-point genus two
# correlators: nothing in genus zero or one removes them.

rep = verify_r_invariance_user(E)
print(rep.to_text())


# Mumford's relation has exactly one such term, so it can serve as a
# helper that trades them for lower genus.

rep = verify_r_invariance_user(E, helpers=[mumford])
print(rep.to_text())


# The s action never needs help.

print(verify_s_invariance(E).to_text())


# A wrong coefficient is reported with its residual.

bad = parse(print_equation(mumford).replace("7/10", "7/11"))
rep = verify_r_invariance_user(bad)
print(rep.status)
for line in rep.residual()[:3]:
    print(" ", line)
