# coding: utf-8

# # Invariance of Mumford's relation, step by step

from gwtaut.dsl import format_expression, load_builtin
from gwtaut.expr import specialize_l
from gwtaut.rewrite import prove_vanishing_threshold, rule_jet_vanish
from gwtaut import verify

E = load_builtin("mumford")
print(format_expression(E.lhs))


# ## The action of r

# Apply the infinitesimal upper triangular generator with symbolic level l
# and drop what the equation itself absorbs: derivatives of E and the
# free slot terms. Twenty groups survive.

kept, info = verify.expansion(E)
print(info["parts"])
print(len(kept.terms))
print(format_expression(kept))


# ## Large l

# Correlators whose descendant levels exceed their dimension vanish. That
# alone kills every slice with l >= 3.

print(prove_vanishing_threshold(kept))
print(format_expression(rule_jet_vanish(specialize_l(kept, 3))))


# ## l = 1

# Genus one TRR, then the terms split by genus. Each group reduces to an
# explicit combination of WDVV instances, which the certificate records.

v = verify.reduce_genus1(kept, 1)
t1, t2 = verify.split_types(v)
print(len(t1.terms), len(t2.terms))
cert = verify.reduce_modulo_certificate(verify.reduce_genus0(t2))
print(cert.ok, cert.check(), len(cert.identities))


# ## l = 2

# r_2 is antisymmetric, so most groups cancel outright. What is left
# reduces to a single pattern whose coefficients add up to zero.

res = verify.l2_pattern_sum(kept)
print(res["contributions"], res["sum"])


# ## All at once

print(verify.verify_r_invariance_mumford().to_text())
print(verify.verify_s_invariance(E).to_text())
