"""Invariance pipelines for tautological equations.

``verify_s_invariance`` checks that the lower triangular action maps an
equation into the ideal it generates; ``verify_r_invariance_mumford`` runs
the staged upper triangular computation for Mumford's genus two relation;
``verify_r_invariance_user`` is the same pipeline for user equations, with
helper equations available to remove genus two correlators.
"""
from __future__ import annotations

import itertools
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction

from .dsl import format_term, load_builtin
from .expr import (Correlator, Equation, Expression, Idx, Insertion, Level,
                   Lin, Mat, Term, canonicalize, freshen, specialize_l,
                   term_key)
from .quantization import (LoopGenerator, match_derivative_of_E, r_parts,
                           s_parts, substitute_free)
from .rewrite import (Certificate, exhaust, prove_vanishing_threshold,
                      reduce_modulo_certificate, rule_jet_vanish,
                      solve_span, trr0_pieces, trr1_pieces, wdvv_closure,
                      _vec)

REPORT_SCHEMA = "report.schema.json"


@dataclass
class Stage:
    name: str
    in_terms: int
    out_terms: int
    status: str
    certificate: dict | None = None
    residual: list = field(default_factory=list)
    detail: dict = field(default_factory=dict)

    @property
    def proved(self) -> bool:
        return self.status == "proved"


@dataclass
class VerificationReport:
    equation: str
    action: str
    l_range: list
    stages: list = field(default_factory=list)

    @property
    def status(self) -> str:
        return "proved" if self.stages and all(s.proved for s in self.stages) \
            else "failed"

    @property
    def proved(self) -> bool:
        return self.status == "proved"

    def residual(self) -> list[str]:
        return [f"[{s.name}] {r}" for s in self.stages for r in s.residual]

    def to_dict(self) -> dict:
        stages = []
        for s in self.stages:
            d = asdict(s)
            if d["certificate"] is None:
                del d["certificate"]
            stages.append(d)
        return {"equation": self.equation, "action": self.action,
                "l_range": list(self.l_range), "stages": stages,
                "status": self.status}

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), default=str, **kw)

    def to_text(self) -> str:
        lines = [f"{self.equation} [{self.action}] l in {self.l_range}: "
                 f"{self.status}"]
        for s in self.stages:
            lines.append(f"  {s.name}: {s.in_terms} -> {s.out_terms} terms, "
                         f"{s.status}")
            lines.extend(f"    {r}" for r in s.residual)
        return "\n".join(lines)


def _lhs(E) -> Expression:
    return E.lhs if isinstance(E, Equation) else E


def _name(E, default="<expr>") -> str:
    return (E.name if isinstance(E, Equation) and E.name else default)


def _dump(e: Expression, limit: int = 40) -> list[str]:
    return [format_term(t) for t in e.terms[:limit]]


def _cert_dict(c: Certificate) -> dict:
    return {"identities": [[format_term(t) for t in w.terms]
                           for w in c.identities],
            "coefficients": [str(x) for x in c.coefficients],
            "ok": c.ok}


# ------------------------------------------------------------ S-invariance

def floating_names(e: Expression) -> list[str]:
    """Free indices that occur in a floating slot."""
    out = set()
    for t in e.terms:
        for c in t.factors:
            for x in c.insertions:
                if x.idx.kind == "f" and x.level.floating:
                    out.add(x.idx.name)
    return sorted(out)


def instantiate(e: Expression, offsets: dict) -> Expression:
    """Pin every floating slot of free index ``f`` to its base level plus
    ``offsets[f]``."""
    out = []
    for t in e.terms:
        facs = tuple(Correlator(c.genus, tuple(
            Insertion(x.idx, Level(x.level.lin + offsets.get(x.idx.name, 0)))
            if x.idx.kind == "f" and x.level.floating else x
            for x in c.insertions)) for c in t.factors)
        out.append(Term(t.coeff, facs, t.atoms, t.sign, t.binders))
    return canonicalize(Expression(tuple(out)))


def _max_level(e: Expression) -> int:
    top = 0
    for t in e.terms:
        for c in t.factors:
            for x in c.insertions:
                if x.level.lin.is_const:
                    top = max(top, x.level.lin.c)
    return top


def _s_check(EK: Expression, offsets: dict, L: int):
    """One pinned instance: returns (q-part size, unmatched q, residual)."""
    P = s_parts(LoopGenerator("lower", L), EK)
    q = P["q"]
    for l in range(1, L + 1):
        _, q = match_derivative_of_E(q, EK, "s", l)
    free = P["lower_free"]
    for f, k in offsets.items():
        for l in range(1, k + 1):
            free = canonicalize(free - substitute_free(
                EK, Idx("f", f), -l, "s", Lin(l)))
    rest = canonicalize(P["lower"] + P["delta"] + free)
    return len(P["q"]), q, rest


def verify_s_invariance(E, max_offset: int = 2, jobs: int = 1
                        ) -> VerificationReport:
    """Lower triangular invariance of ``E``.

    Floating slots are pinned to every offset combination up to
    ``max_offset``; for each instance the q-linear part must be a
    q-derivative of the instance, and everything else must cancel under
    canonicalization alone once the moved-slot copies of ``E`` are removed.
    """
    e = canonicalize(_lhs(E))
    names = floating_names(e)
    combos = [dict(zip(names, ks)) for ks in
              itertools.product(range(max_offset + 1), repeat=len(names))]
    report = VerificationReport(_name(E), "s", [])

    def run(offsets):
        EK = instantiate(e, offsets)
        L = _max_level(EK) + 2
        return offsets, L, EK, _s_check(EK, offsets, L)

    if jobs > 1:
        with ThreadPoolExecutor(jobs) as ex:
            results = list(ex.map(run, combos))
    else:
        results = [run(c) for c in combos]
    top = 0
    for offsets, L, EK, (nq, q, rest) in results:
        top = max(top, L)
        tag = ",".join(f"{k}+{v}" for k, v in offsets.items()) or "pinned"
        qa = Stage(f"a:{tag}", nq, len(q.terms),
                   "proved" if q.is_zero() else "failed",
                   residual=_dump(q))
        qb = Stage(f"b:{tag}", len(EK.terms), len(rest.terms),
                   "proved" if rest.is_zero() else "failed",
                   residual=_dump(rest))
        report.stages += [qa, qb]
    report.l_range = [1, top]
    return report


# ------------------------------------------------------------ R-invariance

def free_names(e: Expression) -> list[str]:
    return sorted({x.idx.name for t in e.terms for c in t.factors
                   for x in c.insertions if x.idx.kind == "f"})


def expansion(E) -> tuple[Expression, dict]:
    """Symbolic ``l`` expansion with the derivative-of-``E`` parts removed.

    Returns the kept terms (after jet vanishing) and a summary of what was
    matched away.
    """
    e = _lhs(E)
    P = r_parts(None, e, "sym")
    _, q = match_derivative_of_E(P["q"] + P["split0"], e, "r", "sym")
    free = P["raise_free"]
    for f in free_names(e):
        free = canonicalize(free - substitute_free(
            e, Idx("f", f), Lin(l=1), "r", Lin(l=1)))
    kept = rule_jet_vanish(canonicalize(P["raise"] + P["genus"] +
                                        P["split"]))
    info = {"parts": {k: len(v.terms) for k, v in P.items()},
            "unmatched_q": q, "unmatched_free": free}
    return kept, info


def reduce_genus1(kept: Expression, l: int, helpers=()) -> Expression:
    """Specialize to one ``l`` and remove explicit genus one descendants
    (and genus two correlators through ``helpers``)."""
    v = rule_jet_vanish(specialize_l(kept, l))
    v = rule_jet_vanish(exhaust(v, trr1_pieces))
    if helpers:
        v = rule_jet_vanish(eliminate_genus2(v, helpers))
        v = rule_jet_vanish(exhaust(v, trr1_pieces))
    return v


def reduce_genus0(e: Expression) -> Expression:
    return rule_jet_vanish(exhaust(e, trr0_pieces))


def split_types(e: Expression) -> tuple[Expression, Expression]:
    """Terms with a genus one factor, and pure genus zero terms."""
    t1 = tuple(t for t in e.terms if any(c.genus == 1 for c in t.factors))
    t2 = tuple(t for t in e.terms if all(c.genus == 0 for c in t.factors))
    return canonicalize(Expression(t1)), canonicalize(Expression(t2))


def genus1_groups(e: Expression) -> dict[str, Expression]:
    """Group by the genus one factor: does it carry a matrix index?"""
    groups: dict[str, list] = {}
    for t in e.terms:
        mats = {i for a in t.atoms if isinstance(a, Mat) for i in (a.i, a.j)}
        g1 = [c for c in t.factors if c.genus == 1]
        key = "other"
        if len(g1) == 1 and len(g1[0].insertions) == 1:
            key = "<r>_1" if g1[0].insertions[0].idx in mats else "<m>_1"
        groups.setdefault(key, []).append(t)
    return {k: canonicalize(Expression(tuple(v)))
            for k, v in sorted(groups.items())}


def _certify(name: str, e: Expression, jetcap=None) -> Stage:
    cert = reduce_modulo_certificate(e, jetcap)
    return Stage(name, len(e.terms), 0 if cert.ok else len(e.terms),
                 "proved" if cert.ok else "failed", _cert_dict(cert),
                 [] if cert.ok else _dump(e))


def _golden(name: str) -> Expression:
    return canonicalize(load_builtin(name).lhs)


def _compare(name: str, got: Expression, want: Expression) -> Stage:
    diff = canonicalize(got - want)
    return Stage(name, len(got.terms), len(want.terms),
                 "proved" if diff.is_zero() else "failed",
                 residual=_dump(diff))


def _run_groups(groups: dict, jobs: int, jetcap) -> list[Stage]:
    items = list(groups.items())
    if jobs > 1:
        with ThreadPoolExecutor(jobs) as ex:
            return list(ex.map(lambda kv: _certify(*kv, jetcap=jetcap),
                               items))
    return [_certify(k, v, jetcap) for k, v in items]


# ------------------------------------------------------- genus two helpers

def _solitary_head(H: Expression):
    """The term ``c <y_b+>_2`` of a helper: its only factor is a one-point
    genus two correlator at a floating free slot.  ``None`` unless unique."""
    heads = []
    for t in H.terms:
        if len(t.factors) != 1:
            continue
        c = t.factors[0]
        if c.genus != 2 or len(c.insertions) != 1:
            continue
        y = c.insertions[0]
        if y.idx.kind == "f" and y.level.floating and y.level.lin.is_const:
            heads.append((t, y))
    return heads[0] if len(heads) == 1 else None


def _instantiate_helper(terms, y, idx, offset: int, floating=False):
    out = []
    for t in terms:
        t = freshen(t)
        facs = tuple(Correlator(c.genus, tuple(
            Insertion(idx, Level(x.level.lin + offset, floating))
            if x.idx == y.idx
            else x for x in c.insertions)) for c in t.factors)
        out.append(Term(t.coeff, facs, t.atoms, t.sign, t.binders))
    return out


def eliminate_genus2(e: Expression, helpers, rounds: int = 16
                     ) -> Expression:
    """Replace one-point genus two correlators using helper equations with a
    solitary genus two term, until only levels below every helper's base
    remain.  Correlators no helper reaches are kept."""
    for _ in range(rounds):
        new = _eliminate_once(e, helpers)
        if new == e:
            return new
        e = new
    return e


def _eliminate_once(e: Expression, helpers) -> Expression:
    heads = []
    for H in helpers:
        H = _lhs(H)
        found = _solitary_head(H)
        if found:
            heads.append((H, *found))
    out = []
    for t in e.terms:
        done = False
        for k, c in enumerate(t.factors):
            if c.genus != 2 or len(c.insertions) != 1:
                continue
            x = c.insertions[0]
            if not x.level.lin.is_const:
                continue
            # a floating free slot stays floating: the helper holds for
            # every level shift of its own free slot
            fl = x.level.floating
            if fl and x.idx.kind != "f":
                continue
            for H, h, y in heads:
                off = x.level.lin.c - y.level.lin.c
                if off < 0:
                    continue
                rest = t.factors[:k] + t.factors[k + 1:]
                others = [u for u in H.terms if u is not h]
                for u in _instantiate_helper(others, y, x.idx, off, fl):
                    out.append(Term(-t.coeff * u.coeff / h.coeff,
                                    rest + u.factors, t.atoms + u.atoms,
                                    t.sign + u.sign, t.binders | u.binders))
                done = True
                break
            if done:
                break
        if not done:
            out.append(t)
    return canonicalize(Expression(tuple(out)))


def genus2_terms(e: Expression) -> Expression:
    return Expression(tuple(t for t in e.terms
                            if any(c.genus >= 2 for c in t.factors)))


# --------------------------------------------------------------- pipelines

PATTERN_L2 = "1 r[2](i,j) <i x_0+ m> <m n n> <j a a>"
EXPECTED_L2 = sorted(Fraction(x) for x in
                  ("-1/576", "1/240", "-1/5760", "-1/5760", "-1/480"))


def _expansion_stage(E) -> tuple[Stage, Expression]:
    kept, info = expansion(E)
    bad = canonicalize(info["unmatched_q"] + info["unmatched_free"])
    st = Stage("expansion", sum(info["parts"].values()), len(kept.terms),
               "proved" if bad.is_zero() else "failed",
               residual=_dump(bad), detail={"parts": info["parts"]})
    return st, kept


def _vanishing_stage(kept: Expression, threshold: int | None,
                     expect: int | None = None) -> Stage:
    """Every term dies for ``l >= threshold``: checked on the shifted
    symbolic family and on a few concrete levels."""
    if threshold is None:
        return Stage("vanishing", len(kept.terms), len(kept.terms), "failed",
                     residual=["some term survives for arbitrarily large l"])
    from .expr import substitute
    # terms labelled with a concrete level belong to that slice only
    family = [t for t in kept.terms
              if not any(isinstance(a, Mat) and a.level.is_const
                         for a in t.atoms)]
    shifted = Expression(tuple(substitute(t, "l", Lin(threshold - 1, l=1))
                               for t in family))
    left = rule_jet_vanish(canonicalize(shifted))
    for l in range(threshold, threshold + 3):
        left = canonicalize(left + rule_jet_vanish(specialize_l(kept, l)))
    ok = left.is_zero() and (expect is None or threshold == expect)
    return Stage("vanishing", len(kept.terms), len(left.terms),
                 "proved" if ok else "failed", residual=_dump(left),
                 detail={"threshold": threshold})


def _slice_stages(kept: Expression, l: int, helpers, jetcap, jobs,
                  goldens=None) -> list[Stage]:
    v = reduce_genus1(kept, l, helpers)
    stages = []
    g2 = genus2_terms(v)
    if g2.terms:
        return [Stage(f"l={l}:genus2", len(v.terms), len(g2.terms), "failed",
                      residual=["unreducible genus two term: " + r
                                for r in _dump(g2)])]
    t1, t2 = split_types(v)
    if goldens:
        stages.append(_compare(f"l={l}:type1-display", t1,
                               _golden(goldens[0])))
        stages.append(_compare(f"l={l}:type2-display", t2,
                               _golden(goldens[1])))
    groups = {f"l={l}:type1 {k}": g for k, g in
              genus1_groups(reduce_genus0(t1)).items()}
    groups[f"l={l}:type2"] = reduce_genus0(t2)
    return stages + _run_groups(groups, jobs, jetcap)


def l2_pattern_sum(kept: Expression) -> dict:
    """Contributions to the surviving ``l = 2`` pattern.

    Each source term is reduced on its own and its coefficient on the
    pattern recorded; the other surviving terms are projected onto the
    pattern modulo WDVV.  Coefficients are reported in the orientation of
    ``PATTERN_L2``.
    """
    from .dsl import parse_expression
    pat = canonicalize(parse_expression(PATTERN_L2))
    unit = pat.terms[0]
    orient = unit.coeff
    key = term_key(unit)
    v = rule_jet_vanish(specialize_l(kept, 2))
    sources = []
    total = []
    for t in v.terms:
        red = reduce_genus0(rule_jet_vanish(exhaust(Expression((t,)),
                                                    trr1_pieces)))
        c = sum((u.coeff for u in red.terms if term_key(u) == key),
                Fraction(0))
        if c:
            sources.append((format_term(t), c * orient))
        total.extend(red.terms)
    R = canonicalize(Expression(tuple(total)))
    on = sum((u.coeff for u in R.terms if term_key(u) == key), Fraction(0))
    rest = canonicalize(Expression(tuple(u for u in R.terms
                                         if term_key(u) != key)))
    gens = wdvv_closure(canonicalize(R + pat))
    index: dict = {}
    target = _vec(rest, index)
    pv = _vec(Expression((unit.with_coeff(Fraction(1)),)), index)
    lam = solve_span(target, [_vec(w, index) for w in gens] + [pv])
    projected = None if lam is None else lam.get(len(gens), Fraction(0))
    independent = solve_span(pv, [_vec(w, index) for w in gens]) is None
    contributions = [c for _, c in sources]
    if projected is not None:
        contributions.append(projected * orient)
    return {"sources": sources, "on_pattern": on * orient,
            "projected": None if projected is None else projected * orient,
            "contributions": contributions,
            "sum": sum(contributions, Fraction(0)),
            "pattern_independent": independent}


def verify_r_invariance_mumford(jetcap: int | None = None, jobs: int = 1
                                ) -> VerificationReport:
    E = load_builtin("mumford")
    report = VerificationReport("mumford", "r", [1, 2])
    st, kept = _expansion_stage(E)
    report.stages.append(st)
    report.stages.append(_compare("expansion-display", kept, rule_jet_vanish(
        _golden("rm_golden"))))
    report.stages += _slice_stages(kept, 1, (), jetcap, jobs,
                                   ("type1_golden", "type2_golden"))
    report.stages += _slice_stages(kept, 2, (), jetcap, jobs)
    info = l2_pattern_sum(kept)
    ok = (info["sum"] == 0 and info["pattern_independent"] and
          sorted(info["contributions"]) == EXPECTED_L2)
    report.stages.append(Stage(
        "l=2:pattern-sum", len(info["sources"]), 0 if ok else 1,
        "proved" if ok else "failed",
        detail={k: (str(v) if isinstance(v, Fraction) else
                    [str(c) for c in v] if k == "contributions" else v)
                for k, v in info.items()}))
    report.stages.append(_vanishing_stage(
        kept, prove_vanishing_threshold(kept), expect=3))
    return report


def verify_r_invariance_user(E, helpers=(), jetcap: int | None = None,
                             jobs: int = 1) -> VerificationReport:
    """Generic pipeline: expansion, then every ``l`` below the vanishing
    threshold is reduced and certified."""
    report = VerificationReport(_name(E), "r", [])
    st, kept = _expansion_stage(E)
    report.stages.append(st)
    threshold = prove_vanishing_threshold(kept)
    if threshold is None:
        report.stages.append(_vanishing_stage(kept, None))
        return report
    report.l_range = [1, threshold - 1] if threshold > 1 else []
    for l in range(1, threshold):
        report.stages += _slice_stages(kept, l, helpers, jetcap, jobs)
    report.stages.append(_vanishing_stage(kept, threshold))
    return report
