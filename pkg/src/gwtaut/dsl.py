"""Text format for correlator equations (``.gw`` files).

One equation per file, written as a signed sum of terms followed by
``= 0``::

    #name mumford
    #genus 2
    #codim 2
    -1 <x_2+>_2 + 1 <x_1+ m><m>_2 + ... + 1/960 <x_0+ m m n n> = 0

A term is a rational literal followed by optional sign/summation prefixes
and a product of factors:

* ``<i_k j ...>_g``  correlator (genus defaults to 0, level to 0);
  ``x_2+`` marks a floating level, ``i_{l-1-m}`` a symbolic one;
* ``r[l](i,j)``, ``s[2](i,j)``  generator matrix entries;
* ``q[n+l](j)``, ``t[1](j)``  coordinates (``t`` is dilaton shifted);
* ``eta(i,j)``  the metric;
* ``(-1)^{l+m}``  symbolic sign, ``sum[m]`` / ``sum[n]`` summation binders.

Identifiers ``x y z w`` are free, ``one`` is the unit, and every other
identifier must occur exactly twice in its term (summed).
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

from .expr import (FREE_NAMES, UNIT, Correlator, Equation, Eta,
                   Expression, ExpressionError, Idx, Insertion, Level, Lin,
                   Mat, QVar, Term, canonicalize)


class ParseError(ValueError):
    def __init__(self, msg: str, line: int = 0, col: int = 0):
        super().__init__(f"{line}:{col}: {msg}")
        self.msg, self.line, self.col = msg, line, col


@dataclass
class SourceEquation:
    name: str
    codim: int | None
    genus: int | None
    text: str
    spans: list


_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<int>\d+)
  | (?P<ident>[A-Za-z][A-Za-z0-9]*)
  | (?P<sym>[<>_+\-/=\[\](),{}^])
""", re.VERBOSE)


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str, line0: int = 1) -> list[_Tok]:
    toks = []
    pos, line, col = 0, line0, 1
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        s = m.group()
        if kind != "ws":
            toks.append(_Tok(kind if kind != "sym" else s, s, line, col))
        for ch in s:
            if ch == "\n":
                line, col = line + 1, 1
            else:
                col += 1
        pos = m.end()
    toks.append(_Tok("eof", "", line, col))
    return toks


class _Parser:
    def __init__(self, toks: list[_Tok]):
        self.toks = toks
        self.pos = 0

    @property
    def cur(self) -> _Tok:
        return self.toks[self.pos]

    def peek(self, k: int = 1) -> _Tok:
        return self.toks[min(self.pos + k, len(self.toks) - 1)]

    def error(self, msg: str, tok: _Tok | None = None):
        tok = tok or self.cur
        raise ParseError(msg, tok.line, tok.col)

    def take(self, kind: str) -> _Tok:
        if self.cur.kind != kind:
            shown = self.cur.text or "end of input"
            self.error(f"expected {kind!r}, found {shown!r}")
        t = self.cur
        self.pos += 1
        return t

    def accept(self, kind: str) -> bool:
        if self.cur.kind == kind:
            self.pos += 1
            return True
        return False

    # equation := term (("+"|"-") term)* "=" "0"
    def equation(self) -> list[tuple[Term, _Tok]]:
        terms = []
        neg = self.accept("-")
        terms.append(self.term(neg))
        while self.cur.kind in "+-" and self.cur.kind != "eof":
            neg = self.take(self.cur.kind).kind == "-"
            terms.append(self.term(neg))
        self.take("=")
        z = self.take("int")
        if z.text != "0":
            self.error("right-hand side must be 0", z)
        self.take("eof")
        return terms

    def rational(self) -> Fraction:
        num = int(self.take("int").text)
        den = 1
        if self.accept("/"):
            tok = self.take("int")
            den = int(tok.text)
            if den == 0:
                self.error("zero denominator", tok)
        return Fraction(num, den)

    def term(self, neg: bool) -> tuple[Term, _Tok]:
        start = self.cur
        coeff = self.rational()
        if neg:
            coeff = -coeff
        sign = Lin()
        binders: set[str] = set()
        factors: list[Correlator] = []
        atoms: list = []
        names: list[tuple[str, _Tok]] = []
        while True:
            k = self.cur
            if k.kind == "(":
                self.take("(")
                self.take("-")
                one = self.take("int")
                if one.text != "1":
                    self.error("expected (-1)^{...}", one)
                self.take(")")
                self.take("^")
                sign = sign + self.affine_braced()
            elif k.kind == "ident" and k.text == "sum" and \
                    self.peek().kind == "[":
                self.take("ident")
                self.take("[")
                s = self.take("ident")
                if s.text not in ("m", "n"):
                    self.error("only m and n can be summed", s)
                if s.text in binders:
                    self.error(f"duplicate binder {s.text}", s)
                binders.add(s.text)
                self.take("]")
            elif k.kind == "<":
                factors.append(self.bracket(names))
            elif k.kind == "ident" and k.text in ("r", "s") and \
                    self.peek().kind == "[":
                self.take("ident")
                self.take("[")
                lv = self.affine()
                self.take("]")
                i, j = self.pair(names)
                atoms.append(Mat(k.text, lv, i, j))
            elif k.kind == "ident" and k.text in ("q", "t") and \
                    self.peek().kind == "[":
                self.take("ident")
                self.take("[")
                lv = self.affine()
                self.take("]")
                self.take("(")
                i = self.index(names)
                self.take(")")
                atoms.append(QVar(lv, i, k.text == "t"))
            elif k.kind == "ident" and k.text == "eta" and \
                    self.peek().kind == "(":
                self.take("ident")
                i, j = self.pair(names)
                atoms.append(Eta(i, j))
            else:
                break
        counts: dict[str, int] = {}
        for n, _ in names:
            counts[n] = counts.get(n, 0) + 1
        for n, tok in names:
            if n in FREE_NAMES or n == "one":
                if n in FREE_NAMES and counts[n] > 1:
                    self.error(f"free index {n} occurs {counts[n]} times", tok)
            elif counts[n] != 2:
                self.error(f"index {n} occurs {counts[n]} times", tok)
        sign = sign.mod2()
        if sign.c:
            coeff = -coeff
        t = Term(coeff, tuple(factors), tuple(atoms),
                 Lin(0, sign.l, sign.m, sign.n), frozenset(binders))
        for s in ("m", "n"):
            used = any(x.coeff(s) for x in t.lins()) or t.sign.coeff(s)
            if used and s not in binders:
                self.error(f"symbol {s} used without sum[{s}]", start)
        return t, start

    def pair(self, names) -> tuple[Idx, Idx]:
        self.take("(")
        i = self.index(names)
        self.take(",")
        j = self.index(names)
        self.take(")")
        return i, j

    def index(self, names) -> Idx:
        tok = self.take("ident")
        n = tok.text
        names.append((n, tok))
        if n == "one":
            return UNIT
        if n in FREE_NAMES:
            return Idx("f", n)
        return Idx("d", n)

    def bracket(self, names) -> Correlator:
        self.take("<")
        ins = []
        while self.cur.kind == "ident":
            idx = self.index(names)
            lv = Lin()
            floating = False
            if self.accept("_"):
                lv = self.affine_braced()
                floating = self.accept("+")
            if floating and idx.kind != "f":
                self.error("floating level on a non-free index")
            ins.append(Insertion(idx, Level(lv, floating)))
        if not ins:
            self.error("empty correlator")
        self.take(">")
        genus = 0
        if self.accept("_"):
            genus = int(self.take("int").text)
        return Correlator(genus, tuple(ins))

    def affine_braced(self) -> Lin:
        if self.cur.kind == "int":
            return Lin(int(self.take("int").text))
        self.take("{")
        v = self.affine()
        self.take("}")
        return v

    def affine(self) -> Lin:
        total = Lin()
        neg = self.accept("-")
        while True:
            tok = self.cur
            if tok.kind == "int":
                k = int(self.take("int").text)
                if self.cur.kind == "ident":
                    total = total + self.symbol().scale(-k if neg else k)
                else:
                    total = total + Lin(-k if neg else k)
            elif tok.kind == "ident":
                total = total + self.symbol().scale(-1 if neg else 1)
            else:
                self.error("expected a level expression")
            if self.cur.kind in ("+", "-") and self.peek().kind in \
                    ("int", "ident"):
                neg = self.take(self.cur.kind).kind == "-"
                continue
            return total

    def symbol(self) -> Lin:
        tok = self.take("ident")
        if tok.text not in ("l", "m", "n"):
            self.error(f"unknown level symbol {tok.text!r}", tok)
        return Lin(**{tok.text: 1})


def parse_expression(src: str) -> Expression:
    """Parse ``term (+|- term)*`` without the ``= 0`` suffix."""
    return parse(src.strip() + " = 0").lhs


def _header(lines: list[str]):
    meta = {"name": "", "genus": None, "codim": None}
    body = []
    first = 0
    for k, raw in enumerate(lines):
        s = raw.strip()
        if s.startswith("#"):
            m = re.match(r"#\s*(name|genus|codim)\b\s*:?\s*(\S*)\s*$", s)
            if m:
                key, val = m.group(1), m.group(2)
                if key == "name":
                    meta["name"] = val
                else:
                    if not val.isdigit():
                        raise ParseError(f"#{key} needs a nonnegative integer",
                                         k + 1, 1)
                    meta[key] = int(val)
            body.append("")
        else:
            if not first and s:
                first = k + 1
            body.append(raw)
    return meta, "\n".join(body)


def parse_source(src: str) -> SourceEquation:
    meta, body = _header(src.split("\n"))
    return SourceEquation(meta["name"], meta["codim"], meta["genus"], body, [])


def parse(src: str) -> Equation:
    """Parse a ``.gw`` source into a canonical :class:`Equation`."""
    try:
        meta, body = _header(str(src).split("\n"))
        toks = _tokenize(body)
        if toks[0].kind == "int" and toks[0].text == "0" and \
                toks[1].kind == "=":
            p = _Parser(toks)
            p.take("int")
            p.take("=")
            z = p.take("int")
            if z.text != "0":
                p.error("right-hand side must be 0", z)
            p.take("eof")
            return Equation(Expression(), meta["name"], meta["genus"],
                            meta["codim"])
        p = _Parser(toks)
        terms = p.equation()
        frees = None
        for t, tok in terms:
            fs = frozenset(i.name for i in t.indices() if i.kind == "f")
            if t.coeff != 0:
                if frees is None:
                    frees = fs
                elif fs != frees:
                    raise ParseError("free indices differ between terms: "
                                     f"{sorted(frees)} vs {sorted(fs)}",
                                     tok.line, tok.col)
        e = canonicalize(Expression(tuple(t for t, _ in terms)))
    except ParseError:
        raise
    except (ExpressionError, RecursionError) as exc:
        raise ParseError(str(exc)) from None
    return Equation(e, meta["name"], meta["genus"], meta["codim"])


# ------------------------------------------------------------------- printing

def _fmt_lin(x: Lin) -> str:
    s = str(x)
    return s if x.is_const and x.c >= 0 else "{" + s + "}"


def _fmt_index(i: Idx) -> str:
    return i.name


def _fmt_ins(x: Insertion) -> str:
    s = _fmt_index(x.idx)
    lv = x.level
    if lv.floating:
        return f"{s}_{_fmt_lin(lv.lin)}+"
    if lv.lin == Lin():
        return s
    return f"{s}_{_fmt_lin(lv.lin)}"


def _fmt_factor(c: Correlator) -> str:
    body = " ".join(_fmt_ins(x) for x in c.insertions)
    return f"<{body}>" + (f"_{c.genus}" if c.genus else "")


def _fmt_atom(a) -> str:
    if isinstance(a, Mat):
        return f"{a.kind}[{a.level}]({a.i},{a.j})"
    if isinstance(a, Eta):
        return f"eta({a.i},{a.j})"
    return f"{'t' if a.shifted else 'q'}[{a.level}]({a.idx})"


def format_term(t: Term, first: bool = True) -> str:
    c = t.coeff
    mag = abs(c)
    if first:
        head = ("-" if c < 0 else "") + str(mag)
    else:
        head = ("- " if c < 0 else "+ ") + str(mag)
    parts = [head]
    if t.sign != Lin():
        parts.append("(-1)^{" + str(t.sign) + "}")
    for b in sorted(t.binders):
        parts.append(f"sum[{b}]")
    parts.extend(_fmt_atom(a) for a in t.atoms)
    if t.factors:
        parts.append("".join(_fmt_factor(f) for f in t.factors))
    return " ".join(parts)


def format_expression(e: Expression) -> str:
    e = canonicalize(e)
    if not e.terms:
        return "0"
    return " ".join(format_term(t, k == 0) for k, t in enumerate(e.terms))


def print_equation(eq: Equation) -> str:
    """Canonical text of an equation; ``parse`` inverts it exactly."""
    lines = []
    if eq.name:
        lines.append(f"#name {eq.name}")
    if eq.genus is not None:
        lines.append(f"#genus {eq.genus}")
    if eq.codim is not None:
        lines.append(f"#codim {eq.codim}")
    lines.append(format_expression(eq.lhs) + " = 0")
    return "\n".join(lines) + "\n"


def load(path) -> Equation:
    with open(path, encoding="utf-8") as fh:
        eq = parse(fh.read())
    return eq



def builtin_path(name: str):
    from importlib.resources import files
    return files("gwtaut").joinpath("data", f"{name}.gw")


def load_builtin(name: str) -> Equation:
    """One of the equations shipped in ``gwtaut/data``."""
    try:
        return parse(builtin_path(name).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise KeyError(name) from None
