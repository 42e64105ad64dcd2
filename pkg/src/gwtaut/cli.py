"""Command-line front end.

Exit status: 0 proved or passed, 1 failed, 2 usage, input or cache errors.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, field

from . import oracle, verify
from .dsl import ParseError, format_expression, load, load_builtin, parse

BUILTINS = ("mumford", "string", "dilaton", "trr0", "trr1", "wdvv")

log = logging.getLogger("gwtaut")


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    equations: list = field(default_factory=list)
    helpers: list = field(default_factory=list)
    action: str = "r"
    l: str = "sym"
    jetcap: int | None = None
    order: int = 8
    seed: int = 7
    rank: int = 1
    gmax: int = 4
    trials: int = 100
    jobs: int = 1
    max_offset: int = 2
    psi_bar: int = 2
    genus: int = 2
    fmt: str = "text"
    output: str | None = None
    cache: str | None = None

    def validate(self):
        if self.action not in ("r", "s"):
            raise UsageError(f"unknown action {self.action!r}")
        if self.l != "sym":
            try:
                if int(self.l) < 1:
                    raise ValueError
            except ValueError:
                raise UsageError("--l takes 'sym' or a positive integer") \
                    from None
        if self.jetcap is not None and self.jetcap < 3:
            raise UsageError("--jetcap must be at least 3")
        if self.rank < 1 or self.trials < 0 or self.jobs < 1:
            raise UsageError("--rank and --jobs must be positive, "
                             "--trials nonnegative")
        if not 0 <= self.gmax <= 4:
            raise UsageError("--gmax must lie in 0..4")
        if self.order < 1:
            raise UsageError("--order must be positive")
        if self.psi_bar < 0 or self.genus < 0:
            raise UsageError("--psi-bar and --genus must be nonnegative")


def resolve_equation(ref: str):
    """A built-in name or a path to a ``.gw`` file."""
    if ref in BUILTINS:
        return load_builtin(ref)
    if not os.path.exists(ref):
        raise UsageError(f"no such equation or file: {ref}")
    eq = load(ref)
    if not eq.name:
        from dataclasses import replace
        eq = replace(eq, name=os.path.splitext(os.path.basename(ref))[0])
    return eq


def _emit(cfg: RunConfig, text: str, payload: dict):
    out = json.dumps(payload, indent=2, default=str) if cfg.fmt == "json" \
        else text
    if cfg.output:
        with open(cfg.output, "w", encoding="utf-8") as fh:
            fh.write(out + "\n")
    else:
        print(out)


# --------------------------------------------------------------- commands

def cmd_check(cfg: RunConfig) -> int:
    if not cfg.equations:
        raise UsageError("check needs --equation")
    helpers = [resolve_equation(h) for h in cfg.helpers]
    status = 0
    for ref in cfg.equations:
        eq = resolve_equation(ref)
        log.info("checking %s under the %s action", ref, cfg.action)
        if cfg.action == "s":
            rep = verify.verify_s_invariance(eq, cfg.max_offset, cfg.jobs)
        elif ref == "mumford" and not helpers:
            rep = verify.verify_r_invariance_mumford(cfg.jetcap, cfg.jobs)
        else:
            rep = verify.verify_r_invariance_user(eq, helpers, cfg.jetcap,
                                                  cfg.jobs)
        _emit(cfg, rep.to_text(), rep.to_dict())
        if not rep.proved:
            status = 1
    return status


def _table(cfg: RunConfig) -> oracle.PointTheory:
    if cfg.cache is None:
        return oracle.PointTheory(cfg.gmax)
    path = cfg.cache
    if os.path.exists(path):
        return oracle.PointTheory.load(path, cfg.gmax)
    pt = oracle.PointTheory(cfg.gmax).build(6)
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    pt.dump(path)
    return pt


def cmd_oracle(cfg: RunConfig) -> int:
    table = _table(cfg)
    rep = oracle.run_battery(cfg.rank, cfg.gmax, cfg.trials, cfg.seed,
                             cfg.order, table)
    lines = [f"oracle rank={cfg.rank} gmax={cfg.gmax} seed={cfg.seed}: "
             f"{rep['status']}"]
    for c in rep["checks"]:
        lines.append(f"  {c['name']}: {c['trials'] - c['failures']}/"
                     f"{c['trials']} {c['status']}")
        if "counterexample" in c:
            lines.append(f"    counterexample: {c['counterexample']}")
    _emit(cfg, "\n".join(lines), rep)
    return 0 if rep["status"] == "passed" else 1


def _print_expression(cfg: RunConfig, command: str, e) -> int:
    text = format_expression(e)
    _emit(cfg, text, {"command": command, "expression": text,
                      "terms": len(e.terms)})
    return 0


def cmd_translate(cfg: RunConfig) -> int:
    from .rewrite import translate_desc_to_anc
    eq = parse(f"1 <x_0+>_{cfg.genus} = 0")
    c = eq.lhs.terms[0].factors[0]
    return _print_expression(cfg, "translate",
                             translate_desc_to_anc(c, 0, cfg.psi_bar))


def cmd_expand(cfg: RunConfig) -> int:
    from .expr import specialize_l
    from .quantization import LoopGenerator, apply_s
    from .rewrite import rule_jet_vanish
    if len(cfg.equations) != 1:
        raise UsageError("expand needs exactly one --equation")
    eq = resolve_equation(cfg.equations[0])
    if cfg.action == "r":
        kept, _ = verify.expansion(eq)
        if cfg.l != "sym":
            kept = rule_jet_vanish(specialize_l(kept, int(cfg.l)))
        return _print_expression(cfg, "expand", kept)
    if cfg.l == "sym":
        raise UsageError("the s action needs a concrete --l")
    l = int(cfg.l)
    return _print_expression(cfg, "expand", apply_s(
        LoopGenerator("lower", l), eq, range(l, l + 1)))


COMMANDS = {"check": cmd_check, "oracle": cmd_oracle,
            "translate": cmd_translate, "expand": cmd_expand}


# ----------------------------------------------------------------- parsing

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="gwtaut", description="Verify loop-group invariance of "
        "tautological equations with exact arithmetic.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--format", dest="fmt", choices=("text", "json"),
                       default="text")
        p.add_argument("--output", help="write the report to this file")

    p = sub.add_parser("check", help="run an invariance pipeline")
    p.add_argument("--equation", action="append", dest="equations",
                   default=[], help=f"built-in ({', '.join(BUILTINS)}) or "
                   ".gw path; repeatable")
    p.add_argument("--helper", action="append", dest="helpers", default=[],
                   help="equation admitted to remove genus two terms")
    p.add_argument("--action", choices=("r", "s"), default="r")
    p.add_argument("--jetcap", type=int)
    p.add_argument("--max-offset", type=int, default=2,
                   help="floating slot offsets tried by the s pipeline")
    p.add_argument("--jobs", type=int, default=1)
    common(p)

    p = sub.add_parser("oracle", help="numeric validation battery")
    p.add_argument("--rank", type=int, default=1)
    p.add_argument("--gmax", type=int, default=4)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--order", type=int, default=8)
    p.add_argument("--cache", nargs="?",
                   const=os.path.join(oracle.cache_dir(), "table.txt"),
                   help="intersection table cache file (default under "
                   "$GWTAUT_CACHE_DIR)")
    common(p)

    p = sub.add_parser("translate", help="psibar powers in descendants")
    p.add_argument("--psi-bar", dest="psi_bar", type=int, default=2)
    p.add_argument("--genus", type=int, default=2)
    common(p)

    p = sub.add_parser("expand", help="print an action's expansion")
    p.add_argument("--equation", action="append", dest="equations",
                   default=[])
    p.add_argument("--action", choices=("r", "s"), default="r")
    p.add_argument("--l", default="sym")
    common(p)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    ns = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    opts = {k: v for k, v in vars(ns).items()
            if k in RunConfig.__dataclass_fields__}
    cfg = RunConfig(**opts)
    try:
        cfg.validate()
        return COMMANDS[cfg.command](cfg)
    except (UsageError, ParseError, oracle.CacheError, OSError,
            KeyError) as exc:
        msg = f"error: {exc}"
        if getattr(cfg, "fmt", "text") == "json":
            print(json.dumps({"error": str(exc), "status": "error"}))
        else:
            print(msg, file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
