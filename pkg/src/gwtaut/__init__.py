"""Symbolic verification of loop-group invariance of tautological equations."""
from .expr import (Correlator, Equation, Expression, ExpressionError, Idx,
                   Insertion, Level, Lin, Mat, QVar, Term, UNIT,
                   canonicalize, differentiate_q, multiply)

__all__ = ["Correlator", "Equation", "Expression", "ExpressionError", "Idx",
           "Insertion", "Level", "Lin", "Mat", "QVar", "Term", "UNIT",
           "canonicalize", "differentiate_q", "multiply"]
