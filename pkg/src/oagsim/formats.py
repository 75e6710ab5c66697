"""Shared helpers for the plain-text instance formats."""
from __future__ import annotations

from fractions import Fraction

from .core import InvalidParam


class ParseError(InvalidParam):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


def parse_ints(text: str, line: int) -> list[int]:
    try:
        return [int(tok) for tok in text.split()]
    except ValueError as exc:
        raise ParseError(f"expected integers, got {text.strip()!r}", line) from exc


def parse_rationals(text: str, line: int) -> list[Fraction]:
    out = []
    for tok in text.split():
        num, sep, den = tok.partition("/")
        try:
            value = Fraction(int(num), int(den)) if sep else Fraction(int(num))
        except (ValueError, ZeroDivisionError) as exc:
            raise ParseError(f"bad rational {tok!r}", line) from exc
        out.append(value)
    return out


def format_rational(value) -> str:
    value = Fraction(value)
    return str(value.numerator) if value.denominator == 1 else f"{value.numerator}/{value.denominator}"


def load_instance(problem: str, path: str):
    from . import caching, matching, mts

    with open(path) as fh:
        text = fh.read()
    loader = {
        "matching": matching.BipartiteInstance.loads,
        "caching": caching.CacheTrace.loads,
        "mts": mts.UniformMTSInstance.loads,
    }[problem]
    return loader(text)
