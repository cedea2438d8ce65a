"""States of the FRT-type algebras: linear combinations of generator words.

A generator is a triple (r, i, j) standing for the mode-r element with
matrix indices i, j (0-based); words are tuples of generators multiplied
left to right.  A StateSeries attaches a truncated scalar series to each
label, where a label is usually a word but may be any hashable value (for
tensor-square states a pair of words).  All series share one expansion
context, so the full accuracy machinery of the scalar layer carries over
coefficient-wise.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Callable, Hashable, Iterable, Mapping, Optional

from .errors import ContextMismatchError
from .series import Context, TruncatedSeries

Gen = tuple[int, int, int]
Word = tuple[Gen, ...]


def gen_key(g: Gen) -> tuple[int, int, int]:
    return g


def word_sorted(w: Word) -> bool:
    return all(w[i] <= w[i + 1] for i in range(len(w) - 1))


class StateSeries:
    """A finite sum  label * (scalar series), label-wise sparse."""

    __slots__ = ("ctx", "parts")

    def __init__(self, ctx: Context,
                 parts: dict[Hashable, TruncatedSeries] | None = None):
        self.ctx = ctx
        self.parts = parts if parts is not None else {}

    @staticmethod
    def vacuum(ctx: Context, coeff=Fraction(1)) -> "StateSeries":
        return StateSeries(ctx, {(): TruncatedSeries.const(ctx, coeff)})

    @staticmethod
    def of(ctx: Context, label: Hashable, series: TruncatedSeries) -> "StateSeries":
        out = StateSeries(ctx)
        out.iadd_part(label, series)
        return out

    def is_zero(self) -> bool:
        return all(s.is_zero() for s in self.parts.values())

    def copy(self) -> "StateSeries":
        return StateSeries(self.ctx, dict(self.parts))

    def iadd_part(self, label: Hashable, series: TruncatedSeries) -> None:
        got = self.parts.get(label)
        self.parts[label] = series if got is None else got + series

    def __add__(self, other: "StateSeries") -> "StateSeries":
        if self.ctx != other.ctx:
            raise ContextMismatchError("state contexts differ")
        out = self.copy()
        for label, s in other.parts.items():
            out.iadd_part(label, s)
        return out

    def __sub__(self, other: "StateSeries") -> "StateSeries":
        return self + other.scale(Fraction(-1))

    def scale(self, factor) -> "StateSeries":
        if isinstance(factor, TruncatedSeries):
            return StateSeries(self.ctx,
                               {k: s * factor for k, s in self.parts.items()})
        return StateSeries(self.ctx,
                           {k: s.scale(factor) for k, s in self.parts.items()})

    def map_labels(self, fn: Callable[[Hashable], "StateSeries"]) -> "StateSeries":
        """Linear extension of a map defined on labels."""
        out = StateSeries(self.ctx)
        for label, s in self.parts.items():
            img = fn(label)
            for lab2, s2 in img.parts.items():
                out.iadd_part(lab2, s2 * s)
        return out

    def map_series(self, fn: Callable[[TruncatedSeries], TruncatedSeries],
                   ctx: Context | None = None) -> "StateSeries":
        out = StateSeries(ctx or self.ctx)
        for label, s in self.parts.items():
            out.iadd_part(label, fn(s))
        return out

    def compact(self) -> "StateSeries":
        """Drop labels whose coefficient is an exact zero."""
        keep = {}
        for label, s in self.parts.items():
            if s.is_zero() and all(all(row) for row in s.exhi) and s.hacc >= s.ctx.hcap:
                continue
            keep[label] = s
        return StateSeries(self.ctx, keep)

    def equal_on_common(self, other: "StateSeries") -> tuple[bool, Optional[str]]:
        if self.ctx != other.ctx:
            raise ContextMismatchError("state contexts differ")
        zero = TruncatedSeries.zero(self.ctx)
        for label in set(self.parts) | set(other.parts):
            a = self.parts.get(label, zero)
            b = other.parts.get(label, zero)
            eq, w = a.equal_on_common(b)
            if not eq:
                return False, f"{label}: {w}"
        return True, None

    def nonzero_witness(self) -> Optional[str]:
        for label in sorted(self.parts, key=repr):
            w = self.parts[label].nonzero_witness()
            if w is not None:
                return f"{label}: {w}"
        return None

    def covers_box(self, box=None, h: int | None = None) -> bool:
        return all(s.covers_box(box, h) for s in self.parts.values())

    def serialize(self) -> str:
        lines = []
        for label in sorted(self.parts, key=repr):
            lines.append(f"label {label!r}")
            lines.append(self.parts[label].serialize().rstrip("\n"))
        return "\n".join(lines) + "\n"

    def __repr__(self):
        return f"<State {len(self.parts)} labels over {self.ctx.signature()}>"


def concat_words(w1: Word, w2: Word) -> Word:
    return tuple(w1) + tuple(w2)
