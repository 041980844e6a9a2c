"""Parsing and formatting of exact rationals for the JSON wire format.

Numbers cross every file boundary as strings like "3/4" or "-2" (plain
integers are also accepted).  Floats are rejected outright: the package
guarantees bit-exact arithmetic, and a decimal literal has no faithful
rational reading once it has been through binary floating point.
"""

from __future__ import annotations

from fractions import Fraction


def parse_rational(value) -> Fraction:
    """Parse "p/q" or integer text (or a plain int) into a Fraction."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise ValueError(f"malformed rational {value!r}")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        raise ValueError(
            f"malformed rational {value!r}: floats are not accepted, use 'p/q' text"
        )
    if isinstance(value, str):
        text = value.strip()
        try:
            if "/" in text:
                num, _, den = text.partition("/")
                return Fraction(int(num.strip()), int(den.strip()))
            return Fraction(int(text))
        except (ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"malformed rational {value!r}: {exc}") from None
    raise ValueError(f"malformed rational {value!r}")


def format_rational(value) -> str:
    """Render a Fraction as "p/q", or plain "p" when the denominator is 1."""
    frac = Fraction(value)
    if frac.denominator == 1:
        return str(frac.numerator)
    return f"{frac.numerator}/{frac.denominator}"
