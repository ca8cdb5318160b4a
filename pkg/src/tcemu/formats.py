"""Floating-point formats: bit-level encode/decode and correctly rounded conversion.

Bit patterns are plain Python ints in each format's logical width
(sign | exponent | fraction).  tf19 is kept as its 19 significant bits
with the binary32 exponent range; the 32-bit hardware container padding
is not represented, and comparisons are always on the decoded value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from enum import Enum, IntEnum
from fractions import Fraction
from typing import NamedTuple, Union


class Rounding(IntEnum):
    """IEEE 754 rounding-direction attributes (RZ = truncation)."""

    RNE = 0
    RZ = 1
    RU = 2
    RD = 3

    @classmethod
    def from_name(cls, name: str) -> "Rounding":
        try:
            return cls[name.strip().upper()]
        except KeyError:
            raise FormatError(
                f"unknown rounding mode {name!r}; expected one of rne, rz, ru, rd"
            ) from None


class FpClass(Enum):
    ZERO = "zero"
    SUBNORMAL = "subnormal"
    NORMAL = "normal"
    INF = "inf"
    NAN = "nan"


class FormatError(ValueError):
    """Raised for unknown format names or invalid format configuration."""


class ParseError(ValueError):
    """Malformed numeric literal; carries the byte offset of the error."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


@dataclass(frozen=True)
class FpFormat:
    """Parameters of one binary floating-point encoding.

    ``nan_single`` marks the fp8-E4M3 style where the all-ones pattern is
    the only NaN, there is no infinity, and the top exponent otherwise
    holds normal values.
    """

    name: str
    ebits: int
    mbits: int
    emin: int
    emax: int
    has_infinity: bool = True
    nan_single: bool = False

    def __post_init__(self):
        if self.precision < 2 or self.emin >= self.emax:
            raise FormatError(f"invalid format parameters for {self.name!r}")

    @property
    def precision(self) -> int:
        """Significand bits including the implicit bit."""
        return self.mbits + 1

    @property
    def width(self) -> int:
        return 1 + self.ebits + self.mbits

    @property
    def bias(self) -> int:
        return (1 << (self.ebits - 1)) - 1

    @property
    def max_finite_significand(self) -> int:
        # The single-NaN encoding steals the all-ones significand slot.
        if self.nan_single:
            return (1 << self.precision) - 2
        return (1 << self.precision) - 1

    @property
    def max_finite(self) -> float:
        return math.ldexp(self.max_finite_significand, self.emax - self.mbits)

    @property
    def min_normal(self) -> float:
        return math.ldexp(1, self.emin)

    @property
    def min_subnormal(self) -> float:
        return math.ldexp(1, self.emin - self.mbits)

    def packed(self) -> tuple:
        """Fixed-layout int tuple consumed by the numeric kernels."""
        return (
            self.ebits,
            self.mbits,
            self.bias,
            self.emin,
            self.emax,
            int(self.has_infinity),
            int(self.nan_single),
        )


FORMATS = {
    f.name: f
    for f in (
        FpFormat("fp8-e4m3", 4, 3, -6, 8, has_infinity=False, nan_single=True),
        FpFormat("fp8-e5m2", 5, 2, -14, 15),
        FpFormat("binary16", 5, 10, -14, 15),
        FpFormat("bfloat16", 8, 7, -126, 127),
        FpFormat("tf19", 8, 10, -126, 127),
        FpFormat("binary32", 8, 23, -126, 127),
    )
}


def get_format(name: str) -> FpFormat:
    fmt = FORMATS.get(name)
    if fmt is None:
        valid = ", ".join(sorted(FORMATS))
        raise FormatError(f"unknown format name {name!r}; valid names: {valid}")
    return fmt


class Decoded(NamedTuple):
    """(sign, effective exponent, integer significand, class) of a value.

    Normals: significand in [2^(p-1), 2^p) and
    value = (-1)^sign * significand * 2^(exponent - p + 1).
    Subnormals: significand < 2^(p-1) with exponent = emin.
    Specials carry exponent = 0 and significand = 0.
    """

    sign: int
    exponent: int
    significand: int
    cls: FpClass


class FpValue(NamedTuple):
    """A bit pattern tagged with its format."""

    fmt: FpFormat
    bits: int

    def decompose(self) -> Decoded:
        return decompose(self)

    @property
    def cls(self) -> FpClass:
        return decompose(self).cls

    def is_nan(self) -> bool:
        return self.cls is FpClass.NAN

    def value(self) -> float:
        """Exact binary64 value (all supported formats embed in binary64)."""
        s, e, sig, cls = decompose(self)
        if cls is FpClass.NAN:
            return math.nan
        if cls is FpClass.INF:
            return -math.inf if s else math.inf
        if cls is FpClass.ZERO:
            return -0.0 if s else 0.0
        v = math.ldexp(sig, e - self.fmt.mbits)
        return -v if s else v

    def negated(self) -> "FpValue":
        return FpValue(self.fmt, self.bits ^ (1 << (self.fmt.width - 1)))

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"FpValue({self.fmt.name}, {render_hexfloat(self)})"


def decompose(v: FpValue) -> Decoded:
    """Split a bit pattern into sign, effective exponent, significand, class."""
    fmt = v.fmt
    bits = v.bits
    sign = (bits >> (fmt.width - 1)) & 1
    efield = (bits >> fmt.mbits) & ((1 << fmt.ebits) - 1)
    mant = bits & ((1 << fmt.mbits) - 1)
    max_efield = (1 << fmt.ebits) - 1
    if efield == max_efield:
        if fmt.nan_single:
            if mant == (1 << fmt.mbits) - 1:
                return Decoded(sign, 0, 0, FpClass.NAN)
            # top exponent holds normal values in the single-NaN style
            return Decoded(sign, efield - fmt.bias, mant | (1 << fmt.mbits), FpClass.NORMAL)
        if mant == 0:
            return Decoded(sign, 0, 0, FpClass.INF)
        return Decoded(sign, 0, 0, FpClass.NAN)
    if efield == 0:
        if mant == 0:
            return Decoded(sign, 0, 0, FpClass.ZERO)
        return Decoded(sign, fmt.emin, mant, FpClass.SUBNORMAL)
    return Decoded(sign, efield - fmt.bias, mant | (1 << fmt.mbits), FpClass.NORMAL)


def zero_bits(fmt: FpFormat, sign: int = 0) -> int:
    return sign << (fmt.width - 1)


def inf_bits(fmt: FpFormat, sign: int = 0) -> int:
    if not fmt.has_infinity:
        raise FormatError(f"{fmt.name} has no infinity encoding")
    return (sign << (fmt.width - 1)) | (((1 << fmt.ebits) - 1) << fmt.mbits)


def nan_bits(fmt: FpFormat) -> int:
    """The canonical (positive, quiet) NaN pattern."""
    if fmt.nan_single:
        return ((1 << fmt.ebits) - 1) << fmt.mbits | ((1 << fmt.mbits) - 1)
    return (((1 << fmt.ebits) - 1) << fmt.mbits) | (1 << (fmt.mbits - 1))


def max_finite_bits(fmt: FpFormat, sign: int = 0) -> int:
    sig = fmt.max_finite_significand
    efield = fmt.emax + fmt.bias
    mant = sig - (1 << fmt.mbits)
    return (sign << (fmt.width - 1)) | (efield << fmt.mbits) | mant


def encode_finite(fmt: FpFormat, sign: int, exponent: int, significand: int) -> int:
    """Encode exact decomposed fields; no rounding is performed."""
    if significand == 0:
        return zero_bits(fmt, sign)
    if significand < (1 << fmt.mbits):
        if exponent != fmt.emin:
            raise ValueError("subnormal significand requires exponent == emin")
        return (sign << (fmt.width - 1)) | significand
    if not fmt.emin <= exponent <= fmt.emax:
        raise ValueError(f"exponent {exponent} out of range for {fmt.name}")
    efield = exponent + fmt.bias
    mant = significand - (1 << fmt.mbits)
    return (sign << (fmt.width - 1)) | (efield << fmt.mbits) | mant


class Dyadic(NamedTuple):
    """Exact value (-1)^sign * significand * 2^exponent, significand >= 0."""

    sign: int
    significand: int
    exponent: int


Quantizable = Union[float, int, Fraction, Dyadic, FpValue]


def _as_ratio(x: Quantizable) -> tuple[int, int, int]:
    """Exact (sign, numerator, denominator) of a finite input."""
    if isinstance(x, Dyadic):
        if x.exponent >= 0:
            return x.sign, x.significand << x.exponent, 1
        return x.sign, x.significand, 1 << (-x.exponent)
    if isinstance(x, FpValue):
        s, e, sig, cls = decompose(x)
        if cls in (FpClass.INF, FpClass.NAN):
            raise ValueError("special value has no finite ratio")
        return _as_ratio(Dyadic(s, sig, e - x.fmt.mbits))
    if isinstance(x, bool):
        raise TypeError("bool is not a numeric input")
    if isinstance(x, int):
        return (1 if x < 0 else 0), abs(x), 1
    if isinstance(x, Fraction):
        return (1 if x < 0 else 0), abs(x.numerator), x.denominator
    if isinstance(x, float):
        num, den = abs(x).as_integer_ratio()
        return (1 if math.copysign(1.0, x) < 0 else 0), num, den
    raise TypeError(f"cannot quantize object of type {type(x).__name__}")


def _round_ratio(num: int, den: int, mode: Rounding, sign: int) -> int:
    """Round num/den (both > 0 allowed, num >= 0) to an integer per mode."""
    floor, rem = divmod(num, den)
    if rem == 0:
        return floor
    if mode is Rounding.RNE:
        twice = 2 * rem
        if twice > den or (twice == den and floor & 1):
            return floor + 1
        return floor
    if mode is Rounding.RZ:
        return floor
    if mode is Rounding.RU:
        return floor + (0 if sign else 1)
    return floor + (1 if sign else 0)  # RD


def _overflow_bits(fmt: FpFormat, sign: int, mode: Rounding, overflow_to_inf: bool) -> int:
    if overflow_to_inf:
        return inf_bits(fmt, sign) if fmt.has_infinity else nan_bits(fmt)
    to_inf = (
        mode is Rounding.RNE
        or (mode is Rounding.RU and sign == 0)
        or (mode is Rounding.RD and sign == 1)
    )
    if to_inf:
        return inf_bits(fmt, sign) if fmt.has_infinity else nan_bits(fmt)
    return max_finite_bits(fmt, sign)


def quantize(
    x: Quantizable,
    fmt: FpFormat,
    mode: Rounding = Rounding.RNE,
    *,
    overflow_to_inf: bool = False,
) -> FpValue:
    """Correctly rounded conversion of an exact value into ``fmt``.

    Gradual underflow to subnormals and zero.  Overflow follows the IEEE
    direction rules (RZ saturates to the maximum finite value); with
    ``overflow_to_inf`` any overflow yields the infinity class instead,
    which is the block-FMA output convention.
    """
    if isinstance(x, float):
        if math.isnan(x):
            return FpValue(fmt, nan_bits(fmt))
        if math.isinf(x):
            sign = 1 if x < 0 else 0
            if fmt.has_infinity:
                return FpValue(fmt, inf_bits(fmt, sign))
            return FpValue(fmt, nan_bits(fmt))
    if isinstance(x, FpValue):
        cls = x.cls
        if cls is FpClass.NAN:
            return FpValue(fmt, nan_bits(fmt))
        if cls is FpClass.INF:
            sign = x.decompose().sign
            if fmt.has_infinity:
                return FpValue(fmt, inf_bits(fmt, sign))
            return FpValue(fmt, nan_bits(fmt))

    sign, num, den = _as_ratio(x)
    if num == 0:
        return FpValue(fmt, zero_bits(fmt, sign))

    p = fmt.precision
    # e = floor(log2(num/den)): bit-length estimate, corrected by comparison.
    e = num.bit_length() - den.bit_length()
    while (num << max(0, -(e + 1))) >= (den << max(0, e + 1)):
        e += 1
    while (num << max(0, -e)) < (den << max(0, e)):
        e -= 1

    q = (max(e, fmt.emin)) - p + 1  # exponent of one unit of the target significand
    # m = round(num/den * 2^-q)
    shifted_num = num << max(0, -q)
    shifted_den = den << max(0, q)
    m = _round_ratio(shifted_num, shifted_den, mode, sign)
    if m == 0:
        return FpValue(fmt, zero_bits(fmt, sign))
    if m >= (1 << p):
        m >>= 1
        q += 1
    e_final = q + p - 1
    if m >= (1 << (p - 1)):
        if e_final > fmt.emax or (
            fmt.nan_single and e_final == fmt.emax and m == (1 << p) - 1
        ):
            return FpValue(fmt, _overflow_bits(fmt, sign, mode, overflow_to_inf))
        return FpValue(fmt, encode_finite(fmt, sign, e_final, m))
    return FpValue(fmt, encode_finite(fmt, sign, fmt.emin, m))


def from_float(x: float, fmt: FpFormat, mode: Rounding = Rounding.RNE) -> FpValue:
    return quantize(x, fmt, mode)


def render_hexfloat(v: FpValue) -> str:
    """Canonical hexadecimal literal: 0x1.<frac>p<exp>, trailing zeros stripped."""
    sign, e, sig, cls = decompose(v)
    prefix = "-" if sign else ""
    if cls is FpClass.NAN:
        return "nan"
    if cls is FpClass.INF:
        return prefix + "inf"
    if cls is FpClass.ZERO:
        return prefix + "0x0p+0"
    top = sig.bit_length() - 1
    lead_exp = (e - v.fmt.mbits) + top
    frac = sig - (1 << top)
    if frac == 0:
        return f"{prefix}0x1p{lead_exp:+d}"
    pad = (-top) % 4
    digits = format(frac << pad, f"0{(top + pad) // 4}x").rstrip("0")
    return f"{prefix}0x1.{digits}p{lead_exp:+d}"


_HEX_DIGITS = set("0123456789abcdefABCDEF")


def parse_hexfloat(text: str, fmt: FpFormat) -> FpValue:
    """Parse a hexadecimal float literal (or inf/-inf/nan/0/-0) into ``fmt``.

    Literals that are not exactly representable round to nearest-even.
    """
    i = 0
    n = len(text)
    if n == 0:
        raise ParseError("empty literal", 0)
    sign = 0
    if text[i] in "+-":
        sign = 1 if text[i] == "-" else 0
        i += 1
    rest = text[i:].lower()
    if rest == "nan":
        return FpValue(fmt, nan_bits(fmt))
    if rest == "inf":
        if fmt.has_infinity:
            return FpValue(fmt, inf_bits(fmt, sign))
        raise ParseError(f"{fmt.name} has no infinity", i)
    if rest == "0":
        return FpValue(fmt, zero_bits(fmt, sign))
    if not rest.startswith("0x"):
        raise ParseError("expected '0x' prefix", i)
    i += 2
    int_start = i
    while i < n and text[i] in _HEX_DIGITS:
        i += 1
    int_digits = text[int_start:i]
    frac_digits = ""
    if i < n and text[i] == ".":
        i += 1
        frac_start = i
        while i < n and text[i] in _HEX_DIGITS:
            i += 1
        frac_digits = text[frac_start:i]
    if not int_digits and not frac_digits:
        raise ParseError("expected hex digits", int_start)
    if i >= n or text[i] not in "pP":
        raise ParseError("expected 'p' exponent marker", i)
    i += 1
    exp_start = i
    if i < n and text[i] in "+-":
        i += 1
    if i >= n or not text[i].isdigit():
        raise ParseError("expected exponent digits", i)
    while i < n and text[i].isdigit():
        i += 1
    if i != n:
        raise ParseError("trailing characters", i)
    exp = int(text[exp_start:n])
    sig = int((int_digits or "0") + (frac_digits or ""), 16)
    return quantize(Dyadic(sign, sig, exp - 4 * len(frac_digits)), fmt, Rounding.RNE)


def parse_literal(text: str, fmt: FpFormat) -> FpValue:
    """Parse either a hexfloat or a plain decimal literal (decimals round RNE)."""
    probe = text.lstrip("+-").lower()
    if probe.startswith("0x") or probe in ("nan", "inf", ""):
        return parse_hexfloat(text, fmt)
    if "x" in probe:
        return parse_hexfloat(text, fmt)
    try:
        d = Decimal(text)
    except InvalidOperation:
        raise ParseError(f"not a numeric literal: {text!r}", 0) from None
    return quantize(Fraction(d), fmt, Rounding.RNE)
