"""Format tables, encode/decode round trips, correctly rounded conversion."""

import math
import random
from fractions import Fraction

import pytest

from tcemu.formats import (
    FORMATS,
    Dyadic,
    FormatError,
    FpClass,
    FpValue,
    ParseError,
    Rounding,
    decompose,
    get_format,
    nan_bits,
    parse_hexfloat,
    parse_literal,
    quantize,
    render_hexfloat,
    zero_bits,
)

ALL_MODES = [Rounding.RNE, Rounding.RZ, Rounding.RU, Rounding.RD]


# (precision, min normal, max finite) for every instantiated format
TABLE_PARAMS = {
    "binary32": (24, 2.0 ** -126, (2 - 2.0 ** -23) * 2.0 ** 127),
    "tf19": (11, 2.0 ** -126, (2 - 2.0 ** -10) * 2.0 ** 127),
    "bfloat16": (8, 2.0 ** -126, (2 - 2.0 ** -7) * 2.0 ** 127),
    "binary16": (11, 2.0 ** -14, 65504.0),
    "fp8-e4m3": (4, 2.0 ** -6, 448.0),
    "fp8-e5m2": (3, 2.0 ** -14, 57344.0),
}


@pytest.mark.parametrize("name", sorted(TABLE_PARAMS))
def test_format_parameters(name):
    p, min_normal, max_finite = TABLE_PARAMS[name]
    fmt = get_format(name)
    assert fmt.precision == p
    assert fmt.min_normal == min_normal
    assert fmt.max_finite == max_finite
    assert fmt.emin < fmt.emax


def test_special_value_styles():
    e4m3 = get_format("fp8-e4m3")
    assert not e4m3.has_infinity and e4m3.nan_single
    for name in set(FORMATS) - {"fp8-e4m3"}:
        assert get_format(name).has_infinity


def test_unknown_format_name():
    with pytest.raises(FormatError):
        get_format("fp7-e9m9")


def test_decode_encode_identity_fp8_exhaustive():
    # decode -> quantize round trip is the identity on every non-NaN pattern
    for name in ("fp8-e4m3", "fp8-e5m2"):
        fmt = get_format(name)
        for bits in range(1 << fmt.width):
            v = FpValue(fmt, bits)
            d = decompose(v)
            if d.cls is FpClass.NAN:
                continue
            back = quantize(v.value(), fmt, Rounding.RNE)
            assert back.bits == bits, f"{name} pattern {bits:#x}"


def test_decompose_examples():
    fp16 = get_format("binary16")
    v = quantize(1.5, fp16)
    s, e, sig, cls = decompose(v)
    assert (s, e, cls) == (0, 0, FpClass.NORMAL)
    assert sig == 0b11000000000

    tiny = FpValue(fp16, 1)  # smallest positive subnormal
    s, e, sig, cls = decompose(tiny)
    assert (s, e, sig, cls) == (0, -14, 1, FpClass.SUBNORMAL)
    assert tiny.value() == 2.0 ** -24

    nan = FpValue(fp16, nan_bits(fp16))
    assert decompose(nan).cls is FpClass.NAN


def test_quantize_trivial_and_table_values():
    for name in FORMATS:
        fmt = get_format(name)
        for mode in ALL_MODES:
            assert quantize(1.0, fmt, mode).value() == 1.0
    e4m3 = get_format("fp8-e4m3")
    assert quantize(448, e4m3, Rounding.RNE).value() == 448.0


def test_quantize_point_one_binary16_against_scan():
    # independent oracle: scan all 2^16 encodings for the closest value
    fp16 = get_format("binary16")
    best = None
    for bits in range(1 << 16):
        v = FpValue(fp16, bits)
        if v.cls in (FpClass.NAN, FpClass.INF):
            continue
        d = abs(v.value() - 0.1)
        if best is None or d < best[0]:
            best = (d, bits)
    got = quantize(0.1, fp16, Rounding.RNE)
    assert got.bits == best[1]


def _representable_values(fmt):
    vals = []
    for bits in range(1 << fmt.width):
        v = FpValue(fmt, bits)
        if v.cls not in (FpClass.NAN, FpClass.INF):
            vals.append(v.value())
    return sorted(set(vals))


@pytest.mark.parametrize("name", ["fp8-e4m3", "fp8-e5m2"])
def test_rounding_brackets_by_brute_force(name):
    # for x between adjacent representable a < b each mode picks per definition
    fmt = get_format(name)
    vals = _representable_values(fmt)
    rng = random.Random(1234)
    for _ in range(400):
        i = rng.randrange(len(vals) - 1)
        a, b = vals[i], vals[i + 1]
        x = Fraction(a) + (Fraction(b) - Fraction(a)) * Fraction(rng.randrange(1, 8), 8)
        if x == a or x == b:
            continue
        got = {m: quantize(x, fmt, m).value() for m in ALL_MODES}
        assert got[Rounding.RD] == a
        assert got[Rounding.RU] == b
        assert got[Rounding.RZ] == (a if x > 0 else b if a < 0 else a)
        mid = (Fraction(a) + Fraction(b)) / 2
        if x < mid:
            assert got[Rounding.RNE] == a
        elif x > mid:
            assert got[Rounding.RNE] == b
        else:
            assert got[Rounding.RNE] in (a, b)


def test_ru_rd_duality_and_monotonicity():
    fmt = get_format("fp8-e5m2")
    rng = random.Random(99)
    xs = sorted(rng.uniform(-70000, 70000) for _ in range(200))
    for x in xs:
        ru = quantize(x, fmt, Rounding.RU).value()
        rd = quantize(-x, fmt, Rounding.RD).value()
        assert ru == -rd or (math.isnan(ru) and math.isnan(rd))
    for mode in ALL_MODES:
        prev = None
        for x in xs:
            q = quantize(x, fmt, mode).value()
            if prev is not None and not math.isinf(q):
                assert q >= prev
            if not math.isinf(q):
                prev = q


def test_overflow_rules():
    fp16 = get_format("binary16")
    huge = 1e9
    assert quantize(huge, fp16, Rounding.RNE).value() == math.inf
    assert quantize(huge, fp16, Rounding.RU).value() == math.inf
    assert quantize(huge, fp16, Rounding.RZ).value() == 65504.0
    assert quantize(huge, fp16, Rounding.RD).value() == 65504.0
    assert quantize(-huge, fp16, Rounding.RD).value() == -math.inf
    assert quantize(-huge, fp16, Rounding.RU).value() == -65504.0
    # e4m3 has no infinity: RNE overflow maps to NaN
    e4m3 = get_format("fp8-e4m3")
    assert quantize(1e4, e4m3, Rounding.RNE).is_nan()
    assert quantize(1e4, e4m3, Rounding.RZ).value() == 448.0


def test_signed_zero_and_underflow():
    fp16 = get_format("binary16")
    assert quantize(0.0, fp16).bits == 0
    assert quantize(-0.0, fp16).bits == zero_bits(fp16, 1)
    assert quantize(2.0 ** -25, fp16, Rounding.RNE).value() == 0.0  # tie to even
    assert quantize(2.0 ** -25 + 2.0 ** -30, fp16, Rounding.RNE).value() == 2.0 ** -24
    assert quantize(2.0 ** -30, fp16, Rounding.RU).value() == 2.0 ** -24
    got = quantize(-(2.0 ** -30), fp16, Rounding.RNE)
    assert got.value() == 0.0 and got.decompose().sign == 1


def test_subnormal_gradual_underflow():
    fp16 = get_format("binary16")
    v = quantize(3 * 2.0 ** -24, fp16, Rounding.RNE)
    assert v.cls is FpClass.SUBNORMAL and v.value() == 3 * 2.0 ** -24


def test_hexfloat_examples():
    fp16 = get_format("binary16")
    fp32 = get_format("binary32")
    assert parse_hexfloat("0x1.8p+0", fp16).value() == 1.5
    assert parse_hexfloat("0x1p-24", fp32).value() == 2.0 ** -24
    assert render_hexfloat(parse_hexfloat("0x1.004p+1", fp32)) == "0x1.004p+1"
    assert parse_hexfloat("inf", fp32).value() == math.inf
    assert parse_hexfloat("-inf", fp32).value() == -math.inf
    assert parse_hexfloat("nan", fp32).is_nan()
    assert parse_hexfloat("-0", fp32).bits == zero_bits(fp32, 1)
    assert render_hexfloat(quantize(-0.0, fp32)) == "-0x0p+0"
    assert render_hexfloat(quantize(2.0 ** -24, fp32)) == "0x1p-24"


def test_hexfloat_roundtrip_random_patterns():
    # render -> parse is the identity on 10^4 random bit patterns
    rng = random.Random(7)
    for name in ("binary16", "binary32", "bfloat16", "tf19", "fp8-e5m2", "fp8-e4m3"):
        fmt = get_format(name)
        for _ in range(2000 if fmt.width > 8 else 256):
            bits = rng.randrange(1 << fmt.width)
            v = FpValue(fmt, bits)
            if v.is_nan():
                continue
            back = parse_hexfloat(render_hexfloat(v), fmt)
            assert back.bits == bits


def test_parse_error_offsets():
    fp32 = get_format("binary32")
    with pytest.raises(ParseError) as err:
        parse_hexfloat("0x1.8q+0", fp32)
    assert err.value.offset == 5
    with pytest.raises(ParseError):
        parse_hexfloat("zzz", fp32)
    with pytest.raises(ParseError):
        parse_hexfloat("0x1.8p+0junk", fp32)
    with pytest.raises(ParseError):
        parse_hexfloat("", fp32)


def test_parse_literal_decimal_is_exact():
    fp16 = get_format("binary16")
    assert parse_literal("1.5", fp16).value() == 1.5
    # exact decimal quantization, no double rounding through binary64
    assert parse_literal("0.1", fp16).bits == quantize(Fraction(1, 10), fp16).bits


def test_quantize_inexact_parse_rounds_rne():
    fp16 = get_format("binary16")
    # 1 + 2^-12 is not representable in binary16; ties to even -> 1.0
    v = parse_hexfloat("0x1.001p+0", fp16)
    assert v.value() == 1.0


def test_dyadic_input():
    fp32 = get_format("binary32")
    v = quantize(Dyadic(0, 9, -2), fp32)  # 9/4
    assert v.value() == 2.25
    v = quantize(Dyadic(1, 0, 0), fp32)  # -0 stays -0
    assert v.bits == zero_bits(fp32, 1)


def test_tf19_container_independent_value():
    tf19 = get_format("tf19")
    v = quantize(1.0 + 2.0 ** -10, tf19)
    assert v.value() == 1.0 + 2.0 ** -10
    # 11 significand bits: 1 + 2^-11 ties to even -> 1.0
    assert quantize(1.0 + 2.0 ** -11, tf19).value() == 1.0
