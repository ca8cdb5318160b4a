"""Pure-Python block-FMA kernel; import-time fallback for the compiled core.

Operates on raw bit patterns and a packed integer config so the compiled
kernel (`tcemu._kernel`) can expose the exact same interface.  Packed
config layout (all ints):

    ( in_ebits,  in_mbits,  in_bias,  in_emin,  in_emax,  in_has_inf,  in_nan_single,
     out_ebits, out_mbits, out_bias, out_emin, out_emax, out_has_inf, out_nan_single,
     f, nfma, rounding, late_c, interleaved, sticky)

Rounding codes follow formats.Rounding (RNE=0, RZ=1, RU=2, RD=3).
"""

from __future__ import annotations

# value classes used internally for pipeline terms
_ZERO, _FIN, _INF, _NAN = 0, 1, 2, 3

_RNE, _RZ, _RU, _RD = 0, 1, 2, 3


def _decode(bits, ebits, mbits, bias, emin, nan_single):
    """Return (cls, sign, eff_exponent, significand) of a bit pattern."""
    sign = (bits >> (ebits + mbits)) & 1
    ef = (bits >> mbits) & ((1 << ebits) - 1)
    mant = bits & ((1 << mbits) - 1)
    if ef == (1 << ebits) - 1:
        if nan_single:
            if mant == (1 << mbits) - 1:
                return _NAN, sign, 0, 0
            return _FIN, sign, ef - bias, mant | (1 << mbits)
        if mant == 0:
            return _INF, sign, 0, 0
        return _NAN, sign, 0, 0
    if ef == 0:
        if mant == 0:
            return _ZERO, sign, 0, 0
        return _FIN, sign, emin, mant
    return _FIN, sign, ef - bias, mant | (1 << mbits)


def _nan(ebits, mbits, nan_single):
    if nan_single:
        return (((1 << ebits) - 1) << mbits) | ((1 << mbits) - 1)
    return (((1 << ebits) - 1) << mbits) | (1 << (mbits - 1))


def _inf(sign, ebits, mbits, has_inf, nan_single):
    if not has_inf:
        return _nan(ebits, mbits, nan_single)
    return (sign << (ebits + mbits)) | (((1 << ebits) - 1) << mbits)


def _round_acc(sign, mag, scale, ebits, mbits, bias, emin, emax, has_inf, nan_single, mode):
    """Round the exact value (-1)^sign * mag * 2^scale into the format.

    Overflow always yields the infinity class (NaN for single-NaN formats):
    the block-FMA output convention.
    """
    p = mbits + 1
    e = mag.bit_length() - 1 + scale
    q = (e if e > emin else emin) - mbits
    sh = q - scale
    if sh <= 0:
        m = mag << (-sh)
    else:
        m = mag >> sh
        rem = mag & ((1 << sh) - 1)
        if rem:
            if mode == _RNE:
                half = 1 << (sh - 1)
                if rem > half or (rem == half and (m & 1)):
                    m += 1
            elif mode == _RU:
                if not sign:
                    m += 1
            elif mode == _RD:
                if sign:
                    m += 1
    if m == 0:
        return sign << (ebits + mbits)
    if m >= (1 << p):
        m >>= 1
        q += 1
    if m >= (1 << mbits):
        e_final = q + mbits
        if e_final > emax or (nan_single and e_final == emax and m == (1 << p) - 1):
            return _inf(sign, ebits, mbits, has_inf, nan_single)
        return (sign << (ebits + mbits)) | ((e_final + bias) << mbits) | (m - (1 << mbits))
    return (sign << (ebits + mbits)) | m  # subnormal: q == emin - mbits


def _product_part(da, db, in_mbits):
    """Combine two decoded factors into a pipeline term.

    Finite terms are (cls, sign, anchor, vexp, sig) with
    value = (-1)^sign * sig * 2^vexp and window anchor exponent ``anchor``
    (the unnormalized ea+eb for products: significand value in [0, 4)).
    """
    ca, sa, ea, ga = da
    cb, sb, eb, gb = db
    sign = sa ^ sb
    if ca == _NAN or cb == _NAN:
        return (_NAN, sign, 0, 0, 0)
    if ca == _INF or cb == _INF:
        if ca == _ZERO or cb == _ZERO:
            return (_NAN, sign, 0, 0, 0)
        return (_INF, sign, 0, 0, 0)
    if ca == _ZERO or cb == _ZERO:
        return (_ZERO, sign, 0, 0, 0)
    anchor = ea + eb
    return (_FIN, sign, anchor, anchor - 2 * in_mbits, ga * gb)


def _addend_part(bits, ebits, mbits, bias, emin, nan_single):
    """Pipeline term for the accumulator addend, anchored at its normalized exponent."""
    cls, sign, e, sig = _decode(bits, ebits, mbits, bias, emin, nan_single)
    if cls != _FIN:
        return (cls, sign, 0, 0, 0)
    vexp = e - mbits
    return (_FIN, sign, vexp + sig.bit_length() - 1, vexp, sig)


def _block(parts, cfg):
    """One block FMA over pipeline terms: align, truncate, sum, round once."""
    (_, _, _, _, _, _, _,
     o_ebits, o_mbits, o_bias, o_emin, o_emax, o_has_inf, o_nan_single,
     f, _, rounding, _, _, sticky) = cfg

    has_nan = False
    pos_inf = False
    neg_inf = False
    e_max = None
    for part in parts:
        cls = part[0]
        if cls == _NAN:
            has_nan = True
        elif cls == _INF:
            if part[1]:
                neg_inf = True
            else:
                pos_inf = True
        elif cls == _FIN:
            if e_max is None or part[2] > e_max:
                e_max = part[2]
    if has_nan or (pos_inf and neg_inf):
        return _nan(o_ebits, o_mbits, o_nan_single)
    if pos_inf or neg_inf:
        return _inf(1 if neg_inf else 0, o_ebits, o_mbits, o_has_inf, o_nan_single)
    if e_max is None:
        # all terms are zeros; -0 only when every contributing term is -0
        if parts and all(part[1] for part in parts):
            return 1 << (o_ebits + o_mbits)
        return 0

    scale = e_max - f
    acc = 0
    for cls, sign, _, vexp, sig in parts:
        if cls != _FIN:
            continue
        shift = vexp - scale
        if shift >= 0:
            mag = sig << shift
            dropped = 0
        else:
            s2 = -shift
            if s2 >= sig.bit_length():
                mag = 0
                dropped = 1 if sig else 0
            else:
                mag = sig >> s2
                dropped = 1 if sig & ((1 << s2) - 1) else 0
        if sticky:
            mag = (mag << 1) | dropped
        acc += -mag if sign else mag
    if sticky:
        scale -= 1
    if acc == 0:
        return 0  # exact-zero sum
    sign = 1 if acc < 0 else 0
    return _round_acc(sign, abs(acc), scale,
                      o_ebits, o_mbits, o_bias, o_emin, o_emax,
                      o_has_inf, o_nan_single, rounding)


def _exact_add_rne(x_bits, y_bits, cfg):
    """d = RNE(x + y) computed exactly; the late accumulator addition."""
    (_, _, _, _, _, _, _,
     o_ebits, o_mbits, o_bias, o_emin, o_emax, o_has_inf, o_nan_single,
     *_rest) = cfg
    dx = _decode(x_bits, o_ebits, o_mbits, o_bias, o_emin, o_nan_single)
    dy = _decode(y_bits, o_ebits, o_mbits, o_bias, o_emin, o_nan_single)
    if dx[0] == _NAN or dy[0] == _NAN:
        return _nan(o_ebits, o_mbits, o_nan_single)
    if dx[0] == _INF or dy[0] == _INF:
        if dx[0] == _INF and dy[0] == _INF and dx[1] != dy[1]:
            return _nan(o_ebits, o_mbits, o_nan_single)
        sign = dx[1] if dx[0] == _INF else dy[1]
        return _inf(sign, o_ebits, o_mbits, o_has_inf, o_nan_single)
    if dx[0] == _ZERO and dy[0] == _ZERO:
        return (dx[1] & dy[1]) << (o_ebits + o_mbits)
    vx = (dx[3], dx[2] - o_mbits, dx[1])
    vy = (dy[3], dy[2] - o_mbits, dy[1])
    scale = min(vx[1], vy[1])
    acc = 0
    for sig, vexp, sign in (vx, vy):
        term = sig << (vexp - scale)
        acc += -term if sign else term
    if acc == 0:
        return 0
    sign = 1 if acc < 0 else 0
    return _round_acc(sign, abs(acc), scale,
                      o_ebits, o_mbits, o_bias, o_emin, o_emax,
                      o_has_inf, o_nan_single, _RNE)


def inner_product(a_bits, b_bits, c_bits, has_c, cfg):
    """Full chained inner product over raw bit patterns; returns output bits."""
    (i_ebits, i_mbits, i_bias, i_emin, _i_emax, _i_hi, i_ns,
     o_ebits, o_mbits, o_bias, o_emin, _o_emax, _o_hi, o_ns,
     _f, nfma, rounding, late_c, interleaved, _sticky) = cfg
    k = len(a_bits)
    if k == 0:
        if not has_c:
            return 0
        # no block executes: the addend is re-rounded to the output format only
        d = _decode(c_bits, o_ebits, o_mbits, o_bias, o_emin, o_ns)
        if d[0] == _NAN:
            return _nan(o_ebits, o_mbits, o_ns)
        return c_bits

    parts = []
    for i in range(k):
        da = _decode(a_bits[i], i_ebits, i_mbits, i_bias, i_emin, i_ns)
        db = _decode(b_bits[i], i_ebits, i_mbits, i_bias, i_emin, i_ns)
        parts.append(_product_part(da, db, i_mbits))

    addend = lambda bits: _addend_part(bits, o_ebits, o_mbits, o_bias, o_emin, o_ns)

    if interleaved:
        s_bits = None
        tile = 2 * nfma
        for t0 in range(0, k, tile):
            tparts = parts[t0:t0 + tile]
            g1 = [p for i, p in enumerate(tparts) if (i >> 1) % 2 == 0]
            g2 = [p for i, p in enumerate(tparts) if (i >> 1) % 2 == 1]
            if g1:
                s_bits = _block(g1 + ([addend(s_bits)] if s_bits is not None else []), cfg)
            if g2:
                s_bits = _block(g2 + ([addend(s_bits)] if s_bits is not None else []), cfg)
        if s_bits is None:
            s_bits = 0
        if has_c:
            return _exact_add_rne(s_bits, c_bits, cfg)
        return s_bits

    if late_c:
        s_bits = None
        for b0 in range(0, k, nfma):
            chunk = parts[b0:b0 + nfma]
            if s_bits is not None:
                chunk = chunk + [addend(s_bits)]
            s_bits = _block(chunk, cfg)
        if s_bits is None:
            s_bits = 0
        if has_c:
            return _exact_add_rne(s_bits, c_bits, cfg)
        return s_bits

    # early: c participates in the first block's alignment window
    s_bits = None
    for b0 in range(0, k, nfma):
        chunk = parts[b0:b0 + nfma]
        if s_bits is None:
            if has_c:
                chunk = chunk + [addend(c_bits)]
        else:
            chunk = chunk + [addend(s_bits)]
        s_bits = _block(chunk, cfg)
    return s_bits


def block_fma_parts(parts, c_bits, has_c, cfg):
    """Single block over prepared product terms plus an optional addend."""
    (_, _, _, _, _, _, _,
     o_ebits, o_mbits, o_bias, o_emin, _o_emax, _o_hi, o_ns,
     *_rest) = cfg
    terms = list(parts)
    if has_c:
        terms.append(_addend_part(c_bits, o_ebits, o_mbits, o_bias, o_emin, o_ns))
    return _block(terms, cfg)


def gemm(a_bits, b_bits, c_bits, m, k, n, cfg):
    """Row-major GEMM over bit matrices: d[i,j] = inner(row_i(A), col_j(B), C[i,j])."""
    out = [0] * (m * n)
    for i in range(m):
        row_a = a_bits[i * k:(i + 1) * k]
        for j in range(n):
            col_b = [b_bits[t * n + j] for t in range(k)]
            out[i * n + j] = inner_product(row_a, col_b, c_bits[i * n + j], True, cfg)
    return out


def quantize_f64(values, fpk, mode):
    """Quantize binary64 values into the packed format; returns a bits list."""
    import math

    ebits, mbits, bias, emin, emax, has_inf, nan_single = fpk
    out = []
    for v in values:
        if v != v:  # NaN
            out.append(_nan(ebits, mbits, nan_single))
            continue
        if v == math.inf or v == -math.inf:
            out.append(_inf(1 if v < 0 else 0, ebits, mbits, has_inf, nan_single))
            continue
        if v == 0.0:
            out.append((1 if math.copysign(1.0, v) < 0 else 0) << (ebits + mbits))
            continue
        sign = 1 if v < 0 else 0
        fr, ex = math.frexp(abs(v))
        sig = int(fr * (1 << 53))  # exact: frexp mantissa has <= 53 bits
        out.append(_round_ieee(sign, sig, ex - 53, ebits, mbits, bias, emin, emax,
                               has_inf, nan_single, mode))
    return out


def _round_ieee(sign, mag, scale, ebits, mbits, bias, emin, emax, has_inf, nan_single, mode):
    """Like _round_acc but with IEEE overflow behavior (RZ saturates)."""
    p = mbits + 1
    e = mag.bit_length() - 1 + scale
    if e > emax + 1:
        return _ieee_overflow(sign, ebits, mbits, bias, emax, has_inf, nan_single, mode)
    q = (e if e > emin else emin) - mbits
    sh = q - scale
    if sh <= 0:
        m = mag << (-sh)
    else:
        m = mag >> sh
        rem = mag & ((1 << sh) - 1)
        if rem:
            if mode == _RNE:
                half = 1 << (sh - 1)
                if rem > half or (rem == half and (m & 1)):
                    m += 1
            elif mode == _RU:
                if not sign:
                    m += 1
            elif mode == _RD:
                if sign:
                    m += 1
    if m == 0:
        return sign << (ebits + mbits)
    if m >= (1 << p):
        m >>= 1
        q += 1
    if m >= (1 << mbits):
        e_final = q + mbits
        if e_final > emax or (nan_single and e_final == emax and m == (1 << p) - 1):
            return _ieee_overflow(sign, ebits, mbits, bias, emax, has_inf, nan_single, mode)
        return (sign << (ebits + mbits)) | ((e_final + bias) << mbits) | (m - (1 << mbits))
    return (sign << (ebits + mbits)) | m


def _ieee_overflow(sign, ebits, mbits, bias, emax, has_inf, nan_single, mode):
    to_inf = mode == _RNE or (mode == _RU and not sign) or (mode == _RD and sign)
    if to_inf:
        return _inf(sign, ebits, mbits, has_inf, nan_single)
    max_sig = ((1 << (mbits + 1)) - 2) if nan_single else ((1 << (mbits + 1)) - 1)
    return (sign << (ebits + mbits)) | ((emax + bias) << mbits) | (max_sig - (1 << mbits))
