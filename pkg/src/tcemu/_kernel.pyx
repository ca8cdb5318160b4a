# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled block-FMA kernel; must agree bit-for-bit with tcemu._pykernel.

All significand arithmetic fits in int64: window magnitudes are below
2^(f+2) with f capped at 47 by the config layer, and the accumulator
carries at most f+13 bits.
"""

from libc.string cimport memcpy

import numpy as np


cdef enum:
    CLS_ZERO = 0
    CLS_FIN = 1
    CLS_INF = 2
    CLS_NAN = 3

cdef enum:
    R_RNE = 0
    R_RZ = 1
    R_RU = 2
    R_RD = 3

DEF MAX_BLOCK = 516  # nfma cap (512) plus the addend and slack


cdef struct FmtP:
    int ebits
    int mbits
    int bias
    int emin
    int emax
    int has_inf
    int nan_single

cdef struct Params:
    FmtP fin
    FmtP fout
    int f
    int nfma
    int rounding
    int late_c
    int interleaved
    int sticky

cdef struct Term:
    int cls
    int sign
    long long anchor
    long long vexp
    long long sig


cdef inline int bitlen64(unsigned long long x) nogil:
    cdef int n = 0
    if x >> 32:
        n += 32; x >>= 32
    if x >> 16:
        n += 16; x >>= 16
    if x >> 8:
        n += 8; x >>= 8
    if x >> 4:
        n += 4; x >>= 4
    if x >> 2:
        n += 2; x >>= 2
    if x >> 1:
        n += 1; x >>= 1
    return n + <int>x


cdef inline unsigned int nan_of(FmtP* F) nogil:
    if F.nan_single:
        return ((((1u << F.ebits) - 1) << F.mbits) | ((1u << F.mbits) - 1))
    return ((((1u << F.ebits) - 1) << F.mbits) | (1u << (F.mbits - 1)))


cdef inline unsigned int inf_of(int sign, FmtP* F) nogil:
    if not F.has_inf:
        return nan_of(F)
    return (<unsigned int>sign << (F.ebits + F.mbits)) | (((1u << F.ebits) - 1) << F.mbits)


cdef inline unsigned int max_finite_of(int sign, FmtP* F) nogil:
    cdef unsigned int max_sig
    if F.nan_single:
        max_sig = (1u << (F.mbits + 1)) - 2
    else:
        max_sig = (1u << (F.mbits + 1)) - 1
    return ((<unsigned int>sign << (F.ebits + F.mbits))
            | (<unsigned int>(F.emax + F.bias) << F.mbits)
            | (max_sig - (1u << F.mbits)))


cdef inline unsigned int overflow_of(int sign, FmtP* F, int mode, int to_inf) nogil:
    if to_inf:
        return inf_of(sign, F)
    if mode == R_RNE or (mode == R_RU and sign == 0) or (mode == R_RD and sign == 1):
        return inf_of(sign, F)
    return max_finite_of(sign, F)


cdef inline void decode(unsigned int bits, FmtP* F,
                        int* cls, int* sign, long long* e, long long* sig) nogil:
    cdef unsigned int ef, mant
    sign[0] = <int>((bits >> (F.ebits + F.mbits)) & 1u)
    ef = (bits >> F.mbits) & ((1u << F.ebits) - 1)
    mant = bits & ((1u << F.mbits) - 1)
    if ef == (1u << F.ebits) - 1:
        if F.nan_single:
            if mant == (1u << F.mbits) - 1:
                cls[0] = CLS_NAN; e[0] = 0; sig[0] = 0
            else:
                cls[0] = CLS_FIN
                e[0] = <long long>ef - F.bias
                sig[0] = <long long>(mant | (1u << F.mbits))
            return
        if mant == 0:
            cls[0] = CLS_INF; e[0] = 0; sig[0] = 0
        else:
            cls[0] = CLS_NAN; e[0] = 0; sig[0] = 0
        return
    if ef == 0:
        if mant == 0:
            cls[0] = CLS_ZERO; e[0] = 0; sig[0] = 0
        else:
            cls[0] = CLS_FIN; e[0] = F.emin; sig[0] = <long long>mant
        return
    cls[0] = CLS_FIN
    e[0] = <long long>ef - F.bias
    sig[0] = <long long>(mant | (1u << F.mbits))


cdef inline unsigned int round_value(int sign, long long mag, long long scale,
                                     FmtP* F, int mode, int to_inf) nogil:
    """Round (-1)^sign * mag * 2^scale; mag > 0."""
    cdef int p = F.mbits + 1
    cdef long long top = bitlen64(<unsigned long long>mag) - 1
    cdef long long e = top + scale
    if e > F.emax:
        return overflow_of(sign, F, mode, to_inf)
    cdef long long q = (e if e > F.emin else F.emin) - F.mbits
    cdef long long sh = q - scale
    cdef long long m, rem, half
    if sh <= 0:
        m = mag << (-sh)
    elif sh >= 62:
        m = 0
        if mode == R_RU and sign == 0:
            m = 1
        elif mode == R_RD and sign == 1:
            m = 1
    else:
        m = mag >> sh
        rem = mag & ((1LL << sh) - 1)
        if rem != 0:
            if mode == R_RNE:
                half = 1LL << (sh - 1)
                if rem > half or (rem == half and (m & 1)):
                    m += 1
            elif mode == R_RU:
                if sign == 0:
                    m += 1
            elif mode == R_RD:
                if sign == 1:
                    m += 1
    if m == 0:
        return <unsigned int>sign << (F.ebits + F.mbits)
    if m >= (1LL << p):
        m >>= 1
        q += 1
    cdef long long e_final
    if m >= (1LL << F.mbits):
        e_final = q + F.mbits
        if e_final > F.emax or (F.nan_single and e_final == F.emax and m == (1LL << p) - 1):
            return overflow_of(sign, F, mode, to_inf)
        return ((<unsigned int>sign << (F.ebits + F.mbits))
                | (<unsigned int>(e_final + F.bias) << F.mbits)
                | <unsigned int>(m - (1LL << F.mbits)))
    return (<unsigned int>sign << (F.ebits + F.mbits)) | <unsigned int>m


cdef inline Term product_term(unsigned int abits, unsigned int bbits, FmtP* F) nogil:
    cdef Term t
    cdef int ca, sa, cb, sb
    cdef long long ea, ga, eb, gb
    decode(abits, F, &ca, &sa, &ea, &ga)
    decode(bbits, F, &cb, &sb, &eb, &gb)
    t.sign = sa ^ sb
    t.anchor = 0
    t.vexp = 0
    t.sig = 0
    if ca == CLS_NAN or cb == CLS_NAN:
        t.cls = CLS_NAN
    elif ca == CLS_INF or cb == CLS_INF:
        if ca == CLS_ZERO or cb == CLS_ZERO:
            t.cls = CLS_NAN
        else:
            t.cls = CLS_INF
    elif ca == CLS_ZERO or cb == CLS_ZERO:
        t.cls = CLS_ZERO
    else:
        t.cls = CLS_FIN
        t.anchor = ea + eb
        t.vexp = t.anchor - 2 * F.mbits
        t.sig = ga * gb
    return t


cdef inline Term addend_term(unsigned int bits, FmtP* F) nogil:
    cdef Term t
    cdef int cls, sign
    cdef long long e, sig
    decode(bits, F, &cls, &sign, &e, &sig)
    t.cls = cls
    t.sign = sign
    t.anchor = 0
    t.vexp = 0
    t.sig = 0
    if cls == CLS_FIN:
        t.vexp = e - F.mbits
        t.anchor = t.vexp + bitlen64(<unsigned long long>sig) - 1
        t.sig = sig
    return t


cdef unsigned int block(Term* t, int n, Params* P) nogil:
    cdef bint has_nan = False, pinf = False, ninf = False, any_fin = False
    cdef long long e_max = 0
    cdef int i
    for i in range(n):
        if t[i].cls == CLS_NAN:
            has_nan = True
        elif t[i].cls == CLS_INF:
            if t[i].sign:
                ninf = True
            else:
                pinf = True
        elif t[i].cls == CLS_FIN:
            if not any_fin or t[i].anchor > e_max:
                e_max = t[i].anchor
            any_fin = True
    if has_nan or (pinf and ninf):
        return nan_of(&P.fout)
    if pinf or ninf:
        return inf_of(1 if ninf else 0, &P.fout)
    if not any_fin:
        if n > 0:
            for i in range(n):
                if not t[i].sign:
                    return 0
            return 1u << (P.fout.ebits + P.fout.mbits)
        return 0

    cdef long long scale = e_max - P.f
    cdef long long acc = 0, mag, shift
    cdef int dropped
    for i in range(n):
        if t[i].cls != CLS_FIN:
            continue
        shift = t[i].vexp - scale
        if shift >= 0:
            mag = t[i].sig << shift
            dropped = 0
        else:
            if -shift >= 63:
                mag = 0
                dropped = 1 if t[i].sig != 0 else 0
            else:
                mag = t[i].sig >> (-shift)
                dropped = 1 if (t[i].sig & ((1LL << (-shift)) - 1)) != 0 else 0
        if P.sticky:
            mag = (mag << 1) | dropped
        if t[i].sign:
            acc -= mag
        else:
            acc += mag
    if P.sticky:
        scale -= 1
    if acc == 0:
        return 0
    if acc < 0:
        return round_value(1, -acc, scale, &P.fout, P.rounding, 1)
    return round_value(0, acc, scale, &P.fout, P.rounding, 1)


cdef unsigned int exact_add_rne(unsigned int xbits, unsigned int ybits, FmtP* F) nogil:
    """RNE(x + y) on two values of the same format, computed exactly."""
    cdef int cx, sx, cy, sy
    cdef long long ex, gx, ey, gy
    decode(xbits, F, &cx, &sx, &ex, &gx)
    decode(ybits, F, &cy, &sy, &ey, &gy)
    if cx == CLS_NAN or cy == CLS_NAN:
        return nan_of(F)
    if cx == CLS_INF or cy == CLS_INF:
        if cx == CLS_INF and cy == CLS_INF and sx != sy:
            return nan_of(F)
        return inf_of(sx if cx == CLS_INF else sy, F)
    if cx == CLS_ZERO and cy == CLS_ZERO:
        return <unsigned int>(sx & sy) << (F.ebits + F.mbits)
    cdef long long vx = ex - F.mbits, vy = ey - F.mbits
    cdef long long acc, gap, scale
    # order by value exponent so x is the wider-scaled operand
    if cy == CLS_ZERO:
        gy = 0; vy = vx
    if cx == CLS_ZERO:
        gx = 0; vx = vy
    if vx < vy:
        gx, gy = gy, gx
        vx, vy = vy, vx
        sx, sy = sy, sx
    gap = vx - vy
    if gap <= 34:
        scale = vy
        acc = (gx << gap)
        if sx:
            acc = -acc
        if sy:
            acc -= gy
        else:
            acc += gy
    else:
        # y is far below one unit of x's tail: a sticky nudge preserves RNE
        scale = vx - 3
        acc = gx << 3
        if sx:
            acc = -acc
        if gy != 0:
            if sy:
                acc -= 1
            else:
                acc += 1
    if acc == 0:
        return 0
    if acc < 0:
        return round_value(1, -acc, scale, F, R_RNE, 1)
    return round_value(0, acc, scale, F, R_RNE, 1)


cdef unsigned int inner_product_impl(const unsigned int* a, const unsigned int* b,
                                     Py_ssize_t k, unsigned int c_bits, int has_c,
                                     Params* P) nogil:
    cdef Term scratch[MAX_BLOCK]
    cdef int nt, parity, cls, sign
    cdef long long e, sig
    cdef Py_ssize_t pos, lim, t0, i
    cdef unsigned int s_bits = 0
    cdef int s_ok = 0

    if k == 0:
        if not has_c:
            return 0
        decode(c_bits, &P.fout, &cls, &sign, &e, &sig)
        if cls == CLS_NAN:
            return nan_of(&P.fout)
        return c_bits

    if P.interleaved:
        t0 = 0
        while t0 < k:
            lim = t0 + 2 * P.nfma
            if lim > k:
                lim = k
            for parity in range(2):
                nt = 0
                for i in range(t0, lim):
                    if (((i - t0) >> 1) & 1) == parity:
                        scratch[nt] = product_term(a[i], b[i], &P.fin)
                        nt += 1
                if nt == 0:
                    continue
                if s_ok:
                    scratch[nt] = addend_term(s_bits, &P.fout)
                    nt += 1
                s_bits = block(scratch, nt, P)
                s_ok = 1
            t0 += 2 * P.nfma
        if has_c:
            return exact_add_rne(s_bits if s_ok else 0, c_bits, &P.fout)
        return s_bits if s_ok else 0

    if P.late_c:
        pos = 0
        while pos < k:
            lim = pos + P.nfma
            if lim > k:
                lim = k
            nt = 0
            for i in range(pos, lim):
                scratch[nt] = product_term(a[i], b[i], &P.fin)
                nt += 1
            if s_ok:
                scratch[nt] = addend_term(s_bits, &P.fout)
                nt += 1
            s_bits = block(scratch, nt, P)
            s_ok = 1
            pos = lim
        if has_c:
            return exact_add_rne(s_bits, c_bits, &P.fout)
        return s_bits

    # early c order
    pos = 0
    while pos < k:
        lim = pos + P.nfma
        if lim > k:
            lim = k
        nt = 0
        for i in range(pos, lim):
            scratch[nt] = product_term(a[i], b[i], &P.fin)
            nt += 1
        if pos == 0:
            if has_c:
                scratch[nt] = addend_term(c_bits, &P.fout)
                nt += 1
        else:
            scratch[nt] = addend_term(s_bits, &P.fout)
            nt += 1
        s_bits = block(scratch, nt, P)
        pos = lim
    return s_bits


cdef int fill_params(tuple cfg, Params* P) except -1:
    if len(cfg) != 20:
        raise ValueError("packed config must have 20 fields")
    P.fin.ebits = cfg[0]; P.fin.mbits = cfg[1]; P.fin.bias = cfg[2]
    P.fin.emin = cfg[3]; P.fin.emax = cfg[4]
    P.fin.has_inf = cfg[5]; P.fin.nan_single = cfg[6]
    P.fout.ebits = cfg[7]; P.fout.mbits = cfg[8]; P.fout.bias = cfg[9]
    P.fout.emin = cfg[10]; P.fout.emax = cfg[11]
    P.fout.has_inf = cfg[12]; P.fout.nan_single = cfg[13]
    P.f = cfg[14]; P.nfma = cfg[15]; P.rounding = cfg[16]
    P.late_c = cfg[17]; P.interleaved = cfg[18]; P.sticky = cfg[19]
    if P.nfma < 1 or P.nfma > 512:
        raise ValueError("nfma out of supported range [1, 512]")
    if P.f < 1 or P.f > 47:
        raise ValueError("fraction window out of supported range [1, 47]")
    return 0


cdef int fill_fmt(tuple fpk, FmtP* F) except -1:
    if len(fpk) != 7:
        raise ValueError("packed format must have 7 fields")
    F.ebits = fpk[0]; F.mbits = fpk[1]; F.bias = fpk[2]
    F.emin = fpk[3]; F.emax = fpk[4]
    F.has_inf = fpk[5]; F.nan_single = fpk[6]
    return 0


def inner_product(unsigned int[::1] a, unsigned int[::1] b,
                  unsigned int c_bits, int has_c, tuple cfg):
    """Inner product over raw bit patterns; returns the output bit pattern."""
    cdef Params P
    fill_params(cfg, &P)
    cdef Py_ssize_t k = a.shape[0]
    if b.shape[0] != k:
        raise ValueError("length mismatch")
    if k == 0:
        return inner_product_impl(NULL, NULL, 0, c_bits, has_c, &P)
    return inner_product_impl(&a[0], &b[0], k, c_bits, has_c, &P)


def gemm(unsigned int[:, ::1] a, unsigned int[:, ::1] b,
         unsigned int[:, ::1] c, tuple cfg):
    """Element-wise inner-product GEMM over row-major bit matrices."""
    cdef Params P
    fill_params(cfg, &P)
    cdef Py_ssize_t m = a.shape[0], k = a.shape[1]
    cdef Py_ssize_t n = b.shape[1]
    if b.shape[0] != k or c.shape[0] != m or c.shape[1] != n:
        raise ValueError("GEMM dimension mismatch")
    out_arr = np.empty((m, n), dtype=np.uint32)
    col_arr = np.empty(k if k > 0 else 1, dtype=np.uint32)
    cdef unsigned int[:, ::1] out = out_arr
    cdef unsigned int[::1] col = col_arr
    cdef Py_ssize_t i, j, t
    with nogil:
        for j in range(n):
            for t in range(k):
                col[t] = b[t, j]
            for i in range(m):
                if k == 0:
                    out[i, j] = inner_product_impl(NULL, NULL, 0, c[i, j], 1, &P)
                else:
                    out[i, j] = inner_product_impl(&a[i, 0], &col[0], k, c[i, j], 1, &P)
    return out_arr


def quantize_f64(double[::1] vals, tuple fpk, int mode):
    """Quantize binary64 values into the packed format (IEEE overflow rules)."""
    cdef FmtP F
    fill_fmt(fpk, &F)
    cdef Py_ssize_t n = vals.shape[0]
    out_arr = np.empty(n, dtype=np.uint32)
    cdef unsigned int[::1] out = out_arr
    cdef Py_ssize_t i
    cdef double v
    cdef unsigned long long u, mant
    cdef int ef, sign
    cdef long long sig, ex
    with nogil:
        for i in range(n):
            v = vals[i]
            memcpy(&u, &v, 8)
            sign = <int>(u >> 63)
            ef = <int>((u >> 52) & 0x7FF)
            mant = u & ((1ULL << 52) - 1)
            if ef == 0x7FF:
                if mant:
                    out[i] = nan_of(&F)
                else:
                    out[i] = inf_of(sign, &F)
                continue
            if ef == 0 and mant == 0:
                out[i] = <unsigned int>sign << (F.ebits + F.mbits)
                continue
            if ef == 0:
                sig = <long long>mant
                ex = -1022 - 52
            else:
                sig = <long long>(mant | (1ULL << 52))
                ex = ef - 1023 - 52
            out[i] = round_value(sign, sig, ex, &F, mode, 0)
    return out_arr
