"""Block-FMA engine: model configuration, exact products, inner products.

The hot numeric path lives in a compiled extension (``tcemu._kernel``)
with a pure-Python twin (``tcemu._pykernel``); the compiled one is
selected at import when available.  Both operate on raw bit patterns and
must agree bit-for-bit (tested).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import NamedTuple, Optional, Sequence

import numpy as np

from . import _pykernel
from .formats import FpClass, FpFormat, FpValue, Rounding, decompose

try:
    from . import _kernel as _fast
    HAVE_COMPILED_KERNEL = True
except ImportError:  # pragma: no cover - depends on build environment
    _fast = None
    HAVE_COMPILED_KERNEL = False

ACTIVE_KERNEL = "compiled" if HAVE_COMPILED_KERNEL else "python"

INTERNAL_PRECISION = 24  # binary32 significand width used by all models
WINDOW_INT_BITS = 2  # products stay denormalized: values in [0, 4)


class ConfigError(ValueError):
    """Invalid tensor-core model configuration."""


@dataclass(frozen=True)
class TcConfig:
    """Complete parameter set of one tensor-core model variant."""

    in_format: FpFormat
    out_format: FpFormat
    neab: int
    nfma: int
    final_rounding: Rounding = Rounding.RZ
    c_order: str = "early"
    interleaved: bool = False
    sticky_enabled: bool = False

    def __post_init__(self):
        if self.fraction_bits < 1:
            raise ConfigError(
                f"fraction window must be >= 1 bit (neab={self.neab} gives {self.fraction_bits})"
            )
        if self.nfma < 1:
            raise ConfigError("nfma must be >= 1")
        if self.c_order not in ("early", "late"):
            raise ConfigError(f"c_order must be 'early' or 'late', not {self.c_order!r}")
        if self.interleaved and self.c_order != "late":
            raise ConfigError("interleaved accumulation implies late c order")

    @property
    def fraction_bits(self) -> int:
        """f: fractional bits of the alignment window."""
        return INTERNAL_PRECISION - 1 + self.neab

    @property
    def carry_bits(self) -> int:
        # ceil(log2(nfma + 1)): nfma products plus the addend
        return self.nfma.bit_length()

    @property
    def accumulator_width(self) -> int:
        """Accumulator output precision: int bits + fraction + carries."""
        return WINDOW_INT_BITS + self.fraction_bits + self.carry_bits

    def with_rounding(self, mode: Rounding) -> "TcConfig":
        return replace(self, final_rounding=mode)

    def packed(self) -> tuple:
        return (
            *self.in_format.packed(),
            *self.out_format.packed(),
            self.fraction_bits,
            self.nfma,
            int(self.final_rounding),
            int(self.c_order == "late"),
            int(self.interleaved),
            int(self.sticky_enabled),
        )

    def describe(self) -> str:
        """One-line audit string printed by the CLI for every run."""
        return (
            f"in={self.in_format.name} out={self.out_format.name} "
            f"neab={self.neab} f={self.fraction_bits} nfma={self.nfma} "
            f"rounding={self.final_rounding.name.lower()} c_order={self.c_order} "
            f"interleaved={int(self.interleaved)} sticky={int(self.sticky_enabled)} "
            f"acc_width={self.accumulator_width}"
        )


class ExactProduct(NamedTuple):
    """Unrounded a*b: sign, exponent ea+eb, integer significand, class.

    The significand carries 2*(p_in - 1) fractional bits; its value is in
    [0, 4) and is never pre-normalized.
    """

    sign: int
    exponent: int
    significand: int
    cls: FpClass


def exact_product(a: FpValue, b: FpValue) -> ExactProduct:
    """Form the exact denormalized product of two same-format values."""
    if a.fmt is not b.fmt and a.fmt != b.fmt:
        raise ConfigError("product factors must share a format")
    da = decompose(a)
    db = decompose(b)
    sign = da.sign ^ db.sign
    if da.cls is FpClass.NAN or db.cls is FpClass.NAN:
        return ExactProduct(sign, 0, 0, FpClass.NAN)
    if da.cls is FpClass.INF or db.cls is FpClass.INF:
        if da.cls is FpClass.ZERO or db.cls is FpClass.ZERO:
            return ExactProduct(sign, 0, 0, FpClass.NAN)
        return ExactProduct(sign, 0, 0, FpClass.INF)
    if da.cls is FpClass.ZERO or db.cls is FpClass.ZERO:
        return ExactProduct(sign, 0, 0, FpClass.ZERO)
    # NORMAL stands for "finite nonzero"; products are never pre-normalized
    return ExactProduct(sign, da.exponent + db.exponent,
                        da.significand * db.significand, FpClass.NORMAL)


def _product_to_part(p: ExactProduct, in_mbits: int) -> tuple:
    cls_map = {FpClass.ZERO: 0, FpClass.NORMAL: 1, FpClass.SUBNORMAL: 1,
               FpClass.INF: 2, FpClass.NAN: 3}
    cls = cls_map[p.cls]
    if cls != 1:
        return (cls, p.sign, 0, 0, 0)
    return (1, p.sign, p.exponent, p.exponent - 2 * in_mbits, p.significand)


def block_fma(products: Sequence[ExactProduct], c: Optional[FpValue], cfg: TcConfig) -> FpValue:
    """One block: align to the largest exponent, truncate, sum, round once."""
    if len(products) > cfg.nfma:
        raise ConfigError(f"block holds at most nfma={cfg.nfma} products, got {len(products)}")
    if c is not None and c.fmt != cfg.out_format:
        raise ConfigError("block addend must be in the output format")
    parts = [_product_to_part(p, cfg.in_format.mbits) for p in products]
    bits = _pykernel.block_fma_parts(
        parts, c.bits if c is not None else 0, c is not None, cfg.packed()
    )
    return FpValue(cfg.out_format, bits)


def inner_product(
    a: Sequence[FpValue],
    b: Sequence[FpValue],
    c: Optional[FpValue],
    cfg: TcConfig,
) -> FpValue:
    """d = sum(a[i]*b[i]) + c through the chained block-FMA pipeline."""
    if len(a) != len(b):
        raise ConfigError(f"length mismatch: |a|={len(a)} |b|={len(b)}")
    for v in a:
        if v.fmt != cfg.in_format:
            raise ConfigError(f"a entries must be {cfg.in_format.name}")
    for v in b:
        if v.fmt != cfg.in_format:
            raise ConfigError(f"b entries must be {cfg.in_format.name}")
    if c is not None and c.fmt != cfg.out_format:
        raise ConfigError("c must be in the output format")
    bits = inner_product_bits(
        [v.bits for v in a], [v.bits for v in b],
        c.bits if c is not None else None, cfg,
    )
    return FpValue(cfg.out_format, bits)


def inner_product_bits(
    a_bits: Sequence[int],
    b_bits: Sequence[int],
    c_bits: Optional[int],
    cfg: TcConfig,
    *,
    use_compiled: Optional[bool] = None,
) -> int:
    """Raw-bits inner product; dispatches to the compiled kernel when present."""
    packed = cfg.packed()
    has_c = c_bits is not None
    cb = c_bits if has_c else 0
    compiled = HAVE_COMPILED_KERNEL if use_compiled is None else use_compiled
    if compiled and HAVE_COMPILED_KERNEL:
        aa = np.ascontiguousarray(a_bits, dtype=np.uint32)
        bb = np.ascontiguousarray(b_bits, dtype=np.uint32)
        return int(_fast.inner_product(aa, bb, int(cb), int(has_c), packed))
    return _pykernel.inner_product(list(a_bits), list(b_bits), cb, has_c, packed)


def gemm_bits(
    a_bits: np.ndarray,
    b_bits: np.ndarray,
    c_bits: np.ndarray,
    cfg: TcConfig,
    *,
    use_compiled: Optional[bool] = None,
) -> np.ndarray:
    """Element-wise inner-product GEMM over row-major bit matrices."""
    a = np.ascontiguousarray(a_bits, dtype=np.uint32)
    b = np.ascontiguousarray(b_bits, dtype=np.uint32)
    c = np.ascontiguousarray(c_bits, dtype=np.uint32)
    m, k = a.shape
    k2, n = b.shape
    if k2 != k or c.shape != (m, n):
        raise ConfigError("GEMM dimension mismatch")
    packed = cfg.packed()
    compiled = HAVE_COMPILED_KERNEL if use_compiled is None else use_compiled
    if compiled and HAVE_COMPILED_KERNEL:
        return _fast.gemm(a, b, c, packed)
    flat = _pykernel.gemm(a.reshape(-1).tolist(), b.reshape(-1).tolist(),
                          c.reshape(-1).tolist(), m, k, n, packed)
    return np.array(flat, dtype=np.uint32).reshape(m, n)


def quantize_f64_array(
    values: np.ndarray,
    fmt: FpFormat,
    mode: Rounding = Rounding.RNE,
    *,
    use_compiled: Optional[bool] = None,
) -> np.ndarray:
    """Vector quantize binary64 -> format bits (IEEE overflow rules)."""
    vals = np.ascontiguousarray(values, dtype=np.float64)
    compiled = HAVE_COMPILED_KERNEL if use_compiled is None else use_compiled
    if compiled and HAVE_COMPILED_KERNEL:
        return _fast.quantize_f64(vals.reshape(-1), fmt.packed(), int(mode)).reshape(vals.shape)
    flat = _pykernel.quantize_f64(vals.reshape(-1).tolist(), fmt.packed(), int(mode))
    return np.array(flat, dtype=np.uint32).reshape(vals.shape)


def decode_f64_array(bits: np.ndarray, fmt: FpFormat) -> np.ndarray:
    """Exact binary64 values of an array of bit patterns."""
    flat = np.ascontiguousarray(bits, dtype=np.uint32).reshape(-1)
    out = np.empty(flat.shape, dtype=np.float64)
    for i, b in enumerate(flat):
        out[i] = FpValue(fmt, int(b)).value()
    return out.reshape(np.asarray(bits).shape)
