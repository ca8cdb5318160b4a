"""tcemu: bit-accurate software models of GPU tensor-core inner products."""

from .engine import (
    ACTIVE_KERNEL,
    HAVE_COMPILED_KERNEL,
    ExactProduct,
    TcConfig,
    block_fma,
    exact_product,
    inner_product,
)
from .formats import (
    FORMATS,
    FpClass,
    FpFormat,
    FpValue,
    Rounding,
    decompose,
    get_format,
    parse_hexfloat,
    quantize,
    render_hexfloat,
)

__version__ = "0.1.0"

__all__ = [
    "ACTIVE_KERNEL",
    "HAVE_COMPILED_KERNEL",
    "ExactProduct",
    "FORMATS",
    "FpClass",
    "FpFormat",
    "FpValue",
    "Rounding",
    "TcConfig",
    "block_fma",
    "decompose",
    "exact_product",
    "get_format",
    "inner_product",
    "parse_hexfloat",
    "quantize",
    "render_hexfloat",
]
