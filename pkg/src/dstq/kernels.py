"""Kernel dispatch: the compiled extension when importable, else plain Python.

Set ``DSTQ_PURE_PYTHON=1`` to force the fallback.
"""

import os

if os.environ.get("DSTQ_PURE_PYTHON") == "1":
    from ._kernels_py import masked_weight_sum, rows_with_event

    BACKEND = "python"
else:
    try:
        from ._kernels import masked_weight_sum, rows_with_event

        BACKEND = "cython"
    except ImportError:
        from ._kernels_py import masked_weight_sum, rows_with_event

        BACKEND = "python"

__all__ = ["BACKEND", "masked_weight_sum", "rows_with_event"]
