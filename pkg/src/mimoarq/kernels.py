"""Kernel backend selection.

Imports the compiled extension when available, otherwise the numpy
fallback.  Set MIMOARQ_PURE_PYTHON=1 to force the fallback (used by the
benchmark and the backend-equivalence tests).
"""

import os

if os.environ.get("MIMOARQ_PURE_PYTHON"):
    from . import _mi_kernel_py as _impl

    BACKEND = "python"
else:
    try:
        from . import _mi_kernel as _impl

        BACKEND = "compiled"
    except ImportError:
        from . import _mi_kernel_py as _impl

        BACKEND = "python"


def round_gap_terms(u, w, out):
    """out[b, d] = mean over symbols q of

        log2 sum_q' exp(-|du|^2 - 2 Re<du, w[b, d]>),   du = u[b,q] - u[b,q']

    which is the per-draw gap between the symbol entropy M*N_t and the MI
    of block b.  u: (B, Q, R) complex128 scaled alphabet images, w: (B, D, R)
    complex128 unit-variance noise draws, out: (B, D) float64 overwritten.
    """
    return _impl.round_gap_terms(u, w, out)
