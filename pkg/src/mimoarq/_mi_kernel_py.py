"""Pure numpy fallback for the pairwise-gap MI kernel.

Same contract as the compiled extension module: see kernels.round_gap_terms.
Vectorized over (symbol, symbol', draw) with the symbol axis chunked to
bound scratch memory.
"""

import numpy as np

_LN2 = float(np.log(2.0))
_SCRATCH_CAP = 1 << 22  # elements per chunk, ~32 MB of float64


def round_gap_terms(u, w, out):
    """Fill out[b, d] with mean_q log2 sum_q' exp(-|du|^2 - 2 Re<du, w[b,d]>).

    du = u[b, q] - u[b, q'].  u: (B, Q, R) complex128, w: (B, D, R)
    complex128, out: (B, D) float64, overwritten in place.
    """
    n_blocks, q, _ = u.shape
    d = w.shape[1]
    step = max(1, _SCRATCH_CAP // (q * d))
    for b in range(n_blocks):
        wc = np.conj(w[b])  # (D, R)
        acc = np.zeros(d)
        for q0 in range(0, q, step):
            du = u[b, q0:q0 + step, None, :] - u[b, None, :, :]  # (G, Q, R)
            e = -np.einsum("gqr,gqr->gq", du, np.conj(du)).real
            e = e[:, :, None] - 2.0 * np.einsum("gqr,dr->gqd", du, wc).real
            mx = e.max(axis=1)  # (G, D)
            np.exp(e - mx[:, None, :], out=e)
            acc += (mx + np.log(e.sum(axis=1))).sum(axis=0)
        out[b] = acc / (q * _LN2)
    return out
