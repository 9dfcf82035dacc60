"""Pure numpy implementations of the numerical kernels.

Same signatures and results as the compiled ``_kernels`` extension; used
when the extension is unavailable or ``PCSYNTH_PURE_PYTHON`` is set.
"""

import numpy as np

TIE_TOL = 1e-12


def schur_blocks(coef, X, Zinv, out):
    """Local Schur complements ``out[b, p, q] = tr(F_p X F_q Z^-1)``.

    ``coef`` is (B, k, s, s), ``X`` and ``Zinv`` (B, s, s), ``out`` (B, k, k).
    """
    G = X[:, None] @ coef @ Zinv[:, None]
    out[...] = np.einsum("bpij,bqji->bpq", coef, G)
    # upper triangle is authoritative, as in the compiled kernel
    rows, cols = np.triu_indices(coef.shape[1], 1)
    out[:, cols, rows] = out[:, rows, cols]


def min_quadratic(P, X, tie_tol=TIE_TOL):
    """Minimum of ``x' P_s x`` over nodes, and the first node within the tie tolerance.

    ``P`` is (N, n, n), ``X`` (npts, n). Returns ``(W, node)`` arrays. Ties
    are judged on the unit vector ``x / |x|``, so the threshold is
    ``tie_tol * |x|^2`` and the choice does not depend on the scale of ``x``.
    """
    vals = np.einsum("pi,sij,pj->ps", X, P, X)
    W = vals.min(axis=1)
    slack = tie_tol * np.einsum("pi,pi->p", X, X)
    node = np.argmax(vals <= (W + slack)[:, None], axis=1)
    return W, node.astype(np.int64)
