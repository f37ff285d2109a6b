"""Pure-numpy reference implementation of the hot kernels.

Every reduction folds adjacent pairs left to right, level by level, with an
odd trailing element carried to the end of the next level.  The compiled
backend implements exactly the same tree, so the two backends agree bitwise
and results never depend on how work is scheduled.
"""

import numpy as np

BACKEND = "python"


def tree_sum(a):
    """Fixed-order pairwise-tree sum of a float64 array (any shape, C order)."""
    buf = np.ascontiguousarray(a, dtype=np.float64).ravel()
    if buf.size == 0:
        return 0.0
    while buf.size > 1:
        n = buf.size
        if n % 2:
            buf = np.concatenate((buf[: n - 1 : 2] + buf[1:n:2], buf[n - 1 :]))
        else:
            buf = buf[0::2] + buf[1::2]
    return float(buf[0])


def tree_dot(a, b):
    """tree_sum of the elementwise product a*b (products rounded once)."""
    av = np.ascontiguousarray(a, dtype=np.float64).ravel()
    bv = np.ascontiguousarray(b, dtype=np.float64).ravel()
    if av.size != bv.size:
        raise ValueError("tree_dot: size mismatch")
    return tree_sum(av * bv)


def advection_products(sig1, sig2, ut1, ut2, wx, wy, gsx, gsy, m):
    """Pointwise advection assembly (m*sig + ut).grad(w) + m * ut.grad(g).

    Association order is fixed; the compiled kernel mirrors it exactly.
    """
    t1 = (m * sig1 + ut1) * wx
    t2 = (m * sig2 + ut2) * wy
    t3 = m * (ut1 * gsx + ut2 * gsy)
    return (t1 + t2) + t3
