"""Pure-numpy fallback for the pairwise similarity matrix.

Semantically identical to the jitted loop in :mod:`trainspot._kernels`;
works in row blocks to bound the (block, n, stations) broadcast
temporaries.
"""

from __future__ import annotations

import numpy as np

from ._kernels import HARD


def pairwise_weights_block(entries, tmin, tmax, metric, scale, cutoff, block=128):
    n, _ = entries.shape
    finite = np.isfinite(entries)
    filled = np.where(finite, entries, 0.0)  # keeps inf - inf out of the subtraction
    w = np.zeros((n, n), dtype=np.float64)
    for i0 in range(0, n, block):
        i1 = min(i0 + block, n)
        both = finite[i0:i1, None, :] & finite[None, :, :]
        diff = filled[i0:i1, None, :] - filled[None, :, :]
        cnt = both.sum(axis=2)
        maxd = np.where(both, np.abs(diff), -np.inf).max(axis=2, initial=-np.inf)
        gap = np.maximum(
            tmin[None, :] - tmax[i0:i1, None],
            tmin[i0:i1, None] - tmax[None, :],
        )
        ok = (cnt > 0) & (gap <= cutoff)
        if metric == HARD:
            vals = np.where(ok & (maxd <= scale), cnt.astype(np.float64), 0.0)
        else:
            with np.errstate(over="ignore", invalid="ignore"):
                soft = cnt * np.exp(-np.square(maxd) / scale)
            vals = np.where(ok, soft, 0.0)
        w[i0:i1, :] = vals
    np.fill_diagonal(w, 0.0)
    return w
