"""Jitted inner loop for the pairwise journey-similarity matrix.

Rows are journey vectors over the extended reals (np.inf marks an
unobserved station). The caller passes rows sorted ascending by their
earliest finite entry so the loop can stop scanning once two journeys'
observation windows are further apart than ``cutoff`` (such pairs can
carry no weight above the configured truncation).
"""

from __future__ import annotations

import numpy as np

from ._accel import njit

HARD = 0
SOFT = 1


@njit(cache=True)
def pairwise_weights_loop(entries, tmin, tmax, metric, scale, cutoff):  # pragma: no cover - jitted
    n, s = entries.shape
    w = np.zeros((n, n), dtype=np.float64)
    for i in range(n):
        hi = tmax[i]
        for j in range(i + 1, n):
            if tmin[j] - hi > cutoff:
                break  # rows sorted by tmin: later j only get further away
            cnt = 0
            maxd = 0.0
            for k in range(s):
                a = entries[i, k]
                b = entries[j, k]
                if np.isfinite(a) and np.isfinite(b):
                    cnt += 1
                    d = a - b
                    if d < 0.0:
                        d = -d
                    if d > maxd:
                        maxd = d
            if cnt == 0:
                continue
            if metric == HARD:
                if maxd <= scale:
                    w[i, j] = cnt
                    w[j, i] = cnt
            else:
                v = cnt * np.exp(-(maxd * maxd) / scale)
                w[i, j] = v
                w[j, i] = v
    return w
