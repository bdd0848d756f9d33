import numpy as np
from numba import njit


@njit(cache=True)
def quadratic_lasso_cd(H, g, x, pen, max_sweeps, tol):
    """Coordinate descent for ``min_z g.(z-x) + (z-x).H.(z-x)/2 + sum pen*|z|``.

    Works on the target point ``z`` directly so that thresholded coordinates
    come back as exact zeros. Returns ``z`` and the number of sweeps used.
    """
    k = x.shape[0]
    z = x.copy()
    Hd = np.zeros(k)
    sweeps = 0
    for sweep in range(max_sweeps):
        sweeps = sweep + 1
        biggest = 0.0
        for a in range(k):
            haa = H[a, a]
            u = z[a] - (g[a] + Hd[a]) / haa
            if pen[a] > 0.0:
                thr = pen[a] / haa
                if u > thr:
                    znew = u - thr
                elif u < -thr:
                    znew = u + thr
                else:
                    znew = 0.0
            else:
                znew = u
            delta = znew - z[a]
            if delta != 0.0:
                z[a] = znew
                for b in range(k):
                    Hd[b] += H[b, a] * delta
                if abs(delta) > biggest:
                    biggest = abs(delta)
        if biggest <= tol:
            break
    return z, sweeps
