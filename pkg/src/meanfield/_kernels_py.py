"""Pure-numpy versions of the compiled kernels in ``_kernels.pyx``."""

import numpy as np


def weighted_laplacian(rho, v, h):
    rho_e = 0.5 * (rho + np.roll(rho, -1, axis=0))
    rho_n = 0.5 * (rho + np.roll(rho, -1, axis=1))
    flux_x = rho_e * (np.roll(v, -1, axis=0) - v)
    flux_y = rho_n * (np.roll(v, -1, axis=1) - v)
    div = (flux_x - np.roll(flux_x, 1, axis=0)) + (flux_y - np.roll(flux_y, 1, axis=1))
    return -div / (h * h)


def dirichlet_energy(rho, v):
    rho_e = 0.5 * (rho + np.roll(rho, -1, axis=0))
    rho_n = 0.5 * (rho + np.roll(rho, -1, axis=1))
    dx = np.roll(v, -1, axis=0) - v
    dy = np.roll(v, -1, axis=1) - v
    return float(np.sum(rho_e * dx * dx + rho_n * dy * dy))


def ball_sums(w, offsets):
    out = np.zeros_like(w)
    for a, b in offsets:
        # value at c is w[c + offset]
        out += np.roll(w, (-int(a), -int(b)), axis=(0, 1))
    return out
