"""Thin wrappers over scipy.fft for the odd-odd quarter grid.

Interior node (i, j), 1 <= i, j <= n-1, carries sin(pi*m*i/n) = sin(2*pi*m*x)
for x = i*h, so the type-I DST on the (n-1)x(n-1) interior block is exact.
Mode n vanishes on every node and is not represented.
"""
import numpy as np
from scipy import fft


def dst_analysis(interior):
    n = interior.shape[0] + 1
    return fft.dstn(interior, type=1) / float(n * n)


def dst_synthesis(coeffs):
    return fft.dstn(coeffs, type=1) / 4.0


def pad_interior(interior):
    """Embed an interior block in a zero-bordered (n+1)x(n+1) array."""
    m = interior.shape[0]
    out = np.zeros((m + 2, m + 2))
    out[1:-1, 1:-1] = interior
    return out


def cos_sin_synthesis(coeffs):
    """Evaluate sum c[m,k] cos(2 pi m x1) sin(2 pi k x2) on all nodes.

    ``coeffs`` is indexed by m, k = 1..n-1.  Returns (n+1)x(n+1).
    """
    n = coeffs.shape[0] + 1
    # sine direction first (axis 1), interior j only
    partial = fft.dst(coeffs, type=1, axis=1) / 2.0
    b = np.zeros((n + 1, n - 1))
    b[1:n] = partial / 2.0
    full = fft.dct(b, type=1, axis=0)
    out = np.zeros((n + 1, n + 1))
    out[:, 1:n] = full
    return out
