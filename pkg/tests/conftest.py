"""Shared test helpers.

numpy.linalg / scipy are used here as independent oracles only; the
package itself routes all decompositions through its own kernels.
"""

import numpy as np
import pytest

from senselab import ArrayGeometry, CsiSet, Path, PathSet, default_grid, synthesize_csi


def random_complex(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def random_hermitian(rng, n):
    a = random_complex(rng, n, n)
    return (a + a.conj().T) / 2


def random_orthonormal(rng, rows, cols):
    """Random orthonormal columns via numpy QR (oracle-side routine)."""
    q, r = np.linalg.qr(random_complex(rng, rows, rows))
    # fix the QR phase ambiguity so draws are Haar distributed
    q = q * (np.diag(r) / np.abs(np.diag(r)))
    return np.ascontiguousarray(q[:, :cols])


def random_unitary(rng, n):
    return random_orthonormal(rng, n, n)


def random_csi(rng, m=2, n=3, k=8, grid=None):
    """CsiSet with i.i.d. Gaussian entries on a small grid."""
    if grid is None:
        grid = default_grid()
        k = grid.num_subcarriers
    h = random_complex(rng, k, m, n)
    return CsiSet(h, grid)


def scene_csi(aods_deg, gains, num_tx, num_rx=2, excess=None, grid=None):
    """Physical CSI from explicit departure angles and gains."""
    if grid is None:
        grid = default_grid()
    lam = grid.center_wavelength
    tx = ArrayGeometry(num_tx, lam / 2)
    rx = ArrayGeometry(num_rx, lam / 2)
    if excess is None:
        excess = [0.0] * len(aods_deg)
    paths = PathSet(tuple(
        Path(aod, 10.0 * (i - 1), gains[i], excess_length=excess[i])
        for i, aod in enumerate(aods_deg)
    ))
    return synthesize_csi(paths, tx, rx, grid)


def max_principal_angle(u, w):
    """Largest principal angle (radians) between equal-size column spaces.

    Sine-based: sin(theta_max) is the top singular value of the residual
    of w against span(u), accurate down to machine precision.
    """
    resid = w - u @ (u.conj().T @ w)
    s = np.linalg.svd(resid, compute_uv=False)
    return float(np.arcsin(min(1.0, s.max(initial=0.0))))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
