"""Shared constants and post-processing for both kernel backends.

The backends (`_core`, compiled; `_fallback`, pure Python) implement only
the inner Jacobi / Givens sweeps.  Ordering, phase normalization, and
zero-column completion live here so both backends expose the exact same
contract.  Everything in this package assumes complex128 C-contiguous
arrays; validation belongs to the public wrappers in `numerics` and
`bff_codec`.
"""

import numpy as np

SWEEP_CAP = 100
# converged when the off-diagonal Frobenius mass drops below CONV_REL * scale;
# hitting the sweep cap with residual above FAIL_REL * scale is an error
CONV_REL = 1e-12
FAIL_REL = 1e-8
# one-sided sweeps skip a column pair whose inner product is this small
# relative to the column norms (cos of the residual angle)
PAIR_REL = 1e-14
# singular values at or below ZERO_SNAP_REL * ||A||_F are noise from
# rotated-away dependent columns; snap them to exact zero and rebuild the
# corresponding left columns by completion
ZERO_SNAP_REL = 1e-13
# matrices whose largest entry magnitude falls outside [2^-128, 2^128] are
# rescaled before the sweeps: squared norms and their products underflow
# (or overflow) there, silently disabling rotations
SCALE_LO = 2.0**-128
SCALE_HI = 2.0**128


def prescale_batch(a):
    """Tame extreme per-matrix magnitudes with exact power-of-two factors.

    Returns (scaled, factors); factors is None when every matrix already
    lies in the safe range (the input object is passed through untouched,
    keeping in-range behavior bit-identical).  Eigenvalues and singular
    values of the scaled matrices must be multiplied back by the factor;
    the eigen/singular vectors are scale-invariant.
    """
    amax = np.max(np.abs(a), axis=(-2, -1))
    need = (amax > 0.0) & ((amax < SCALE_LO) | (amax > SCALE_HI))
    if not np.any(need):
        return a, None
    factors = np.ones(a.shape[0])
    # clamp to the normal-number exponent range: a subnormal factor would
    # overflow the reciprocal inside the division
    exps = np.clip(np.floor(np.log2(amax[need])), -1022.0, 1023.0)
    factors[need] = np.exp2(exps)
    return a / factors[:, None, None], factors


def fix_column_phases(v, companion=None):
    """Scale columns of v so the largest-magnitude entry is real positive.

    Ties break at the lowest row index.  When `companion` is given its
    columns receive the same scale factors, which keeps products such as
    U.diag(sigma).V^H invariant.  Shapes: v (..., n, k), companion (..., m, k).
    """
    mag = np.abs(v)
    rows = np.argmax(mag, axis=-2)
    pivot = np.take_along_axis(v, rows[..., None, :], axis=-2)[..., 0, :]
    amp = np.abs(pivot)
    scale = np.where(amp > 0, np.conj(pivot) / np.where(amp > 0, amp, 1.0), 1.0)
    v = v * scale[..., None, :]
    if companion is None:
        return v
    return v, companion * scale[..., None, :]


def finish_eigh(w, v):
    """Sort eigenvalues ascending (stable) and phase-fix eigenvectors."""
    order = np.argsort(w, axis=-1, kind="stable")
    w = np.take_along_axis(w, order, axis=-1)
    v = np.take_along_axis(v, order[..., None, :], axis=-1)
    return w, fix_column_phases(v)


def complete_zero_columns(u, sigma):
    """Fill zero-sigma columns of u (in place) with orthonormal vectors.

    Picks the standard basis vector with the largest residual against the
    already-valid columns (deterministic), then re-orthogonalizes once.
    Zero columns not yet filled contribute nothing to the projector, so
    ascending order is safe.
    """
    m = u.shape[0]
    for j in np.flatnonzero(sigma == 0.0):
        basis = np.eye(m, dtype=u.dtype)
        resid = basis - u @ (u.conj().T @ basis)
        norms = np.sqrt(np.sum(np.abs(resid) ** 2, axis=0))
        e = int(np.argmax(norms))
        vec = resid[:, e] / norms[e]
        vec = vec - u @ (u.conj().T @ vec)
        u[:, j] = vec / np.sqrt(np.sum(np.abs(vec) ** 2))
    return u


def finish_svd(b, v, ref_fro, swapped):
    """Assemble (u, sigma, v) from one-sided sweep output.

    b: (K, p, q) input copies with mutually orthogonal columns;
    v: (K, q, q) accumulated right rotations; ref_fro: (K,) input
    Frobenius norms; swapped: True when the sweeps ran on A^H.
    """
    sigma = np.sqrt(np.sum(np.abs(b) ** 2, axis=-2))
    sigma[sigma <= ZERO_SNAP_REL * ref_fro[:, None]] = 0.0
    order = np.argsort(-sigma, axis=-1, kind="stable")
    sigma = np.take_along_axis(sigma, order, axis=-1)
    b = np.take_along_axis(b, order[:, None, :], axis=-1)
    v = np.take_along_axis(v, order[:, None, :], axis=-1)
    safe = np.where(sigma > 0, sigma, 1.0)
    u = b / safe[:, None, :]
    for k in np.flatnonzero(np.any(sigma == 0.0, axis=-1)):
        complete_zero_columns(u[k], sigma[k])
    if swapped:
        u, v = v, u
    v, u = fix_column_phases(v, companion=u)
    return u, sigma, v


def givens_angle_count(rows, cols):
    """Number of phi angles (equal to the number of psi angles) for rows x cols."""
    p = min(cols, rows - 1)
    return p * (rows - 1) - (p * (p - 1)) // 2
