"""Pure-Python kernel backend.

Reference implementation of the Jacobi eigendecomposition / SVD sweeps and
the Givens angle codec.  Semantically identical to the compiled backend in
`_core`; used when the extension is unavailable or when SENSELAB_KERNELS
forces it.  Inputs are complex128 arrays; no validation here.
"""

import numpy as np

from senselab.errors import ConvergenceError

from . import _common
from ._common import CONV_REL, FAIL_REL, PAIR_REL, SWEEP_CAP, ZERO_SNAP_REL


def _offdiag_norm(a, n):
    acc = 0.0
    for p in range(n - 1):
        for q in range(p + 1, n):
            z = a[p, q]
            acc += z.real * z.real + z.imag * z.imag
    return np.sqrt(2.0 * acc)


def _rotation(app, aqq, apq, mag):
    """Unitary 2x2 Jacobi parameters (c, s, e^{j arg apq}, t)."""
    ephi = apq / mag
    tau = (aqq - app) / (2.0 * mag)
    t = 1.0 / (abs(tau) + np.sqrt(1.0 + tau * tau))
    if tau < 0.0:
        t = -t
    c = 1.0 / np.sqrt(1.0 + t * t)
    return c, t * c, ephi, t


def _eigh_sweeps(a, v, n):
    """Cyclic Jacobi on Hermitian a (in place); v accumulates rotations."""
    ref = np.sqrt(np.sum(np.abs(a) ** 2))
    if ref == 0.0 or n == 1:
        return
    conv = CONV_REL * ref
    thresh = conv / (n * n)
    converged = False
    for _ in range(SWEEP_CAP):
        if _offdiag_norm(a, n) <= conv:
            converged = True
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                mag = abs(apq)
                if mag <= thresh:
                    continue
                app = a[p, p].real
                aqq = a[q, q].real
                c, s, ephi, t = _rotation(app, aqq, apq, mag)
                se = s * ephi.conjugate()
                cp = a[:, p].copy()
                cq = a[:, q].copy()
                a[:, p] = c * cp - se * cq
                a[:, q] = s * cp + c * ephi.conjugate() * cq
                rp = a[p, :].copy()
                rq = a[q, :].copy()
                a[p, :] = c * rp - s * ephi * rq
                a[q, :] = s * rp + c * ephi * rq
                a[p, q] = 0.0
                a[q, p] = 0.0
                a[p, p] = app - t * mag
                a[q, q] = aqq + t * mag
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - se * vq
                v[:, q] = s * vp + c * ephi.conjugate() * vq
    if not converged and _offdiag_norm(a, n) > FAIL_REL * ref:
        raise ConvergenceError(
            f"Jacobi eigendecomposition did not converge in {SWEEP_CAP} sweeps"
        )


def _svd_sweeps(b, v, q):
    """One-sided Jacobi: orthogonalize columns of b; v accumulates rotations.

    Converged means a full sweep applied no rotation, i.e. every column
    pair passed the relative test; a global off-diagonal threshold would
    leave the small-sigma columns of U visibly non-orthogonal.
    """
    ref2 = float(np.sum(np.abs(b) ** 2))
    if ref2 == 0.0 or q == 1:
        return
    # columns already at the zero-snap level come out as sigma = 0 and get
    # their left vectors rebuilt by completion; rotating against them never
    # passes the relative test (the threshold collapses with the column) and
    # only drains them further, so freeze them here
    zero2 = ZERO_SNAP_REL * ZERO_SNAP_REL * ref2
    converged = False
    for _ in range(SWEEP_CAP):
        rotated = False
        for i in range(q - 1):
            for j in range(i + 1, q):
                hii = float(np.sum(np.abs(b[:, i]) ** 2))
                hjj = float(np.sum(np.abs(b[:, j]) ** 2))
                if hii <= zero2 or hjj <= zero2:
                    continue
                hij = complex(np.vdot(b[:, i], b[:, j]))
                mag = abs(hij)
                if mag == 0.0 or mag <= PAIR_REL * np.sqrt(hii * hjj):
                    continue
                c, s, ephi, _ = _rotation(hii, hjj, hij, mag)
                se = s * ephi.conjugate()
                bi = b[:, i].copy()
                bj = b[:, j].copy()
                b[:, i] = c * bi - se * bj
                b[:, j] = s * bi + c * ephi.conjugate() * bj
                vi = v[:, i].copy()
                vj = v[:, j].copy()
                v[:, i] = c * vi - se * vj
                v[:, j] = s * vi + c * ephi.conjugate() * vj
                rotated = True
        if not rotated:
            converged = True
            break
    if not converged:
        off2 = 0.0
        for i in range(q - 1):
            for j in range(i + 1, q):
                off2 += abs(np.vdot(b[:, i], b[:, j])) ** 2
        if np.sqrt(2.0 * off2) > FAIL_REL * ref2:
            raise ConvergenceError(
                f"one-sided Jacobi SVD did not converge in {SWEEP_CAP} sweeps"
            )


def eigh_batch(a):
    """Eigendecompose a batch of Hermitian matrices.

    a: (K, n, n) complex128.  Returns (w, v): eigenvalues (K, n) ascending,
    eigenvectors (K, n, n) with orthonormal phase-fixed columns.
    """
    a = np.array(a, dtype=np.complex128, order="C", copy=True)
    a, factors = _common.prescale_batch(a)
    kk, n, _ = a.shape
    v = np.broadcast_to(np.eye(n, dtype=np.complex128), a.shape).copy()
    for k in range(kk):
        _eigh_sweeps(a[k], v[k], n)
    w = np.einsum("kii->ki", a).real.copy()
    w, v = _common.finish_eigh(w, v)
    if factors is not None:
        w *= factors[:, None]
    return w, v


def svd_batch(a):
    """Thin SVD of a batch of matrices.

    a: (K, m, n) complex128.  Returns (u, sigma, v) with shapes
    (K, m, r), (K, r), (K, n, r), r = min(m, n), sigma descending.
    """
    a = np.asarray(a, dtype=np.complex128)
    a, factors = _common.prescale_batch(a)
    kk, m, n = a.shape
    swapped = m < n
    b = np.array(a.conj().transpose(0, 2, 1) if swapped else a, order="C", copy=True)
    q = b.shape[2]
    v = np.broadcast_to(np.eye(q, dtype=np.complex128), (kk, q, q)).copy()
    ref = np.sqrt(np.sum(np.abs(a) ** 2, axis=(1, 2)))
    for k in range(kk):
        _svd_sweeps(b[k], v[k], q)
    u, sigma, v = _common.finish_svd(b, v, ref, swapped)
    if factors is not None:
        sigma *= factors[:, None]
    return u, sigma, v


def eigh(a):
    """Single-matrix form of eigh_batch."""
    w, v = eigh_batch(np.asarray(a)[None])
    return w[0], v[0]


def svd(a):
    """Single-matrix form of svd_batch."""
    u, s, v = svd_batch(np.asarray(a)[None])
    return u[0], s[0], v[0]


def givens_decompose_batch(v):
    """Decompose orthonormal-column matrices into Givens angle sequences.

    v: (K, r, c) complex128.  Returns (phi, psi), each (K, n_angles) with
    phi in [0, 2*pi) and psi in [0, pi/2].  Angles are laid out column-major
    over the elimination order: for each pivot column i, first the phi block
    (rows i..r-2), then the psi block (rows i+1..r-1).
    """
    w = np.array(v, dtype=np.complex128, order="C", copy=True)
    kk, r, c = w.shape
    na = _common.givens_angle_count(r, c)
    phi = np.empty((kk, na))
    psi = np.empty((kk, na))
    p = min(c, r - 1)
    two_pi = 2.0 * np.pi
    for k in range(kk):
        wk = w[k]
        # strip last-row phases so the recursion starts real non-negative
        for j in range(c):
            z = wk[r - 1, j]
            mag = abs(z)
            if mag > 0.0:
                wk[:, j] *= z.conjugate() / mag
        idx = 0
        for i in range(p):
            for l in range(i, r - 1):
                ph = np.arctan2(wk[l, i].imag, wk[l, i].real) % two_pi
                if ph >= two_pi:  # modulo of a tiny negative can round up to 2*pi
                    ph = 0.0
                phi[k, idx + l - i] = ph
                wk[l, i:] *= complex(np.cos(ph), -np.sin(ph))
            for l in range(i + 1, r):
                ps = np.arctan2(wk[l, i].real, wk[i, i].real)
                psi[k, idx + l - (i + 1)] = ps
                cs, sn = np.cos(ps), np.sin(ps)
                ri = wk[i, i:].copy()
                rl = wk[l, i:].copy()
                wk[i, i:] = cs * ri + sn * rl
                wk[l, i:] = -sn * ri + cs * rl
            idx += r - 1 - i
    return phi, psi


def givens_reconstruct_batch(phi, psi, rows, cols):
    """Rebuild matrices from Givens angle sequences (inverse of decompose).

    phi, psi: (K, n_angles).  Returns (K, rows, cols) complex128 with
    orthonormal columns for any angle values.
    """
    phi = np.asarray(phi, dtype=np.float64)
    psi = np.asarray(psi, dtype=np.float64)
    kk = phi.shape[0]
    out = np.broadcast_to(
        np.eye(rows, cols, dtype=np.complex128), (kk, rows, cols)
    ).copy()
    p = min(cols, rows - 1)
    offsets = np.concatenate(([0], np.cumsum([rows - 1 - i for i in range(p)])))
    for k in range(kk):
        wk = out[k]
        for i in reversed(range(p)):
            base = offsets[i]
            for l in reversed(range(i + 1, rows)):
                ps = psi[k, base + l - (i + 1)]
                cs, sn = np.cos(ps), np.sin(ps)
                ri = wk[i, :].copy()
                rl = wk[l, :].copy()
                wk[i, :] = cs * ri - sn * rl
                wk[l, :] = sn * ri + cs * rl
            for l in range(i, rows - 1):
                ph = phi[k, base + l - i]
                wk[l, :] *= complex(np.cos(ph), np.sin(ph))
    return out


def givens_decompose(v):
    """Single-matrix form of givens_decompose_batch."""
    phi, psi = givens_decompose_batch(np.asarray(v)[None])
    return phi[0], psi[0]


def givens_reconstruct(phi, psi, rows, cols):
    """Single-matrix form of givens_reconstruct_batch."""
    out = givens_reconstruct_batch(
        np.asarray(phi)[None], np.asarray(psi)[None], rows, cols
    )
    return out[0]
