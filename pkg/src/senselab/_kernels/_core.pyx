# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernel backend.

Same contract as `_fallback` (the pure-Python reference); only the inner
sweep loops differ.  Post-processing is shared via `_common`.
"""

from libc.math cimport atan2, cos, fabs, sin, sqrt

import numpy as np

from senselab.errors import ConvergenceError

from . import _common

cdef int SWEEP_CAP = _common.SWEEP_CAP
cdef double CONV_REL = _common.CONV_REL
cdef double FAIL_REL = _common.FAIL_REL
cdef double PAIR_REL = _common.PAIR_REL
cdef double ZERO_SNAP_REL = _common.ZERO_SNAP_REL
cdef double TWO_PI = 6.283185307179586476925287


cdef inline double _abs2(double complex z) noexcept nogil:
    return z.real * z.real + z.imag * z.imag


cdef double _fro2(double complex[:, ::1] a, Py_ssize_t rows, Py_ssize_t cols) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double acc = 0.0
    for i in range(rows):
        for j in range(cols):
            acc += _abs2(a[i, j])
    return acc


cdef double _offdiag(double complex[:, ::1] a, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t p, q
    cdef double acc = 0.0
    for p in range(n - 1):
        for q in range(p + 1, n):
            acc += _abs2(a[p, q])
    return sqrt(2.0 * acc)


cdef int _eigh_sweeps(double complex[:, ::1] a, double complex[:, ::1] v,
                      Py_ssize_t n) except -1:
    cdef double ref = sqrt(_fro2(a, n, n))
    if ref == 0.0 or n == 1:
        return 0
    cdef double conv = CONV_REL * ref
    cdef double thresh = conv / (n * n)
    cdef bint converged = False
    cdef Py_ssize_t sweep, p, q, i
    cdef double complex apq, ephi, se, ce, xp, xq
    cdef double mag, app, aqq, tau, t, c, s
    for sweep in range(SWEEP_CAP):
        if _offdiag(a, n) <= conv:
            converged = True
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                mag = sqrt(_abs2(apq))
                if mag <= thresh:
                    continue
                app = a[p, p].real
                aqq = a[q, q].real
                ephi = apq / mag
                tau = (aqq - app) / (2.0 * mag)
                t = 1.0 / (fabs(tau) + sqrt(1.0 + tau * tau))
                if tau < 0.0:
                    t = -t
                c = 1.0 / sqrt(1.0 + t * t)
                s = t * c
                se = s * ephi.conjugate()
                ce = c * ephi.conjugate()
                for i in range(n):
                    xp = a[i, p]
                    xq = a[i, q]
                    a[i, p] = c * xp - se * xq
                    a[i, q] = s * xp + ce * xq
                for i in range(n):
                    xp = a[p, i]
                    xq = a[q, i]
                    a[p, i] = c * xp - s * ephi * xq
                    a[q, i] = s * xp + c * ephi * xq
                a[p, q] = 0.0
                a[q, p] = 0.0
                a[p, p] = app - t * mag
                a[q, q] = aqq + t * mag
                for i in range(n):
                    xp = v[i, p]
                    xq = v[i, q]
                    v[i, p] = c * xp - se * xq
                    v[i, q] = s * xp + ce * xq
    if not converged and _offdiag(a, n) > FAIL_REL * ref:
        raise ConvergenceError(
            f"Jacobi eigendecomposition did not converge in {SWEEP_CAP} sweeps"
        )
    return 0


cdef int _svd_sweeps(double complex[:, ::1] b, double complex[:, ::1] v,
                     Py_ssize_t rows, Py_ssize_t q) except -1:
    # converged means a full sweep applied no rotation (every column pair
    # passed the relative test); a global off-diagonal threshold would
    # leave the small-sigma columns of U visibly non-orthogonal
    cdef double ref2 = _fro2(b, rows, q)
    if ref2 == 0.0 or q == 1:
        return 0
    # columns already at the zero-snap level come out as sigma = 0 and get
    # their left vectors rebuilt by completion; rotating against them never
    # passes the relative test (the threshold collapses with the column) and
    # only drains them further, so freeze them here
    cdef double zero2 = ZERO_SNAP_REL * ZERO_SNAP_REL * ref2
    cdef bint converged = False
    cdef bint rotated
    cdef Py_ssize_t sweep, i, j, k
    cdef double complex hij, ephi, se, ce, xi, xj
    cdef double hii, hjj, mag, off2, tau, t, c, s
    for sweep in range(SWEEP_CAP):
        rotated = False
        for i in range(q - 1):
            for j in range(i + 1, q):
                hii = 0.0
                hjj = 0.0
                hij = 0.0
                for k in range(rows):
                    xi = b[k, i]
                    xj = b[k, j]
                    hii += _abs2(xi)
                    hjj += _abs2(xj)
                    hij += xi.conjugate() * xj
                if hii <= zero2 or hjj <= zero2:
                    continue
                mag = sqrt(_abs2(hij))
                if mag == 0.0 or mag <= PAIR_REL * sqrt(hii * hjj):
                    continue
                ephi = hij / mag
                tau = (hjj - hii) / (2.0 * mag)
                t = 1.0 / (fabs(tau) + sqrt(1.0 + tau * tau))
                if tau < 0.0:
                    t = -t
                c = 1.0 / sqrt(1.0 + t * t)
                s = t * c
                se = s * ephi.conjugate()
                ce = c * ephi.conjugate()
                for k in range(rows):
                    xi = b[k, i]
                    xj = b[k, j]
                    b[k, i] = c * xi - se * xj
                    b[k, j] = s * xi + ce * xj
                for k in range(q):
                    xi = v[k, i]
                    xj = v[k, j]
                    v[k, i] = c * xi - se * xj
                    v[k, j] = s * xi + ce * xj
                rotated = True
        if not rotated:
            converged = True
            break
    if not converged:
        off2 = 0.0
        for i in range(q - 1):
            for j in range(i + 1, q):
                hij = 0.0
                for k in range(rows):
                    hij += b[k, i].conjugate() * b[k, j]
                off2 += _abs2(hij)
        if sqrt(2.0 * off2) > FAIL_REL * ref2:
            raise ConvergenceError(
                f"one-sided Jacobi SVD did not converge in {SWEEP_CAP} sweeps"
            )
    return 0


cdef void _givens_decompose_one(double complex[:, ::1] w, double[:] phi,
                                double[:] psi, Py_ssize_t r, Py_ssize_t c) noexcept nogil:
    cdef Py_ssize_t p = c if c < r - 1 else r - 1
    cdef Py_ssize_t i, j, l, idx
    cdef double complex z, sc, ri, rl
    cdef double mag, ph, ps, cs, sn
    for j in range(c):
        z = w[r - 1, j]
        mag = sqrt(_abs2(z))
        if mag > 0.0:
            sc = z.conjugate() / mag
            for i in range(r):
                w[i, j] = w[i, j] * sc
    idx = 0
    for i in range(p):
        for l in range(i, r - 1):
            z = w[l, i]
            ph = atan2(z.imag, z.real)
            if ph < 0.0:
                ph += TWO_PI
            if ph >= TWO_PI:  # tiny negatives can round up to 2*pi
                ph = 0.0
            phi[idx + l - i] = ph
            sc = cos(ph) - 1j * sin(ph)
            for j in range(i, c):
                w[l, j] = w[l, j] * sc
        for l in range(i + 1, r):
            ps = atan2(w[l, i].real, w[i, i].real)
            psi[idx + l - (i + 1)] = ps
            cs = cos(ps)
            sn = sin(ps)
            for j in range(i, c):
                ri = w[i, j]
                rl = w[l, j]
                w[i, j] = cs * ri + sn * rl
                w[l, j] = -sn * ri + cs * rl
        idx += r - 1 - i


cdef void _givens_reconstruct_one(double[:] phi, double[:] psi,
                                  double complex[:, ::1] w,
                                  Py_ssize_t r, Py_ssize_t c) noexcept nogil:
    cdef Py_ssize_t p = c if c < r - 1 else r - 1
    cdef Py_ssize_t i, j, l, base
    cdef double complex ri, rl, sc
    cdef double ps, ph, cs, sn
    for i in range(p - 1, -1, -1):
        base = i * (r - 1) - (i * (i - 1)) // 2
        for l in range(r - 1, i, -1):
            ps = psi[base + l - (i + 1)]
            cs = cos(ps)
            sn = sin(ps)
            for j in range(c):
                ri = w[i, j]
                rl = w[l, j]
                w[i, j] = cs * ri - sn * rl
                w[l, j] = sn * ri + cs * rl
        for l in range(i, r - 1):
            ph = phi[base + l - i]
            sc = cos(ph) + 1j * sin(ph)
            for j in range(c):
                w[l, j] = w[l, j] * sc


def eigh_batch(a):
    """Eigendecompose a batch of Hermitian matrices; see _fallback.eigh_batch."""
    a = np.array(a, dtype=np.complex128, order="C", copy=True)
    a, factors = _common.prescale_batch(a)
    cdef Py_ssize_t kk = a.shape[0]
    cdef Py_ssize_t n = a.shape[1]
    v = np.broadcast_to(np.eye(n, dtype=np.complex128), a.shape).copy()
    cdef double complex[:, :, ::1] av = a
    cdef double complex[:, :, ::1] vv = v
    cdef Py_ssize_t k
    for k in range(kk):
        _eigh_sweeps(av[k], vv[k], n)
    w = np.einsum("kii->ki", a).real.copy()
    w, vecs = _common.finish_eigh(w, v)
    if factors is not None:
        w *= factors[:, None]
    return w, vecs


def svd_batch(a):
    """Thin SVD of a batch of matrices; see _fallback.svd_batch."""
    a = np.asarray(a, dtype=np.complex128)
    a, factors = _common.prescale_batch(a)
    cdef Py_ssize_t kk = a.shape[0]
    cdef Py_ssize_t m = a.shape[1]
    cdef Py_ssize_t n = a.shape[2]
    cdef bint swapped = m < n
    b = np.array(a.conj().transpose(0, 2, 1) if swapped else a, order="C", copy=True)
    cdef Py_ssize_t rows = b.shape[1]
    cdef Py_ssize_t q = b.shape[2]
    v = np.broadcast_to(np.eye(q, dtype=np.complex128), (kk, q, q)).copy()
    ref = np.sqrt(np.sum(np.abs(a) ** 2, axis=(1, 2)))
    cdef double complex[:, :, ::1] bv = b
    cdef double complex[:, :, ::1] vv = v
    cdef Py_ssize_t k
    for k in range(kk):
        _svd_sweeps(bv[k], vv[k], rows, q)
    u, sigma, vr = _common.finish_svd(b, v, ref, swapped)
    if factors is not None:
        sigma *= factors[:, None]
    return u, sigma, vr


def eigh(a):
    """Single-matrix form of eigh_batch."""
    w, v = eigh_batch(np.asarray(a)[None])
    return w[0], v[0]


def svd(a):
    """Single-matrix form of svd_batch."""
    u, s, v = svd_batch(np.asarray(a)[None])
    return u[0], s[0], v[0]


def givens_decompose_batch(v):
    """Givens angle decomposition; see _fallback.givens_decompose_batch."""
    w = np.array(v, dtype=np.complex128, order="C", copy=True)
    cdef Py_ssize_t kk = w.shape[0]
    cdef Py_ssize_t r = w.shape[1]
    cdef Py_ssize_t c = w.shape[2]
    na = _common.givens_angle_count(r, c)
    phi = np.empty((kk, na))
    psi = np.empty((kk, na))
    cdef double complex[:, :, ::1] wv = w
    cdef double[:, ::1] phv = phi
    cdef double[:, ::1] psv = psi
    cdef Py_ssize_t k
    for k in range(kk):
        _givens_decompose_one(wv[k], phv[k], psv[k], r, c)
    return phi, psi


def givens_reconstruct_batch(phi, psi, rows, cols):
    """Inverse of givens_decompose_batch; see _fallback for the contract."""
    phi = np.array(phi, dtype=np.float64, order="C", copy=True)
    psi = np.array(psi, dtype=np.float64, order="C", copy=True)
    cdef Py_ssize_t kk = phi.shape[0]
    cdef Py_ssize_t r = rows
    cdef Py_ssize_t c = cols
    out = np.broadcast_to(np.eye(r, c, dtype=np.complex128), (kk, r, c)).copy()
    cdef double complex[:, :, ::1] ov = out
    cdef double[:, ::1] phv = phi
    cdef double[:, ::1] psv = psi
    cdef Py_ssize_t k
    for k in range(kk):
        _givens_reconstruct_one(phv[k], psv[k], ov[k], r, c)
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
