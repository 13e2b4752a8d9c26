"""Compiled and pure kernel backends must agree on the same inputs.

Singular values are compared tightly; singular vectors entrywise only
where the value is well separated from zero (columns spanning a null
space are basis-ambiguous, so those are compared at subspace level).
"""

import numpy as np
import numpy.testing as npt
import pytest

import senselab._kernels as kernels
from conftest import max_principal_angle, random_complex, random_hermitian, random_orthonormal
from senselab._kernels import _fallback

_core = pytest.importorskip(
    "senselab._kernels._core", reason="compiled kernel extension not built"
)


def test_backend_constant_reports_selection():
    assert kernels.BACKEND in ("compiled", "pure")
    assert kernels.BACKEND == "compiled"


def test_eigh_agreement(rng):
    for n in (2, 3, 4, 8):
        a = random_hermitian(rng, n)
        scale = np.linalg.norm(a)
        wc, vc = _core.eigh(a)
        wp, vp = _fallback.eigh(a)
        npt.assert_allclose(wc, wp, atol=1e-11 * scale)
        for i in range(n):
            gap = np.min(np.abs(np.delete(wp, i) - wp[i])) if n > 1 else 1.0
            if gap > 1e-8 * scale:
                npt.assert_allclose(vc[:, i], vp[:, i], atol=1e-9)


def test_svd_batch_agreement(rng):
    a = random_complex(rng, 12, 4, 3)
    uc, sc, vc = _core.svd_batch(a)
    up, sp, vp = _fallback.svd_batch(a)
    scale = np.abs(sp).max()
    npt.assert_allclose(sc, sp, atol=1e-11 * scale)
    well_separated = sp > 1e-8 * scale
    npt.assert_allclose(uc[well_separated.nonzero()[0]], up[well_separated.nonzero()[0]], atol=1e-9)
    npt.assert_allclose(vc[well_separated.nonzero()[0]], vp[well_separated.nonzero()[0]], atol=1e-9)


def test_svd_rank_deficient_subspace_agreement(rng):
    # rank-1 input: the second right-singular column is any unit vector
    # orthogonal to the first, so compare spans rather than entries
    a_vec = random_complex(rng, 3)
    b_vec = random_complex(rng, 2)
    a = np.outer(a_vec, b_vec.conj())[None, :, :]
    uc, sc, vc = _core.svd_batch(a)
    up, sp, vp = _fallback.svd_batch(a)
    npt.assert_allclose(sc, sp, atol=1e-11 * sp.max())
    assert max_principal_angle(vc[0], vp[0]) <= 1e-8


def test_givens_decompose_agreement(rng):
    for rows, cols in ((2, 1), (3, 2), (4, 4), (6, 3)):
        v = random_orthonormal(rng, rows, cols)
        phic, psic = _core.givens_decompose(v)
        phip, psip = _fallback.givens_decompose(v)
        npt.assert_allclose(phic, phip, atol=1e-12)
        npt.assert_allclose(psic, psip, atol=1e-12)


def test_givens_reconstruct_agreement(rng):
    rows, cols = 4, 3
    count = kernels.givens_angle_count(rows, cols)
    phi = rng.uniform(0, 2 * np.pi, count)
    psi = rng.uniform(0, np.pi / 2, count)
    rc = _core.givens_reconstruct(phi, psi, rows, cols)
    rp = _fallback.givens_reconstruct(phi, psi, rows, cols)
    npt.assert_allclose(rc, rp, atol=1e-13)


def test_cross_backend_pipeline_roundtrip(rng):
    # decompose on one backend, reconstruct on the other
    v = random_orthonormal(rng, 3, 2)
    phi, psi = _core.givens_decompose(v)
    rebuilt = _fallback.givens_reconstruct(phi, psi, 3, 2)
    phase = np.diag(rebuilt.conj().T @ v)
    phase = phase / np.abs(phase)
    npt.assert_allclose(rebuilt * phase, v, atol=1e-9)


def test_env_selector(monkeypatch):
    import importlib
    import senselab._kernels as pkg

    monkeypatch.setenv("SENSELAB_KERNELS", "pure")
    reloaded = importlib.reload(pkg)
    try:
        assert reloaded.BACKEND == "pure"
        monkeypatch.setenv("SENSELAB_KERNELS", "compiled")
        reloaded = importlib.reload(pkg)
        assert reloaded.BACKEND == "compiled"
        monkeypatch.setenv("SENSELAB_KERNELS", "bogus")
        with pytest.raises(Exception):
            importlib.reload(pkg)
    finally:
        monkeypatch.delenv("SENSELAB_KERNELS", raising=False)
        importlib.reload(pkg)
