"""The compiled and numpy kernels must agree on every code path."""

import numpy as np
import pytest

from epialign import kernels

IMPLS = kernels.implementations()


def _workload(rng, k=500):
    F = rng.normal(size=(3, 3))
    F /= np.linalg.norm(F)
    xi = rng.uniform(0, 640, size=(k, 2))
    xj = rng.uniform(0, 480, size=(k, 2))
    w = rng.uniform(0.1, 2.0, size=k)
    return F, xi, xj, w


@pytest.mark.parametrize("mode", [kernels.MODE_ALGEBRAIC, kernels.MODE_GEOMETRIC])
def test_residual_implementations_agree(mode):
    rng = np.random.default_rng(0)
    for _ in range(10):
        F, xi, xj, _ = _workload(rng)
        results = {name: impl.pair_residuals(F, xi, xj, mode)
                   for name, impl in IMPLS.items()}
        ref_e, ref_deg = results["numpy"]
        for name, (e, deg) in results.items():
            assert deg == ref_deg
            assert np.allclose(e, ref_e, rtol=1e-12, atol=1e-15, equal_nan=True), name


@pytest.mark.parametrize("mode", [kernels.MODE_ALGEBRAIC, kernels.MODE_GEOMETRIC])
def test_accumulate_implementations_agree(mode):
    rng = np.random.default_rng(1)
    for _ in range(10):
        F, xi, xj, w = _workload(rng)
        results = {name: impl.pair_accumulate(F, xi, xj, w, mode)
                   for name, impl in IMPLS.items()}
        l_ref, w_ref, G_ref, s_ref = results["numpy"]
        for name, (l, ws, G, sk) in results.items():
            assert sk == s_ref, name
            assert np.isclose(l, l_ref, rtol=1e-12), name
            assert np.isclose(ws, w_ref, rtol=1e-12), name
            assert np.allclose(G, G_ref, rtol=1e-9, atol=1e-12), name


@pytest.mark.parametrize("impl_name", sorted(IMPLS))
def test_degenerate_lines_are_skipped(impl_name):
    impl = IMPLS[impl_name]
    # third row only: every epipolar line has zero image-plane normal
    F = np.zeros((3, 3))
    F[2, 2] = 1.0
    xi = np.array([[1.0, 2.0], [3.0, 4.0]])
    xj = np.array([[5.0, 6.0], [7.0, 8.0]])
    e, deg = impl.pair_residuals(F, xi, xj, kernels.MODE_GEOMETRIC)
    assert deg == 2 and np.isnan(e).all()
    loss, wsum, G, skipped = impl.pair_accumulate(
        F, xi, xj, np.ones(2), kernels.MODE_GEOMETRIC)
    assert skipped == 2 and loss == 0.0 and wsum == 0.0
    assert np.all(G == 0.0)


@pytest.mark.parametrize("impl_name", sorted(IMPLS))
def test_deadzone_zeroes_gradient_but_keeps_loss(impl_name):
    impl = IMPLS[impl_name]
    rng = np.random.default_rng(2)
    F, xi, xj, w = _workload(rng, k=20)
    # construct residuals: place xj exactly on its epipolar line (e ~ 0)
    lines = np.c_[xi, np.ones(20)] @ F.T
    t = rng.uniform(0, 1, size=20)
    on_line = np.empty((20, 2))
    for k in range(20):
        a, b, c = lines[k]
        # a point on ax + by + c = 0
        if abs(b) > abs(a):
            x = t[k] * 100.0
            on_line[k] = [x, -(a * x + c) / b]
        else:
            y = t[k] * 100.0
            on_line[k] = [-(b * y + c) / a, y]
    loss, wsum, G, skipped = impl.pair_accumulate(
        F, xi, on_line, w, kernels.MODE_GEOMETRIC)
    assert skipped == 0
    assert loss < 1e-8
    assert wsum == pytest.approx(w.sum(), rel=1e-12)
    assert np.all(G == 0.0)


@pytest.mark.parametrize("impl_name", sorted(IMPLS))
@pytest.mark.parametrize("mode", [kernels.MODE_ALGEBRAIC, kernels.MODE_GEOMETRIC])
def test_gradient_matches_finite_differences(impl_name, mode):
    impl = IMPLS[impl_name]
    rng = np.random.default_rng(3)
    F, xi, xj, w = _workload(rng, k=40)
    _, _, G, _ = impl.pair_accumulate(F, xi, xj, w, mode)
    h = 1e-7
    fd = np.zeros((3, 3))
    for a in range(3):
        for b in range(3):
            Fp = F.copy()
            Fm = F.copy()
            Fp[a, b] += h
            Fm[a, b] -= h
            lp = impl.pair_accumulate(Fp, xi, xj, w, mode)[0]
            lm = impl.pair_accumulate(Fm, xi, xj, w, mode)[0]
            fd[a, b] = (lp - lm) / (2 * h)
    # FD cancellation noise scales with the largest entries
    tol = 1e-6 * np.abs(G).max()
    assert np.abs(G - fd).max() < tol
