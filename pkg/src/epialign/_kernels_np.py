"""Pure-numpy implementation of the per-pair epipolar kernels.

Semantics are shared with the compiled extension ``_kernels_cy``:

* mode 0 = algebraic residual |x'^T F x|, mode 1 = geometric (point-to-line,
  pixels). Correspondences whose epipolar-line normal falls below
  ``LINE_NORMAL_EPS`` in geometric mode are degenerate: their residual is NaN
  and they are excluded from the loss and weight sums.
* ``pair_accumulate`` returns the gradient of the weighted residual sum with
  respect to the (unit-Frobenius) fundamental matrix. The absolute value is
  non-smooth at zero; residuals below ``GRAD_DEADZONE`` contribute their value
  to the loss but a zero subgradient, so an exactly-consistent scene is an
  exact stationary point.
"""

import numpy as np

LINE_NORMAL_EPS = 1e-12
GRAD_DEADZONE = 1e-9

MODE_ALGEBRAIC = 0
MODE_GEOMETRIC = 1

IMPL = "numpy"


def _forms(F, xy_i, xy_j):
    """Bilinear forms s = x'^T F x and epipolar lines l = F x for all rows."""
    k = xy_i.shape[0]
    xi = np.empty((k, 3))
    xi[:, :2] = xy_i
    xi[:, 2] = 1.0
    lines = xi @ F.T                      # (k, 3), l = F @ x
    s = xy_j[:, 0] * lines[:, 0] + xy_j[:, 1] * lines[:, 1] + lines[:, 2]
    return xi, lines, s


def pair_residuals(F, xy_i, xy_j, mode):
    """Residuals of one pair; NaN marks degenerate geometric lines.

    Returns (e, n_degenerate) with e of shape (k,).
    """
    _, lines, s = _forms(F, xy_i, xy_j)
    if mode == MODE_ALGEBRAIC:
        return np.abs(s), 0
    n = np.hypot(lines[:, 0], lines[:, 1])
    bad = n < LINE_NORMAL_EPS
    e = np.empty_like(s)
    np.divide(np.abs(s), n, out=e, where=~bad)
    e[bad] = np.nan
    return e, int(bad.sum())


def pair_accumulate(F, xy_i, xy_j, w, mode):
    """Weighted residual sum and its gradient w.r.t. F for one pair.

    Returns (loss_sum, weight_sum, G, n_skipped) where
    loss_sum = sum_k w_k e_k over valid correspondences,
    weight_sum = sum_k w_k over the same set, and G (3,3) is
    d(loss_sum)/dF.
    """
    xi, lines, s = _forms(F, xy_i, xy_j)
    k = xy_i.shape[0]
    xj = np.empty((k, 3))
    xj[:, :2] = xy_j
    xj[:, 2] = 1.0

    if mode == MODE_ALGEBRAIC:
        valid = np.ones(k, dtype=bool)
        e = np.abs(s)
        n_skipped = 0
    else:
        n = np.hypot(lines[:, 0], lines[:, 1])
        valid = n >= LINE_NORMAL_EPS
        e = np.zeros(k)
        np.divide(np.abs(s), n, out=e, where=valid)
        n_skipped = int(k - valid.sum())

    wv = np.where(valid, w, 0.0)
    loss_sum = float(wv @ np.where(valid, e, 0.0))
    weight_sum = float(wv.sum())

    live = valid & (e >= GRAD_DEADZONE)
    if not live.any():
        return loss_sum, weight_sum, np.zeros((3, 3)), n_skipped

    sgn = np.sign(s[live])
    cw = w[live]
    xi_l = xi[live]
    xj_l = xj[live]
    if mode == MODE_ALGEBRAIC:
        # de/dF = sign(s) x' x^T
        G = (cw * sgn)[:, None, None] * (xj_l[:, :, None] * xi_l[:, None, :])
    else:
        n_l = np.hypot(lines[live, 0], lines[live, 1])
        # de/dF = sign(s)/n x' x^T - |s|/n^3 (l0, l1, 0)^T x^T
        m = np.zeros((int(live.sum()), 3))
        m[:, 0] = lines[live, 0]
        m[:, 1] = lines[live, 1]
        c1 = cw * sgn / n_l
        c2 = cw * np.abs(s[live]) / n_l**3
        G = c1[:, None, None] * (xj_l[:, :, None] * xi_l[:, None, :]) \
            - c2[:, None, None] * (m[:, :, None] * xi_l[:, None, :])
    return loss_sum, weight_sum, G.sum(axis=0), n_skipped
