"""Finite-difference oracle shared by the gradient tests."""

import numpy as np

from gar import autodiff as ad


def numeric_grad(fn, x: np.ndarray, h: float = 1e-5, relative: bool = False) -> np.ndarray:
    """Central differences of scalar ``fn`` at ``x``.

    With ``relative`` the step for coordinate i is ``h * |x_i|``.
    """
    x = np.array(x, dtype=np.float64)
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.size):
        keep = flat[i]
        step = h * abs(keep) if relative else h
        flat[i] = keep + step
        up = fn(x.copy())
        flat[i] = keep - step
        down = fn(x.copy())
        flat[i] = keep
        gf[i] = (up - down) / (2 * step)
    return g


def autodiff_grad(build, x: np.ndarray) -> np.ndarray:
    """Gradient of ``build(node) -> scalar node`` with respect to ``x``."""
    v = ad.variable(np.array(x, dtype=np.float64))
    build(v).backward()
    return v.gradient


def assert_grad_close(analytic, numeric, rel=1e-5, abs_tol=1e-8):
    analytic = np.asarray(analytic)
    numeric = np.asarray(numeric)
    err = np.abs(analytic - numeric)
    scale = np.maximum(np.abs(analytic), np.abs(numeric))
    ok = (err <= abs_tol) | (err <= rel * scale)
    assert ok.all(), f"max abs err {err.max():.3g}; analytic {analytic.ravel()[:6]} numeric {numeric.ravel()[:6]}"
