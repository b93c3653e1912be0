import numpy as np
import pytest

from ccsusy import kernels
from ccsusy.oracle import IntegrationConfig, extract_jost, integrate_regular

BACKENDS = kernels.backends()


def test_fallback_always_available():
    assert "python" in BACKENDS
    assert kernels.BACKEND in BACKENDS


@pytest.fixture(scope="module")
def sample_problem():
    rng = np.random.default_rng(3)
    n, steps, h = 3, 200, 0.01
    base = rng.normal(size=(n, n))
    sym = base + base.T
    r = np.linspace(0.0, 2 * steps * h / 2, 2 * steps + 1)
    g = np.ascontiguousarray(np.exp(-r)[:, None, None] * sym - np.diag([1.0, 4.0, 9.0]))
    return g, h, n


@pytest.mark.skipif("cython" not in BACKENDS, reason="compiled extension not built")
def test_rk4_backends_agree(sample_problem):
    g, h, n = sample_problem
    args = (g, h, np.zeros((n, n)), np.eye(n))
    y_py, dy_py = BACKENDS["python"][0](*args)
    y_cy, dy_cy = BACKENDS["cython"][0](*args)
    np.testing.assert_allclose(y_cy, y_py, rtol=0, atol=1e-12 * np.abs(y_py).max())
    np.testing.assert_allclose(dy_cy, dy_py, rtol=0, atol=1e-12 * np.abs(dy_py).max())


@pytest.mark.skipif("cython" not in BACKENDS, reason="compiled extension not built")
def test_numerov_backends_agree(sample_problem):
    g, h, n = sample_problem
    g = np.ascontiguousarray(g[::2])
    ainv = np.ascontiguousarray(np.linalg.inv(np.eye(n)[None] - h * h / 12 * g))
    y1 = h * np.eye(n)
    y_py = BACKENDS["python"][1](g, ainv, h, np.zeros((n, n)), y1)
    y_cy = BACKENDS["cython"][1](g, ainv, h, np.zeros((n, n)), y1)
    # summation order differs between the loops and BLAS; compare relative to the solution size
    np.testing.assert_allclose(y_cy, y_py, rtol=0, atol=1e-12 * np.abs(y_py).max())


@pytest.mark.parametrize("name", sorted(BACKENDS))
@pytest.mark.parametrize("method", ["rk4", "numerov"])
def test_end_to_end_backend(presets, name, method):
    p, res = presets["fig1"]
    cfg = IntegrationConfig.for_transform(res, 15.0, method=method, refine=2)
    tr = integrate_regular(res.potential, 15.0, p.channels, cfg, backend=BACKENDS[name])
    np.testing.assert_allclose(extract_jost(tr, p.channels), res.jost(15.0), atol=1e-6)


@pytest.mark.parametrize("name", sorted(BACKENDS))
def test_overflow_guard(name):
    n, steps = 1, 4000
    g = np.full((2 * steps + 1, n, n), 400.0)
    with pytest.raises(OverflowError):
        BACKENDS[name][0](g, 0.01, np.zeros((n, n)), np.eye(n))
