import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
from scipy import sparse

import gibbslab as gl
from gibbslab.kernels import BACKEND, _ref

try:
    from gibbslab.kernels import _fast
except ImportError:
    _fast = None

needs_fast = pytest.mark.skipif(_fast is None,
                                reason="compiled kernels not built")


def _random_inputs(seed, K=3, n_max=6, n_samples=40):
    rng = np.random.default_rng(seed)
    fb = gl.build_fock_basis(K, n_max)
    vs = rng.standard_normal((n_samples, K)) \
        + 1j * rng.standard_normal((n_samples, K))
    W = rng.uniform(0.0, 1.0, (K, K, K, K))
    W[rng.uniform(size=W.shape) < 0.3] = 0.0  # sparsity before symmetrizing
    W[0, 0, 0, 0] = 0.0                       # guarantee the skip path runs
    W = W + W.transpose(2, 3, 0, 1)           # hermitian
    W = W + W.transpose(1, 0, 3, 2)           # bosonic
    return fb, vs, W


@needs_fast
def test_occupation_products_backends_agree():
    fb, vs, _ = _random_inputs(0)
    a = _ref.occupation_products(vs, fb.occupations)
    b = _fast.occupation_products(vs, fb.occupations)
    assert np.allclose(a, b, rtol=1e-13, atol=1e-13)


@needs_fast
def test_two_body_backends_agree():
    for seed in range(4):
        fb, _, W = _random_inputs(seed)
        args = (fb.occupations, fb.table, fb.strides, W)
        Ma = sparse.coo_matrix(
            (lambda r, c, v: (v, (r, c)))(*_ref.two_body_coo(*args)),
            shape=(fb.dim, fb.dim)).toarray()
        Mb = sparse.coo_matrix(
            (lambda r, c, v: (v, (r, c)))(*_fast.two_body_coo(*args)),
            shape=(fb.dim, fb.dim)).toarray()
        assert np.abs(Ma - Mb).max() < 1e-12
        assert np.abs(Ma - Ma.T).max() < 1e-12


def test_selected_backend_is_reported():
    assert BACKEND in ("cython", "numpy", "numpy (forced)")


def test_reference_products_match_direct_loop():
    fb, vs, _ = _random_inputs(1, K=2, n_max=4, n_samples=5)
    out = _ref.occupation_products(vs, fb.occupations)
    for s in range(vs.shape[0]):
        for d, occ in enumerate(fb.occupations):
            direct = np.prod([vs[s, j] ** occ[j] for j in range(2)])
            assert abs(out[s, d] - direct) < 1e-12


def test_pure_python_env_forces_fallback():
    code = "import gibbslab.kernels as k; print(k.BACKEND)"
    env = dict(os.environ, GIBBSLAB_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env,
                         capture_output=True, text=True)
    assert out.stdout.strip() == "numpy (forced)"


def test_benchmark_script_runs():
    script = Path(__file__).resolve().parents[1] / "benchmarks" / "bench_kernels.py"
    out = subprocess.run([sys.executable, str(script), "--quick"],
                         capture_output=True, text=True)
    assert out.returncode == 0, out.stderr
    assert "occupation_products" in out.stdout
    assert "two_body_coo" in out.stdout
