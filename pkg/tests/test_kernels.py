import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qvcz import _kernels_py, kernels

core = pytest.importorskip("qvcz._core")


@settings(max_examples=50, deadline=None)
@given(st.floats(0.0, 5.0), st.floats(0.0, 5.0), st.floats(0.0, 1.0), st.integers(1, 40))
def test_two_mode_backends_agree(a, b, rho, cutoff):
    c2 = rho * a * b
    ref = _kernels_py.two_mode_pnd(a, b, c2, cutoff)
    assert np.allclose(core.two_mode_pnd(a, b, c2, cutoff), ref, rtol=1e-12, atol=1e-300)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4), st.integers(1, 30))
def test_mixture_backends_agree(seed, branches, cutoff):
    rng = np.random.default_rng(seed)
    I1 = rng.exponential(1.0, size=(50, branches))
    I2 = rng.exponential(0.5, size=(50, branches))
    ref = _kernels_py.poisson_mixture_accumulate(I1, I2, cutoff)
    got = core.poisson_mixture_accumulate(I1, I2, cutoff)
    for g, r in zip(got, ref):
        assert np.allclose(g, r, rtol=1e-12, atol=1e-300)


def test_zero_intensity_limits():
    p = kernels.two_mode_pnd(0.0, 0.0, 0.0, 5)
    assert p[0, 0] == 1.0 and p.sum() == 1.0
    t = kernels.poisson_table(np.array([0.0, 1.0]), 3)
    assert np.array_equal(t[0], [1, 0, 0, 0])
    assert t[1, 1] == pytest.approx(np.exp(-1.0))


def test_env_forces_fallback():
    env = dict(os.environ, QVCZ_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from qvcz import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
    assert kernels.BACKEND in ("cython", "python")
