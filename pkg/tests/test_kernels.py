import json
import os
import subprocess
import sys

import numpy as np
import pytest

from batchdist import _jit

PROBE = r"""
import json, sys
import numpy as np
from batchdist import _jit, kernels
from batchdist.integrator import ColumnModel, pack_state, simulate
from batchdist.reference import reference_scenario

sc = reference_scenario(horizon=120.0)
r = simulate(sc)
model = ColumnModel(sc.mixture, sc.plant, sc.controls, sc.integrator)
s = r.final_state
args = model._args(model.controls(0.0), 2.0, model.conserved(s))
z = pack_state(s)
json.dump(dict(
    use_numba=_jit.USE_NUMBA,
    residual=kernels.step_residual(z, *args).tolist(),
    jacobian=kernels.step_jacobian(z, *args, model.z_typ).tolist(),
    T=[rec.T.tolist() for rec in r.records],
    x=[rec.x.ravel().tolist() for rec in r.records],
), sys.stdout)
"""


def _probe(disable):
    env = dict(os.environ)
    env.pop("BATCHDIST_DISABLE_NUMBA", None)
    if disable:
        env["BATCHDIST_DISABLE_NUMBA"] = "1"
    proc = subprocess.run([sys.executable, "-c", PROBE], env=env, capture_output=True, text=True,
                          timeout=600)
    assert proc.returncode == 0, proc.stderr
    return json.loads(proc.stdout)


@pytest.fixture(scope="module")
def both_paths():
    return _probe(False), _probe(True)


def test_flag_selects_backend(both_paths):
    fast, slow = both_paths
    assert fast["use_numba"] is _jit.USE_NUMBA
    assert slow["use_numba"] is False


def test_fallback_kernels_agree(both_paths):
    fast, slow = both_paths
    # accumulation quotients cancel large energies, so compare on the residual's scale
    r1, r2 = np.array(fast["residual"]), np.array(slow["residual"])
    np.testing.assert_allclose(r1, r2, rtol=0, atol=1e-10 * np.abs(r2).max())
    J1, J2 = np.array(fast["jacobian"]), np.array(slow["jacobian"])
    np.testing.assert_allclose(J1, J2, rtol=1e-6, atol=1e-6 * np.abs(J2).max())


def test_fallback_trajectories_agree(both_paths):
    fast, slow = both_paths
    np.testing.assert_allclose(fast["T"], slow["T"], rtol=1e-10)
    np.testing.assert_allclose(fast["x"], slow["x"], rtol=1e-8, atol=1e-12)
