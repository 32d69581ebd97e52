import os
import subprocess
import sys

import numpy as np
import pytest

from helpers import scalar_scenario
from neurospike import _backend, lif
from neurospike.hybrid import HybridState, SolverOptions

needs_compiled = pytest.mark.skipif(not _backend.HAVE_COMPILED, reason="compiled kernel not built")

SCENARIOS = {
    "nominal": lambda: lif.fig3_nominal(),
    "noisy": lambda: lif.fig3_noisy_asym(seed=5),
    "certified": lambda: lif.certified_scenario(),
    "jump-limit": lambda: lif.fig3_nominal(j_max=7),
    "stable-plant": lambda: scalar_scenario(x0=-3.0, a=-0.5, t_end=4.0),
    "double-integrator": lambda: lif.ClosedLoopScenario(
        lif.PlantParams([[0, 1], [-0.2, 0.1]], [0.3, 1], [1, 0.5]), lif.NeuronParams(0.4, 0.6, 0.3, 0.7, 0.1, 0.15),
        HybridState((1.0, -0.5)), SolverOptions(h=2e-3, t_end=6.0)),
}


@needs_compiled
@pytest.mark.parametrize("name", sorted(SCENARIOS))
def test_bit_identical(name):
    sc = SCENARIOS[name]()
    a = lif.simulate_scenario(sc, "compiled")
    b = lif.simulate_scenario(sc, "python")
    assert a.meta["backend"] == "compiled" and b.meta["backend"] == "python"
    assert a.termination == b.termination
    np.testing.assert_array_equal(a.t, b.t)
    np.testing.assert_array_equal(a.j, b.j)
    np.testing.assert_array_equal(a.q, b.q)
    assert a.jumps == b.jumps


def test_unknown_backend():
    with pytest.raises(ValueError):
        lif.simulate_scenario(lif.fig3_nominal(t_end=0.1), "gpu")


def test_env_forces_python():
    code = "from neurospike import _backend; print(_backend.DEFAULT_BACKEND)"
    env = dict(os.environ, NEUROSPIKE_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
