"""Scenario builders shared by the test modules."""
import dataclasses

from neurospike import lif
from neurospike.hybrid import HybridState


def scalar_scenario(x0=20.0, a=1.0, alpha=0.5, mu=0.5, delta=0.1, **solver):
    sc = lif.fig3_nominal()
    sc = dataclasses.replace(sc, plant=lif.PlantParams.scalar(a), neurons=lif.NeuronParams.symmetric(alpha, mu, delta),
                             q0=HybridState((x0,), 0.0, 0.0))
    return sc.with_solver(**solver) if solver else sc

#: (criterion, passed, detail) lines collected by the acceptance module
ACCEPTANCE_LINES = []


def acceptance(label, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok
