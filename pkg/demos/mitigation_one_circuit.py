"""
Four mitigation techniques on the classifier circuit
====================================================

Fix one input and one set of weights, add depolarizing noise and compare
raw, ZNE, PEC, DDD and LRE estimates with the noiseless value.
"""

import numpy as np

from qembench.batch import Executor
from qembench.mitigation import MitigationPlan
from qembench.model import init_params, model_bindings, model_template
from qembench.noise import NoiseModel

circuit = model_template()
params = init_params(3)
bindings = model_bindings(np.array([[0.4, -0.8, 1.1]]), params.quantum_weights.ravel()[None])

exact = Executor()(circuit, bindings)[0]
print("noiseless  ", np.round(exact, 4))

noise = NoiseModel.of("depolarizing", 0.01)
print("raw        ", np.round(Executor(noise)(circuit, bindings)[0], 4))

# analytic executor, so only PEC carries sampling error
for kind, settings in [("zne", None), ("pec", {"num_samples": 2000}), ("ddd", None), ("lre", None)]:
    ex = Executor(noise)
    res = MitigationPlan.from_settings(kind, settings).expectation(circuit, ex, bindings, np.random.default_rng(0))
    print(f"{kind:<11s}", np.round(res.values[0], 4), f"evaluations={ex.eval_count}", res.flags or "")

# PEC sampling cost grows like gamma**L with L noise locations
from qembench.mitigation import pec_representation

L = circuit.noise_locations()
for p in (0.001, 0.01, 0.05):
    print(f"p={p}: gamma^L = {pec_representation(p).gamma ** L:.3g}")
