"""
Five noise channels on one qubit
================================

Apply each channel to |+><+| over the benchmark noise levels and watch the
Bloch vector shrink.
"""

import numpy as np

from qembench.noise import CHANNEL_KINDS, make_channel

plus = np.full((2, 2), 0.5, dtype=complex)
levels = [0, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0]

# Bloch components of a one-qubit density matrix
def bloch(rho):
    return 2 * rho[0, 1].real, -2 * rho[0, 1].imag, (rho[0, 0] - rho[1, 1]).real

for kind in CHANNEL_KINDS:
    print(kind.value)
    for p in levels:
        x, y, z = bloch(make_channel(kind, p).apply(plus))
        print(f"  p={p:<5g} x={x:+.4f} y={y:+.4f} z={z:+.4f}")

# depolarizing at p = 3/4 sends every state to I/2
rng = np.random.default_rng(0)
a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
rho = a @ a.conj().T
rho /= np.trace(rho)
print("twirl:", np.round(make_channel("depolarizing", 0.75).apply(rho), 12))
