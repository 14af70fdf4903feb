"""
The Q-network and a finite-difference check
============================================

Build a small network, run a forward pass and compare a few analytic
gradient entries against central differences.
"""
import numpy as np

from gridcover import NetworkArch, QNetwork

rng = np.random.default_rng(9)
arch = NetworkArch(size=6, conv_layers=((4, 3), (4, 3)), dense_layers=(32,))
net = QNetwork.initialize(arch, rng, dtype=np.float64)
print("parameters:", arch.n_params())
for name, shape in arch.param_shapes().items():
    print(f"  {name:9s} {shape}")

spatial = rng.random((2, 6, 6, 5))
budget = rng.random(2)
print("Q-values:\n", net.forward(spatial, budget))

actions = np.array([1, 4])
targets = np.array([0.5, -1.0])
loss, grads = net.loss_and_grads(spatial, budget, actions, targets)
print("loss", loss)

eps = 1e-3
for name in ("conv0.w", "dense0.b", "dense1.w"):
    p = net.params[name]
    idx = tuple(int(rng.integers(s)) for s in p.shape)
    old = p[idx]
    p[idx] = old + eps
    up = net.loss_and_grads(spatial, budget, actions, targets)[0]
    p[idx] = old - eps
    down = net.loss_and_grads(spatial, budget, actions, targets)[0]
    p[idx] = old
    print(f"{name}{idx}: analytic {grads[name][idx]:+.8f}  numeric {(up - down) / (2 * eps):+.8f}")
