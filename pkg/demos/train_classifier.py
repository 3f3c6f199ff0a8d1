"""
Training the hybrid classifier on Iris
======================================

One noiseless run and one run under amplitude damping, both with exact
expectations. Takes about ten seconds.
"""

from qembench.data import load_iris, prepare
from qembench.model import TrainConfig, train
from qembench.noise import NoiseModel

split = prepare(load_iris(), seed=0)
print("train/validation sizes:", len(split.train_y), len(split.val_y))

for label, noise in [("noiseless", None), ("amplitude damping p=0.2", NoiseModel.of("amplitude_damping", 0.2))]:
    res = train(split, TrainConfig(noise=noise), seed=0)
    print(label)
    for m in res.metrics[::4] + [res.metrics[-1]]:
        print(f"  epoch {m.epoch:2d}  loss {m.train_loss:.3f}  train {m.train_accuracy:.3f}  val {m.val_accuracy:.3f}")
    print(f"  wall time {res.wall_time_s:.1f}s, circuit evaluations {res.eval_count}")
