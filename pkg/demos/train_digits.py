"""End-to-end training demo on synthetic digit-like images.

Generates small blob images, serializes them through the IDX binary
format and reads them back (the same path real MNIST files take),
then trains a logistic-layer classifier three ways: full-batch trust
region, full-batch line search, and the stochastic trust-region
driver with overlapping growing batches and momentum grafting.
"""

import tempfile
from pathlib import Path

import numpy as np

from sr1trust import (
    BatchSchedule,
    MomentumState,
    NetObjective,
    NetworkSpec,
    TRConfig,
    init_params,
    load_dataset,
    minimize,
    minimize_lbfgs,
    minimize_stochastic,
    to_idx_bytes,
)

rng = np.random.Generator(np.random.Philox(0))

# ---------------------------------------------------------------------
# synthesize blob "digits": one fixed two-blob template per class,
# samples get pixel noise
side, n_classes, n = 12, 4, 400
yy, xx = np.mgrid[0:side, 0:side].astype(float)
templates = []
for c in range(n_classes):
    t_rng = np.random.Generator(np.random.Philox(100 + c))
    img = np.zeros((side, side))
    for _ in range(2):
        cy, cx = t_rng.uniform(2, side - 2, size=2)
        img += np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / 8.0)
    templates.append(img / img.max())

labels = rng.integers(0, n_classes, size=n).astype(np.uint8)
imgs = np.stack([templates[c] for c in labels])
imgs = np.clip(imgs + rng.normal(0, 0.1, size=imgs.shape), 0, 1)
imgs = np.round(imgs * 255).astype(np.uint8)

# ---------------------------------------------------------------------
# round-trip through the IDX container, as real image files would go
workdir = Path(tempfile.mkdtemp())
(workdir / "imgs-idx3-ubyte").write_bytes(to_idx_bytes(imgs))
(workdir / "labels-idx1-ubyte").write_bytes(to_idx_bytes(labels))
ds = load_dataset(workdir / "imgs-idx3-ubyte", workdir / "labels-idx1-ubyte",
                  n_classes)
print(f"dataset: {len(ds)} images of {ds.x.shape[1]} pixels, "
      f"{n_classes} classes")

spec = NetworkSpec((side * side, 10, n_classes))
obj = NetObjective(spec, ds.x, ds.y_onehot)
w0 = init_params(spec, seed=1)
print(f"network {spec.layer_sizes}: {w0.size} parameters, "
      f"initial loss {obj.value(w0):.4f}\n")


def accuracy(w):
    from sr1trust import forward
    return float(np.mean(forward(spec, w, ds.x).argmax(axis=1) == ds.labels))


cfg = TRConfig(max_iter=80)

for name, run in (
    ("trust region  ", lambda: minimize(obj, w0, cfg)),
    ("line search   ", lambda: minimize_lbfgs(obj, w0, cfg)),
):
    res = run()
    print(f"{name} {res.iterations:3d} iters  "
          f"loss {obj.value(res.w):.4f}  accuracy {accuracy(res.w):.3f}")

# the stochastic driver sees 60-sample batches that grow when the full
# loss stalls; a third of each batch carries over so consecutive
# gradients share observations
sched = BatchSchedule(n_b=60, overlap=0.33, growth=1.5,
                      full_eval_period=10, rng_seed=3)
res = minimize_stochastic(obj, w0, cfg, sched=sched,
                          mom=MomentumState(mu=0.9))
print(f"stochastic     {res.iterations:3d} iters  "
      f"loss {obj.value(res.w):.4f}  accuracy {accuracy(res.w):.3f}")

batch_sizes = [rec.batch_size for rec in res.trace]
checkpoints = [(rec.iter, rec.full_loss) for rec in res.trace
               if rec.full_loss is not None]
print(f"\nbatch size went {batch_sizes[0]} -> {batch_sizes[-1]}")
print("full-loss checkpoints:",
      " ".join(f"{it}:{fl:.3f}" for it, fl in checkpoints[:6]), "...")
