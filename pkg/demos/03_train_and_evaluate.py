"""
Training an embedding and measuring N-way K-shot accuracy
=========================================================

Trains the triplet-mining loss on overlapping clusters, shows the loss curve
and stepped learning rate, then scores the net on several test configurations.
Writes loss_curve.png next to this script.
"""

from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from fewshot import (EpisodeConfig, EvalConfig, MiningConfig, SplitSpec, SyntheticSpec,
                     TrainConfig, evaluate, generate_synthetic, split, train)

# overlapping clusters: mean scale only 2x the noise, so episodes stay hard
ds = generate_synthetic(SyntheticSpec(num_classes=30, samples_per_class=40,
                                      feature_dim=12, class_mean_scale=2.0,
                                      noise_sigma=1.0, seed=11))
split_spec = SplitSpec(train_classes=tuple(range(1, 21)), val_classes=(21, 22, 23, 24, 25),
                       test_classes=(26, 27, 28, 29, 30))
train_labeled, _, val, test = split(ds, split_spec, seed=0)

cfg = TrainConfig(
    episodes=600,
    lr0=1e-3,
    lr_halving_period=200,          # three halvings over this short run
    seed=1,
    episode=EpisodeConfig(n_classes=5, n_support=5, n_query=5),
    mining=MiningConfig(n_pos=3, n_neg=5, margin=0.3),
)
net, log = train(train_labeled, None, cfg, val_ds=val)

losses = np.array([r["loss"] for r in log.records])
lrs = np.array([r["lr"] for r in log.records])
window = 25
smoothed = np.convolve(losses, np.ones(window) / window, mode="valid")
print(f"episode loss: first-{window} mean {losses[:window].mean():.3f}, "
      f"last-{window} mean {losses[-window:].mean():.3f}")
for rec in log.val_records:
    print(f"  val check @ episode {rec['episode']}: "
          f"accuracy {rec['val_mean_accuracy']:.3f}")

fig, (ax1, ax2) = plt.subplots(2, 1, sharex=True, figsize=(7, 5))
ax1.plot(losses, alpha=0.3, label="per episode")
ax1.plot(np.arange(window - 1, len(losses)), smoothed, label=f"{window}-episode mean")
ax1.set_ylabel("episode loss")
ax1.legend()
ax2.step(np.arange(len(lrs)), lrs, where="post")
ax2.set_ylabel("learning rate")
ax2.set_xlabel("episode")
fig.tight_layout()
out = Path(__file__).with_name("loss_curve.png")
fig.savefig(out, dpi=120)
print(f"wrote {out}")

# one trained net, scored against several few-shot shapes
for way, shot in ((5, 1), (5, 5), (5, 10)):
    report = evaluate(net, test, EvalConfig(way=way, shot=shot, episodes=300,
                                            n_pos=3, seed=100))
    print(f"{way}-way {shot}-shot: {report.mean_accuracy:.4f} +/- {report.ci95:.4f}")
