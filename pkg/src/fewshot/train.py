"""Episode-loop optimization: Adam with a stepped learning-rate schedule,
supervised warm-up, optional pseudo-label augmentation, checkpoint/resume."""

import json
import time
from dataclasses import dataclass, field, replace, asdict
from pathlib import Path

import numpy as np

from .data import Dataset
from .episodes import Episode, EpisodeConfig, sample_episode
from .errors import ConfigurationError, TrainingError
from .evaluate import EvalConfig, evaluate
from .mining import MiningConfig, distance_matrix, episode_loss, loss_grad_embeddings, mine
from .net import EmbeddingNet, Gradients
from .proto import proto_grad_to_support, proto_loss, prototypes
from .pseudo import augment_support, pseudo_label

LOSS_KINDS = ("triplet", "proto")


@dataclass(frozen=True)
class TrainConfig:
    episodes: int = 10_000
    lr0: float = 1e-3
    lr_halving_period: int = 1000
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    warmup_supervised_episodes: int = 50
    seed: int = 0
    episode: EpisodeConfig = EpisodeConfig(n_classes=5, n_support=20, n_query=15)
    mining: MiningConfig = MiningConfig()
    loss_kind: str = "triplet"
    layer_dims: tuple[int, ...] | None = None  # None -> (F, 64, 64, 128)
    clip_norm: float | None = None

    def validate(self):
        if self.episodes < 1 or self.lr0 <= 0 or self.lr_halving_period < 1:
            raise ConfigurationError("need episodes >= 1, lr0 > 0, lr_halving_period >= 1")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ConfigurationError("Adam betas must lie in [0, 1)")
        if self.warmup_supervised_episodes < 0:
            raise ConfigurationError("warmup_supervised_episodes must be >= 0")
        if self.loss_kind not in LOSS_KINDS:
            raise ConfigurationError(f"loss_kind must be one of {LOSS_KINDS}")
        self.episode.validate()
        self.mining.validate()


def lr_at(episode: int, cfg: TrainConfig) -> float:
    """Stepped decay: lr0 halved once per full period elapsed."""
    return cfg.lr0 * 0.5 ** (episode // cfg.lr_halving_period)


@dataclass
class AdamState:
    """First/second moment accumulators shaped like the parameters, plus step count."""

    m: Gradients
    v: Gradients
    t: int = 0

    @classmethod
    def zeros_like(cls, net: EmbeddingNet) -> "AdamState":
        zeros = lambda: Gradients([np.zeros_like(w) for w in net.weights],
                                  [np.zeros_like(b) for b in net.biases])
        return cls(zeros(), zeros())


def adam_step(net: EmbeddingNet, grads: Gradients, state: AdamState, lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
    """One bias-corrected Adam update, in place; returns (net, state)."""
    if not grads.all_finite():
        raise TrainingError("non-finite gradient passed to adam_step")
    state.t += 1
    bc1 = 1.0 - beta1 ** state.t
    bc2 = 1.0 - beta2 ** state.t
    params = list(zip(net.weights, grads.weights, state.m.weights, state.v.weights)) + \
        list(zip(net.biases, grads.biases, state.m.biases, state.v.biases))
    for theta, g, m, v in params:
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        theta -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
    return net, state


@dataclass
class TrainLog:
    """Per-episode records plus periodic validation metrics."""

    records: list[dict] = field(default_factory=list)
    val_records: list[dict] = field(default_factory=list)

    def deterministic_records(self) -> list[dict]:
        """Records without the wall-clock field, for reproducibility comparisons."""
        return [{k: v for k, v in r.items() if k != "wall_ms"} for r in self.records]

    def save(self, path):
        with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
            for rec in self.records:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")

    def save_val(self, path):
        with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
            for rec in self.val_records:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")


class Trainer:
    """Owns the net, Adam state and RNG stream for one training run.

    All randomness flows through one generator seeded from the config, so a
    run is bit-reproducible and can resume exactly from a checkpoint.
    """

    VAL_EVERY = 500
    VAL_EPISODES = 50

    def __init__(self, cfg: TrainConfig, ds_labeled: Dataset, ds_unlabeled: Dataset | None,
                 net: EmbeddingNet, adam: AdamState, rng: np.random.Generator,
                 episodes_done: int = 0, val_ds: Dataset | None = None):
        cfg.validate()
        self.cfg = cfg
        self.ds_labeled = ds_labeled
        self.ds_unlabeled = ds_unlabeled
        self.net = net
        self.adam = adam
        self.rng = rng
        self.episodes_done = episodes_done
        self.val_ds = val_ds
        self.log = TrainLog()

    @classmethod
    def new(cls, cfg: TrainConfig, ds_labeled: Dataset, ds_unlabeled: Dataset | None = None,
            val_ds: Dataset | None = None) -> "Trainer":
        cfg.validate()
        dims = cfg.layer_dims or (ds_labeled.feature_dim, 64, 64, 128)
        if dims[0] != ds_labeled.feature_dim:
            raise ConfigurationError(
                f"layer_dims[0]={dims[0]} but the data has {ds_labeled.feature_dim} features")
        net = EmbeddingNet.init(dims, cfg.seed)
        return cls(cfg, ds_labeled, ds_unlabeled, net, AdamState.zeros_like(net),
                   np.random.default_rng(cfg.seed), 0, val_ds)

    def run(self, max_episodes: int | None = None) -> TrainLog:
        """Run up to cfg.episodes (or fewer if max_episodes caps this call)."""
        target = self.cfg.episodes
        if max_episodes is not None:
            target = min(target, self.episodes_done + max_episodes)
        while self.episodes_done < target:
            self._step()
        return self.log

    def _step(self):
        i = self.episodes_done
        cfg = self.cfg
        started = time.perf_counter()

        semi = (cfg.episode.unlabeled_mode != "none" and cfg.episode.n_unlabeled > 0
                and i >= cfg.warmup_supervised_episodes)
        draw_cfg = cfg.episode if semi else replace(
            cfg.episode, n_unlabeled=0, unlabeled_mode="none")
        ep = sample_episode(self.ds_labeled, self.ds_unlabeled, draw_cfg, self.rng)

        loss, grads, n_support_eff = self._episode_gradients(ep)
        if not np.isfinite(loss):
            raise TrainingError(f"episode {i}: non-finite loss {loss}")
        if not grads.all_finite():
            raise TrainingError(f"episode {i}: non-finite gradients")
        if cfg.clip_norm is not None:
            norm = grads.global_norm()
            if norm > cfg.clip_norm:
                grads.scale(cfg.clip_norm / norm)

        lr = lr_at(i, cfg)
        adam_step(self.net, grads, self.adam, lr, cfg.beta1, cfg.beta2, cfg.eps)
        self.episodes_done = i + 1
        self.log.records.append({
            "episode": i,
            "loss": float(loss),
            "lr": float(lr),
            "n_support_effective": int(n_support_eff),
            "wall_ms": (time.perf_counter() - started) * 1e3,
        })
        if self.val_ds is not None and self.episodes_done % self.VAL_EVERY == 0:
            self._validate(i)

    def _episode_gradients(self, ep: Episode):
        cfg = self.cfg
        x_s = self.ds_labeled.features_by_id(ep.support_ids)
        x_q = self.ds_labeled.features_by_id(ep.query_ids)
        n_s = len(x_s)
        n_r = len(ep.unlabeled)
        parts = [x_s]
        if n_r:
            parts.append(self.ds_unlabeled.features_by_id(ep.unlabeled))
        parts.append(x_q)
        emb, trace = self.net.forward(np.vstack(parts))
        emb_s, emb_r, emb_q = emb[:n_s], emb[n_s:n_s + n_r], emb[n_s + n_r:]

        if n_r:
            assigned = pseudo_label(emb_r, emb_s, ep.support_labels, ep.unlabeled,
                                    cfg.mining.n_pos)
            listing = augment_support(ep.support, assigned)
            sup_labels = np.array([lab for _, lab in listing], dtype=np.int64)
            emb_sup = np.vstack([emb_s, emb_r])
        else:
            sup_labels = ep.support_labels
            emb_sup = emb_s

        if cfg.loss_kind == "triplet":
            results = mine(distance_matrix(emb_q, emb_sup), ep.query_labels, sup_labels,
                           cfg.mining)
            loss = episode_loss(results)
            grad_q, grad_sup = loss_grad_embeddings(emb_q, emb_sup, results, cfg.mining)
        else:
            protos = prototypes(emb_sup, sup_labels)
            loss, grad_q, grad_protos = proto_loss(emb_q, ep.query_labels, protos)
            grad_sup = proto_grad_to_support(grad_protos, sup_labels, protos)

        grads = self.net.backward(trace, np.vstack([grad_sup, grad_q]))
        return loss, grads, len(sup_labels)

    def _validate(self, episode_idx: int):
        cfg = self.cfg
        eval_cfg = EvalConfig(
            way=cfg.episode.n_classes, shot=1, n_queries_per_class=cfg.episode.n_query,
            episodes=self.VAL_EPISODES, n_pos=cfg.mining.n_pos,
            seed=cfg.seed * 1_000_003 + episode_idx)
        report = evaluate(self.net, self.val_ds, eval_cfg)
        self.log.val_records.append({
            "episode": episode_idx,
            "val_mean_accuracy": report.mean_accuracy,
            "val_ci95": report.ci95,
        })

    # --- checkpointing -------------------------------------------------

    def save_checkpoint(self, path):
        """Everything needed to continue exactly: params, Adam moments, RNG state."""
        payload = {
            "layer_dims": self.net.layer_dims,
            "params": self.net.params_flat().tolist(),
            "episode": self.episodes_done,
            "adam": {
                "m": _flatten(self.adam.m),
                "v": _flatten(self.adam.v),
                "t": self.adam.t,
            },
            "rng_state": self.rng.bit_generator.state,
            "config": config_to_dict(self.cfg),
        }
        Path(path).write_text(json.dumps(payload, sort_keys=True), encoding="utf-8")

    @classmethod
    def from_checkpoint(cls, path, ds_labeled: Dataset, ds_unlabeled: Dataset | None = None,
                        val_ds: Dataset | None = None) -> "Trainer":
        try:
            payload = json.loads(Path(path).read_text(encoding="utf-8"))
            cfg = config_from_dict(payload["config"])
            dims = payload["layer_dims"]
            net = EmbeddingNet(dims, [None] * (len(dims) - 1), [None] * (len(dims) - 1))
            net.set_params_flat(np.array(payload["params"], dtype=np.float64))
            adam = AdamState.zeros_like(net)
            _unflatten(payload["adam"]["m"], adam.m)
            _unflatten(payload["adam"]["v"], adam.v)
            adam.t = int(payload["adam"]["t"])
            bitgen = np.random.PCG64()
            bitgen.state = payload["rng_state"]
            rng = np.random.Generator(bitgen)
            episodes_done = int(payload["episode"])
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ConfigurationError(f"{path}: not a valid training checkpoint: {exc}") from None
        return cls(cfg, ds_labeled, ds_unlabeled, net, adam, rng, episodes_done, val_ds)


def _flatten(g: Gradients) -> list[float]:
    parts = []
    for w, b in zip(g.weights, g.biases):
        parts.append(w.ravel())
        parts.append(b)
    return np.concatenate(parts).tolist()


def _unflatten(flat: list[float], into: Gradients):
    arr = np.array(flat, dtype=np.float64)
    pos = 0
    for idx in range(len(into.weights)):
        w = into.weights[idx]
        into.weights[idx] = arr[pos:pos + w.size].reshape(w.shape).copy()
        pos += w.size
        b = into.biases[idx]
        into.biases[idx] = arr[pos:pos + b.size].copy()
        pos += b.size


def config_to_dict(cfg: TrainConfig) -> dict:
    d = asdict(cfg)
    d["layer_dims"] = list(cfg.layer_dims) if cfg.layer_dims else None
    return d


def config_from_dict(d: dict) -> TrainConfig:
    ep = EpisodeConfig(**d["episode"])
    mining = MiningConfig(**d["mining"])
    rest = {k: v for k, v in d.items() if k not in ("episode", "mining", "layer_dims")}
    dims = tuple(d["layer_dims"]) if d.get("layer_dims") else None
    return TrainConfig(episode=ep, mining=mining, layer_dims=dims, **rest)


def train(ds_labeled: Dataset, ds_unlabeled: Dataset | None, cfg: TrainConfig,
          val_ds: Dataset | None = None):
    """Train a fresh net for cfg.episodes; returns (net, log)."""
    trainer = Trainer.new(cfg, ds_labeled, ds_unlabeled, val_ds)
    log = trainer.run()
    return trainer.net, log
