"""Command-line entry points: gen-data, train, eval, and config-driven run.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
Every command is reproducible from its flags and seed alone; a JSON config
file may supply any flag value, with explicit flags taking precedence.
"""

import argparse
import csv
import json
import sys
from pathlib import Path

from .data import (SyntheticSpec, generate_synthetic, load_csv, load_split_manifest,
                   random_class_split, save_csv, save_split_manifest, split)
from .episodes import EpisodeConfig
from .errors import FewshotError, TrainingError
from .evaluate import EvalConfig, evaluate
from .mining import MiningConfig
from .net import load_checkpoint
from .train import TrainConfig, Trainer, config_to_dict

EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

UNLABELED_MODE_FLAGS = {"none": "none", "weak": "weakly_labeled",
                        "complete": "completely_unlabeled"}


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad flags; the contract reserves 2 for data errors
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        sys.exit(EXIT_USAGE)


def _out_dir(path_text: str, create: bool = False) -> Path:
    out = Path(path_text)
    if create:
        out.mkdir(parents=True, exist_ok=True)
    elif not out.is_dir():
        raise FileNotFoundError(f"output directory does not exist: {out}")
    return out


def _apply_config_file(parser: argparse.ArgumentParser, argv: list[str]):
    """Let --config supply defaults; explicit flags still win on the reparse."""
    probe = argparse.ArgumentParser(add_help=False)
    probe.add_argument("--config")
    known, _ = probe.parse_known_args(argv)
    if not known.config:
        return
    values = json.loads(Path(known.config).read_text(encoding="utf-8"))
    valid = {a.dest for a in parser._actions}
    unknown = set(values) - valid
    if unknown:
        parser.error(f"unknown config keys: {sorted(unknown)}")
    parser.set_defaults(**values)


# ----------------------------------------------------------------- gen-data

def _add_gen_data(sub):
    p = sub.add_parser("gen-data", help="generate a synthetic clustered dataset",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--config", help="JSON file of flag values")
    p.add_argument("--classes", type=int, default=20)
    p.add_argument("--per-class", type=int, default=50)
    p.add_argument("--dim", type=int, default=32)
    p.add_argument("--sigma", type=float, default=1.0, help="within-class std")
    p.add_argument("--scale", type=float, default=5.0, help="class-mean scale")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--out", required=True, help="existing output directory")
    p.set_defaults(func=cmd_gen_data)
    return p


def cmd_gen_data(args) -> int:
    out = _out_dir(args.out)
    spec = SyntheticSpec(args.classes, args.per_class, args.dim,
                         args.scale, args.sigma, args.seed)
    ds = generate_synthetic(spec)
    save_csv(ds, out / "dataset.csv")
    manifest = {"synthetic": {
        "num_classes": spec.num_classes, "samples_per_class": spec.samples_per_class,
        "feature_dim": spec.feature_dim, "class_mean_scale": spec.class_mean_scale,
        "noise_sigma": spec.noise_sigma, "seed": spec.seed,
    }}
    (out / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"wrote {len(ds)} samples to {out / 'dataset.csv'}")
    return 0


# -------------------------------------------------------------------- train

def _add_train(sub):
    p = sub.add_parser("train", help="train an embedding net on episodes",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--config", help="JSON file of flag values")
    p.add_argument("--data", required=True, help="dataset CSV")
    p.add_argument("--manifest", help="reuse an existing split manifest")
    p.add_argument("--train-frac", type=float, default=0.7, help="fraction of classes")
    p.add_argument("--val-frac", type=float, default=0.1, help="fraction of classes")
    p.add_argument("--labeled-fraction", type=float, default=1.0)
    p.add_argument("--split-seed", type=int, default=None, help="defaults to --seed")
    p.add_argument("--nc", type=int, default=5, help="classes per episode")
    p.add_argument("--ns", type=int, default=20, help="support samples per class")
    p.add_argument("--nq", type=int, default=15, help="query samples per class")
    p.add_argument("--nr", type=int, default=0, help="unlabeled samples per class slot")
    p.add_argument("--unlabeled-mode", choices=sorted(UNLABELED_MODE_FLAGS), default="none")
    p.add_argument("--np", type=int, default=3, help="positives averaged")
    p.add_argument("--nn", type=int, default=5, help="negatives averaged")
    p.add_argument("--margin", type=float, default=0.3)
    p.add_argument("--episodes", type=int, default=10_000)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--lr-period", type=int, default=1000, help="episodes per halving")
    p.add_argument("--warmup", type=int, default=50, help="supervised episodes before pseudo-labeling")
    p.add_argument("--loss", choices=("triplet", "proto"), default="triplet")
    p.add_argument("--layer-dims", default="64,64,128",
                   help="comma-separated dims after the input layer")
    p.add_argument("--clip-norm", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--checkpoint-every", type=int, default=None)
    p.add_argument("--resume", help="continue from a training checkpoint")
    p.add_argument("-o", "--out", required=True, help="existing output directory")
    p.set_defaults(func=cmd_train)
    return p


def _train_config(args, feature_dim: int) -> TrainConfig:
    dims = (feature_dim,) + tuple(int(d) for d in str(args.layer_dims).split(","))
    return TrainConfig(
        episodes=args.episodes, lr0=args.lr, lr_halving_period=args.lr_period,
        warmup_supervised_episodes=args.warmup, seed=args.seed,
        episode=EpisodeConfig(n_classes=args.nc, n_support=args.ns, n_query=args.nq,
                              n_unlabeled=args.nr,
                              unlabeled_mode=UNLABELED_MODE_FLAGS[args.unlabeled_mode]),
        mining=MiningConfig(n_pos=args.np, n_neg=args.nn, margin=args.margin),
        loss_kind=args.loss, layer_dims=dims, clip_norm=args.clip_norm,
    )


def cmd_train(args) -> int:
    out = _out_dir(args.out)
    ds = load_csv(args.data)
    if args.manifest:
        split_spec, split_seed = load_split_manifest(args.manifest)
    else:
        split_seed = args.seed if args.split_seed is None else args.split_seed
        split_spec = random_class_split(ds, args.train_frac, args.val_frac,
                                        args.labeled_fraction, split_seed)
    train_l, train_u, val, _test = split(ds, split_spec, split_seed)
    save_split_manifest(out / "split_manifest.json", split_spec, split_seed)

    cfg = _train_config(args, ds.feature_dim)
    if args.resume:
        trainer = Trainer.from_checkpoint(args.resume, train_l, train_u, val_ds=val)
    else:
        trainer = Trainer.new(cfg, train_l, train_u, val_ds=val)
    (out / "config.json").write_text(
        json.dumps(config_to_dict(trainer.cfg), indent=2, sort_keys=True) + "\n",
        encoding="utf-8")

    if args.checkpoint_every:
        while trainer.episodes_done < trainer.cfg.episodes:
            trainer.run(max_episodes=args.checkpoint_every)
            trainer.save_checkpoint(out / f"checkpoint_ep{trainer.episodes_done}.json")
    else:
        trainer.run()
    trainer.save_checkpoint(out / "checkpoint.json")
    trainer.log.save(out / "train_log.jsonl")
    if trainer.log.val_records:
        trainer.log.save_val(out / "val_log.jsonl")
    final_loss = trainer.log.records[-1]["loss"] if trainer.log.records else float("nan")
    print(f"trained {trainer.episodes_done} episodes, final loss {final_loss:.6g}, "
          f"checkpoint at {out / 'checkpoint.json'}")
    return 0


# --------------------------------------------------------------------- eval

def _add_eval(sub):
    p = sub.add_parser("eval", help="N-way K-shot accuracy of a checkpoint",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--config", help="JSON file of flag values")
    p.add_argument("--data", required=True, help="dataset CSV")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", help="split manifest; restricts to its test classes")
    p.add_argument("--way", type=int, default=5)
    p.add_argument("--shot", type=int, default=1)
    p.add_argument("--episodes", type=int, default=1000)
    p.add_argument("--nq", type=int, default=15, help="queries per class")
    p.add_argument("--np", type=int, default=None,
                   help="neighbors for inference; defaults to the checkpoint's value")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1,
                   help="episode-level parallelism; affects wall time only")
    p.add_argument("-o", "--out", required=True, help="existing output directory")
    p.set_defaults(func=cmd_eval)
    return p


def cmd_eval(args) -> int:
    out = _out_dir(args.out)
    ds = load_csv(args.data)
    if args.manifest:
        spec, seed = load_split_manifest(args.manifest)
        _, _, _, test_ds = split(ds, spec, seed)
    else:
        test_ds = ds
    net, _episode, payload = load_checkpoint(args.checkpoint)
    n_pos = args.np
    if n_pos is None:
        n_pos = payload.get("config", {}).get("mining", {}).get("n_pos", 3)
    cfg = EvalConfig(way=args.way, shot=args.shot, n_queries_per_class=args.nq,
                     episodes=args.episodes, n_pos=n_pos, seed=args.seed)
    report = evaluate(net, test_ds, cfg, threads=args.threads)
    name = f"eval_{args.way}way_{args.shot}shot"
    report.to_json(out / f"{name}.json")
    report.accuracies_to_csv(out / f"{name}_accuracies.csv")
    print(f"{args.way}-way {args.shot}-shot: mean accuracy {report.mean_accuracy:.4f} "
          f"+/- {report.ci95:.4f} over {cfg.episodes} episodes")
    return 0


# ---------------------------------------------------------------------- run

def _add_run(sub):
    p = sub.add_parser("run", help="full experiment from a JSON config",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--config", required=True, help="experiment JSON")
    p.add_argument("-o", "--out", default=None, help="overrides output_dir from the config")
    p.add_argument("--seed", type=int, default=None, help="overrides seed from the config")
    p.set_defaults(func=cmd_run)
    return p


def _args_namespace(defaults: dict, overrides: dict) -> argparse.Namespace:
    merged = dict(defaults)
    merged.update({k: v for k, v in overrides.items() if v is not None})
    return argparse.Namespace(**merged)


TRAIN_DEFAULTS = dict(nc=5, ns=20, nq=15, nr=0, unlabeled_mode="none", np=3, nn=5,
                      margin=0.3, episodes=10_000, lr=1e-3, lr_period=1000, warmup=50,
                      loss="triplet", layer_dims="64,64,128", clip_norm=None, seed=0)


def cmd_run(args) -> int:
    exp = json.loads(Path(args.config).read_text(encoding="utf-8"))
    out = _out_dir(args.out or exp.get("output_dir", "."), create=True)
    seed = args.seed if args.seed is not None else int(exp.get("seed", 0))
    (out / "config.json").write_text(json.dumps(exp, indent=2, sort_keys=True) + "\n",
                                     encoding="utf-8")

    data_cfg = exp.get("data", {})
    if "synthetic" in data_cfg:
        ds = generate_synthetic(SyntheticSpec(**data_cfg["synthetic"]))
        save_csv(ds, out / "dataset.csv")
    elif "csv" in data_cfg:
        ds = load_csv(data_cfg["csv"])
    else:
        raise FewshotError("experiment config needs data.synthetic or data.csv")

    split_cfg = data_cfg.get("split", {})
    split_seed = int(split_cfg.get("seed", seed))
    labeled_fraction = float(split_cfg.get("labeled_fraction", 1.0))
    split_spec = random_class_split(ds, float(split_cfg.get("train_frac", 0.7)),
                                    float(split_cfg.get("val_frac", 0.1)),
                                    labeled_fraction, split_seed)
    train_l, train_u, val, test_ds = split(ds, split_spec, split_seed)
    save_split_manifest(out / "split_manifest.json", split_spec, split_seed)

    t_over = dict(exp.get("train", {}))
    t_over.setdefault("seed", seed)
    t_args = _args_namespace(TRAIN_DEFAULTS, t_over)
    cfg = _train_config(t_args, ds.feature_dim)
    trainer = Trainer.new(cfg, train_l, train_u, val_ds=val)
    trainer.run()
    trainer.save_checkpoint(out / "checkpoint.json")
    trainer.log.save(out / "train_log.jsonl")
    if trainer.log.val_records:
        trainer.log.save_val(out / "val_log.jsonl")

    rows = []
    for ev in exp.get("eval", [{"way": 5, "shot": 1}]):
        eval_cfg = EvalConfig(
            way=int(ev.get("way", 5)), shot=int(ev.get("shot", 1)),
            n_queries_per_class=int(ev.get("nq", 15)),
            episodes=int(ev.get("episodes", 1000)),
            n_pos=int(ev.get("np", cfg.mining.n_pos)),
            seed=int(ev.get("seed", seed)))
        report = evaluate(net=trainer.net, test_ds=test_ds, cfg=eval_cfg)
        name = f"eval_{eval_cfg.way}way_{eval_cfg.shot}shot"
        report.to_json(out / f"{name}.json")
        rows.append({
            "loss_kind": cfg.loss_kind,
            "labeled_fraction": labeled_fraction,
            "unlabeled_mode": cfg.episode.unlabeled_mode,
            "way": eval_cfg.way,
            "shot": eval_cfg.shot,
            "mean_acc": report.mean_accuracy,
            "ci95": report.ci95,
        })
        print(f"{eval_cfg.way}-way {eval_cfg.shot}-shot: "
              f"{report.mean_accuracy:.4f} +/- {report.ci95:.4f}")

    (out / "summary.json").write_text(json.dumps(rows, indent=2, sort_keys=True) + "\n",
                                      encoding="utf-8")
    with (out / "summary.csv").open("w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["loss_kind", "labeled_fraction",
                                                "unlabeled_mode", "way", "shot",
                                                "mean_acc", "ci95"], lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    print(f"summary written to {out / 'summary.csv'}")
    return 0


# --------------------------------------------------------------------- main

def build_parser() -> _Parser:
    parser = _Parser(prog="fewshot",
                     description="Few-shot classification by episodic triplet mining")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_gen_data(sub)
    _add_train(sub)
    _add_eval(sub)
    _add_run(sub)
    return parser


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    # locate the subcommand's parser so --config can seed its defaults;
    # run's config is the structured experiment file, not flag values
    try:
        if argv and argv[0] in ("gen-data", "train", "eval"):
            sub_actions = [a for a in parser._actions
                           if isinstance(a, argparse._SubParsersAction)]
            _apply_config_file(sub_actions[0].choices[argv[0]], argv[1:])
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except TrainingError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (FewshotError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
