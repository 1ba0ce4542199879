"""Acceptance suite: one test per shipping criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s` to see every line. The
directional comparisons (criteria 4 and 5) train real models, so the whole
module takes a couple of minutes.
"""

import time

import numpy as np

from fewshot.data import Dataset, SplitSpec, SyntheticSpec, generate_synthetic, split
from fewshot.episodes import EpisodeConfig
from fewshot.evaluate import EvalConfig, evaluate
from fewshot.mining import MiningConfig, distance_matrix, episode_loss, loss_grad_embeddings, mine
from fewshot.net import EmbeddingNet
from fewshot.train import TrainConfig, Trainer, lr_at, train

from oracles import fd_gradient, max_rel_err, mine_brute, tie_safe


def _report(num, name, ok, details):
    print(f"\n[criterion {num}] {name}: {'PASS' if ok else 'FAIL'} ({details})")
    assert ok, f"criterion {num} ({name}): {details}"


def _random_episode(rng, dim=8):
    n_classes = int(rng.integers(2, 7))
    n_support = int(rng.integers(1, 11))
    n_query = int(rng.integers(1, 9))
    emb_s = rng.normal(size=(n_classes * n_support, dim))
    emb_q = rng.normal(size=(n_classes * n_query, dim))
    s_labels = np.repeat(np.arange(1, n_classes + 1), n_support)
    q_labels = np.repeat(np.arange(1, n_classes + 1), n_query)
    return emb_q, emb_s, q_labels, s_labels


def test_criterion_1_mining_oracle_equivalence():
    """1000 random episodes agree with the full-sort brute force to 1e-12."""
    rng = np.random.default_rng(1001)
    started = time.perf_counter()
    worst = 0.0
    for _ in range(1000):
        emb_q, emb_s, q_labels, s_labels = _random_episode(rng)
        cfg = MiningConfig(n_pos=int(rng.integers(1, 5)), n_neg=int(rng.integers(1, 7)),
                           margin=float(rng.uniform(0.0, 1.0)))
        results = mine(distance_matrix(emb_q, emb_s), q_labels, s_labels, cfg)
        reference = mine_brute(emb_q, emb_s, q_labels, s_labels,
                               cfg.n_pos, cfg.n_neg, cfg.margin)
        for r, (d_p, d_n, loss) in zip(results, reference):
            worst = max(worst, abs(r.pos_distance - d_p), abs(r.neg_distance - d_n),
                        abs(r.loss - loss))
    elapsed = time.perf_counter() - started
    _report(1, "mining oracle equivalence", worst < 1e-12 and elapsed < 10.0,
            f"max abs deviation {worst:.2e} over 1000 episodes, {elapsed:.1f}s")


def test_criterion_2_gradient_checks():
    """Backward passes match central finite differences to 1e-4 relative.

    Perturbations must stay away from the piecewise boundaries (rectifier
    kinks, top-k ties, the hinge corner), so sampled cases without a safety
    margin there are redrawn.
    """
    started = time.perf_counter()

    # (a) embedder backward on 20 random small nets
    worst_net = 0.0
    checked, attempt = 0, 0
    while checked < 20:
        attempt += 1
        rng = np.random.default_rng(2000 + attempt)
        dims = [int(rng.integers(2, 9)) for _ in range(int(rng.integers(2, 5)))]
        net = EmbeddingNet.init(dims, seed=attempt)
        x = rng.normal(size=(3, dims[0]))
        g = rng.normal(size=(3, dims[-1]))
        _, trace = net.forward(x)
        if not _kink_safe(trace):
            continue
        checked += 1
        analytic = net.backward(trace, g)
        flat_analytic = np.concatenate([w.ravel() for w in analytic.weights]
                                       + list(analytic.biases))

        def loss_of(flat, net=net, x=x, g=g):
            probe = net.copy()
            probe.set_params_flat(_to_layer_order(net, flat))
            out, _ = probe.forward(x)
            return float(np.sum(g * out))

        flat0 = np.concatenate([w.ravel() for w in net.weights] + list(net.biases))
        numeric = fd_gradient(loss_of, flat0, h=1e-5)
        worst_net = max(worst_net, max_rel_err(flat_analytic, numeric))

    # (b) episode loss through mining + embedder on 10 tie-safe episodes
    worst_e2e = 0.0
    rng = np.random.default_rng(2100)
    cfg = MiningConfig(n_pos=2, n_neg=3, margin=1.0)
    checked = 0
    while checked < 10:
        net = EmbeddingNet.init([4, 6, 5], seed=int(rng.integers(1 << 30)))
        n_classes, n_support, n_query = 3, 2, 2
        x_s = rng.normal(size=(n_classes * n_support, 4))
        x_q = rng.normal(size=(n_classes * n_query, 4))
        s_labels = np.repeat(np.arange(1, n_classes + 1), n_support)
        q_labels = np.repeat(np.arange(1, n_classes + 1), n_query)

        emb_s, trace_s = net.forward(x_s)
        emb_q, trace_q = net.forward(x_q)
        if not (_kink_safe(trace_s) and _kink_safe(trace_q)):
            continue
        d = distance_matrix(emb_q, emb_s)
        results = mine(d, q_labels, s_labels, cfg)
        if not tie_safe(d, results, q_labels, s_labels, cfg.margin, gap=1e-3):
            continue
        if episode_loss(results) == 0.0:
            continue
        checked += 1

        grad_q, grad_s = loss_grad_embeddings(emb_q, emb_s, results, cfg)
        g_s = net.backward(trace_s, grad_s)
        g_q = net.backward(trace_q, grad_q)
        analytic = np.concatenate(
            [(ws + wq).ravel() for ws, wq in zip(g_s.weights, g_q.weights)]
            + [bs + bq for bs, bq in zip(g_s.biases, g_q.biases)])

        def param_loss(flat, net=net, x_s=x_s, x_q=x_q,
                       q_labels=q_labels, s_labels=s_labels):
            probe = net.copy()
            probe.set_params_flat(_to_layer_order(net, flat))
            e_s, _ = probe.forward(x_s)
            e_q, _ = probe.forward(x_q)
            return episode_loss(mine(distance_matrix(e_q, e_s),
                                     q_labels, s_labels, cfg))

        flat0 = np.concatenate([w.ravel() for w in net.weights] + list(net.biases))
        numeric = fd_gradient(param_loss, flat0, h=1e-6)
        # Output-bias coordinates translate every embedding equally, so the
        # true derivative is exactly 0 and the h=1e-6 quotient is pure
        # float-rounding noise. Along that direction no selection boundary
        # can be crossed, so a large step measures the same (zero) slope
        # without the noise.
        m = net.output_dim
        coarse = fd_gradient(param_loss, flat0, h=1e-2)
        numeric[-m:] = coarse[-m:]
        assert np.all(np.abs(analytic[-m:]) < 1e-12)  # zero by symmetry, exactly
        worst_e2e = max(worst_e2e, max_rel_err(analytic, numeric))

    elapsed = time.perf_counter() - started
    ok = worst_net < 1e-4 and worst_e2e < 1e-4 and elapsed < 60.0
    _report(2, "gradient checks", ok,
            f"embedder max rel err {worst_net:.2e} (20 nets), "
            f"end-to-end {worst_e2e:.2e} (10 episodes), {elapsed:.1f}s")


def _kink_safe(trace, margin=1e-2):
    """No hidden pre-activation close enough to 0 for a perturbation to flip it."""
    return all(float(np.min(np.abs(z))) > margin for z in trace.pre_activations[:-1])


def _to_layer_order(net, flat):
    """(all weights, all biases) flattening -> per-layer (W, b) flattening."""
    ws, pos = [], 0
    for w in net.weights:
        ws.append(flat[pos:pos + w.size])
        pos += w.size
    bs = []
    for b in net.biases:
        bs.append(flat[pos:pos + b.size])
        pos += b.size
    parts = []
    for w, b in zip(ws, bs):
        parts.append(w)
        parts.append(b)
    return np.concatenate(parts)


def _sanity_pools():
    ds = generate_synthetic(SyntheticSpec(num_classes=25, samples_per_class=50,
                                          feature_dim=32, class_mean_scale=10.0,
                                          noise_sigma=1.0, seed=300))
    spec = SplitSpec(tuple(range(1, 21)), (), tuple(range(21, 26)))
    labeled, _, _, test_ds = split(ds, spec, seed=0)
    return labeled, test_ds


def test_criterion_3_supervised_synthetic_sanity():
    """Scaled-down supervised training reaches 0.95+ on 5-way 1-shot."""
    started = time.perf_counter()
    labeled, test_ds = _sanity_pools()
    cfg = TrainConfig(episodes=500, seed=30, episode=EpisodeConfig(5, 5, 5),
                      mining=MiningConfig(3, 5, 0.3))
    net, _ = train(labeled, None, cfg)
    report = evaluate(net, test_ds, EvalConfig(way=5, shot=1, episodes=200,
                                               n_pos=3, seed=31))
    elapsed = time.perf_counter() - started
    ok = report.mean_accuracy >= 0.95 and elapsed < 120.0
    _report(3, "supervised synthetic sanity", ok,
            f"5-way 1-shot accuracy {report.mean_accuracy:.4f} over 200 episodes, "
            f"{elapsed:.1f}s")


def _overlap_pools(per_class, dataset_seed, labeled_fraction=1.0):
    ds = generate_synthetic(SyntheticSpec(num_classes=40, samples_per_class=per_class,
                                          feature_dim=8, class_mean_scale=2.0,
                                          noise_sigma=1.0, seed=dataset_seed))
    spec = SplitSpec(tuple(range(1, 31)), (), tuple(range(31, 41)),
                     labeled_fraction=labeled_fraction)
    labeled, unlabeled, _, test_ds = split(ds, spec, seed=0)
    return labeled, unlabeled, test_ds


def test_criterion_4_triplet_vs_prototypical_one_shot():
    """Directional: triplet mining at least matches the prototype baseline at 1-shot."""
    started = time.perf_counter()
    diffs = []
    for seed in range(5):
        labeled, _, test_ds = _overlap_pools(per_class=50, dataset_seed=100 + seed)
        accs = {}
        for kind in ("triplet", "proto"):
            cfg = TrainConfig(episodes=500, seed=seed, loss_kind=kind,
                              episode=EpisodeConfig(5, 5, 5),
                              mining=MiningConfig(3, 5, 0.3))
            net, _ = train(labeled, None, cfg)
            report = evaluate(net, test_ds,
                              EvalConfig(way=5, shot=1, episodes=400, n_pos=3,
                                         seed=1000 + seed))
            accs[kind] = report.mean_accuracy
        diffs.append(accs["triplet"] - accs["proto"])
    mean_diff = float(np.mean(diffs))
    wins = sum(d > 0 for d in diffs)
    elapsed = time.perf_counter() - started
    ok = mean_diff >= -0.005 and wins >= 3 and elapsed < 900.0
    _report(4, "triplet vs prototypical (1-shot, directional)", ok,
            f"mean diff {mean_diff:+.4f} (threshold -0.005), "
            f"triplet higher in {wins}/5 seeds, {elapsed:.0f}s")


def test_criterion_5_semi_supervised_gain():
    """Directional: pseudo-labeling beats the supervised 33%-labeled baseline."""
    started = time.perf_counter()
    wins = 0
    diffs = []
    for seed in range(5):
        labeled, unlabeled, test_ds = _overlap_pools(per_class=12,
                                                     dataset_seed=100 + seed,
                                                     labeled_fraction=0.33)
        accs = {}
        for name, ep_cfg, pool in (
                ("supervised", EpisodeConfig(5, 2, 2), None),
                ("semi", EpisodeConfig(5, 2, 2, n_unlabeled=3,
                                       unlabeled_mode="weakly_labeled"), unlabeled)):
            cfg = TrainConfig(episodes=800, seed=seed, warmup_supervised_episodes=50,
                              episode=ep_cfg, mining=MiningConfig(3, 5, 0.3))
            net, _ = train(labeled, pool, cfg)
            report = evaluate(net, test_ds,
                              EvalConfig(way=5, shot=1, n_queries_per_class=10,
                                         episodes=600, n_pos=3, seed=1000 + seed))
            accs[name] = report.mean_accuracy
        diffs.append(accs["semi"] - accs["supervised"])
        wins += accs["semi"] > accs["supervised"]
    elapsed = time.perf_counter() - started
    ok = wins >= 4 and elapsed < 1200.0
    _report(5, "semi-supervised gain (weakly labeled, directional)", ok,
            f"semi higher in {wins}/5 seeds, mean diff {np.mean(diffs):+.4f}, "
            f"{elapsed:.0f}s")


def test_criterion_6_degeneracy_identities():
    """Unused unlabeled config changes nothing; 1-shot mining clamps n_pos."""
    ds = generate_synthetic(SyntheticSpec(10, 16, 6, 3.0, 1.0, 2))
    spec = SplitSpec(tuple(range(1, 7)), (7,), (8, 9, 10), labeled_fraction=0.5)
    labeled, unlabeled, _, _ = split(ds, spec, seed=4)

    base = dict(episodes=60, seed=12, warmup_supervised_episodes=10,
                mining=MiningConfig(3, 5, 0.3), layer_dims=(6, 8, 4))
    sup_net, sup_log = train(labeled, None,
                             TrainConfig(episode=EpisodeConfig(3, 2, 2), **base))
    semi_net, semi_log = train(labeled, unlabeled,
                               TrainConfig(episode=EpisodeConfig(
                                   3, 2, 2, n_unlabeled=0,
                                   unlabeled_mode="weakly_labeled"), **base))
    logs_equal = (sup_log.deterministic_records() == semi_log.deterministic_records())
    params_equal = np.array_equal(sup_net.params_flat(), semi_net.params_flat())

    rng = np.random.default_rng(61)
    clamp_ok = True
    for _ in range(50):
        n_classes = int(rng.integers(2, 7))
        emb_s = rng.normal(size=(n_classes, 8))          # 1-shot support
        emb_q = rng.normal(size=(n_classes * 3, 8))
        s_labels = np.arange(1, n_classes + 1)
        q_labels = np.repeat(s_labels, 3)
        d = distance_matrix(emb_q, emb_s)
        res3 = mine(d, q_labels, s_labels, MiningConfig(3, 5, 0.3))
        res1 = mine(d, q_labels, s_labels, MiningConfig(1, 5, 0.3))
        for a, b in zip(res3, res1):
            clamp_ok &= (a.pos_distance == b.pos_distance and a.loss == b.loss
                         and a.pos_columns.tolist() == b.pos_columns.tolist())

    ok = logs_equal and params_equal and clamp_ok
    _report(6, "degeneracy identities", ok,
            f"supervised/unlabeled-0 logs identical (wall clock excluded): {logs_equal}, "
            f"params identical: {params_equal}, 1-shot n_pos clamp: {clamp_ok}")


def test_criterion_7_determinism_and_checkpoint(tmp_path):
    """Same seed gives byte-identical checkpoints; resume matches straight-through."""
    ds = generate_synthetic(SyntheticSpec(10, 16, 6, 3.0, 1.0, 2))
    spec = SplitSpec(tuple(range(1, 7)), (7,), (8, 9, 10), labeled_fraction=0.5)
    labeled, unlabeled, _, _ = split(ds, spec, seed=4)
    cfg = TrainConfig(episodes=60, seed=13, warmup_supervised_episodes=10,
                      episode=EpisodeConfig(3, 2, 2, n_unlabeled=1,
                                            unlabeled_mode="weakly_labeled"),
                      mining=MiningConfig(3, 5, 0.3), layer_dims=(6, 8, 4))

    for name in ("a", "b"):
        t = Trainer.new(cfg, labeled, unlabeled)
        t.run()
        t.save_checkpoint(tmp_path / f"{name}.json")
    bytes_equal = (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()

    straight = Trainer.new(cfg, labeled, unlabeled)
    straight.run()
    partial = Trainer.new(cfg, labeled, unlabeled)
    partial.run(max_episodes=25)
    partial.save_checkpoint(tmp_path / "mid.json")
    resumed = Trainer.from_checkpoint(tmp_path / "mid.json", labeled, unlabeled)
    resumed.run()
    resume_equal = (np.array_equal(straight.net.params_flat(), resumed.net.params_flat())
                    and straight.log.deterministic_records()[25:]
                    == resumed.log.deterministic_records())

    ok = bytes_equal and resume_equal
    _report(7, "determinism and checkpoint", ok,
            f"checkpoint bytes identical: {bytes_equal}, "
            f"resumed trajectory identical: {resume_equal}")


def test_criterion_8_lr_schedule():
    """Stepped halving hits the published values exactly."""
    cfg = TrainConfig()
    values = (lr_at(0, cfg), lr_at(1000, cfg), lr_at(2000, cfg))
    ok = values == (1e-3, 5e-4, 2.5e-4)
    _report(8, "learning-rate schedule", ok,
            f"episodes 0/1000/2000 -> {values[0]:.1e}/{values[1]:.1e}/{values[2]:.1e}")


def test_criterion_9_chance_level_control():
    """Label-shuffled 5-way evaluation lands at chance over 1000 episodes."""
    started = time.perf_counter()
    _, test_ds = _sanity_pools()
    shuffled = Dataset(test_ds.ids, test_ds.features,
                       np.random.default_rng(90).permutation(test_ds.labels))
    net = EmbeddingNet.init([32, 64, 64, 128], seed=91)
    report = evaluate(net, shuffled, EvalConfig(way=5, shot=1, episodes=1000,
                                                n_pos=3, seed=92))
    elapsed = time.perf_counter() - started
    ok = 0.17 <= report.mean_accuracy <= 0.23
    _report(9, "chance-level control", ok,
            f"shuffled-label 5-way accuracy {report.mean_accuracy:.4f} "
            f"over 1000 episodes, {elapsed:.0f}s")
