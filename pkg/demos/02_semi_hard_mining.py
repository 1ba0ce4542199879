"""
Semi-hard triplet selection on one episode
==========================================

Walks through the mining step on a hand-sized episode: the query-support
distance matrix, which positives/negatives each query averages, the hinge
losses, and the gradient each embedding receives.
"""

import numpy as np

from fewshot import MiningConfig, distance_matrix, episode_loss, loss_grad_embeddings, mine

rng = np.random.default_rng(0)

# 3 classes, 4 support and 2 queries each, embeddings in the plane so the
# geometry is easy to eyeball; clusters overlap enough to activate hinges
centers = np.array([[0.0, 0.0], [2.5, 0.0], [0.0, 2.5]])
support_labels = np.repeat([1, 2, 3], 4)
query_labels = np.repeat([1, 2, 3], 2)
emb_support = centers[support_labels - 1] + 1.1 * rng.standard_normal((12, 2))
emb_query = centers[query_labels - 1] + 1.1 * rng.standard_normal((6, 2))

dists = distance_matrix(emb_query, emb_support)
print("distance matrix (queries x support):")
print(np.round(dists, 2))

# per query: average the 2 farthest same-class and 3 nearest other-class columns
cfg = MiningConfig(n_pos=2, n_neg=3, margin=0.3)
results = mine(dists, query_labels, support_labels, cfg)

print(f"\n{'query':>5} {'class':>5} {'far positives':>16} {'near negatives':>16} "
      f"{'d_pos':>6} {'d_neg':>6} {'hinge':>6}")
for i, r in enumerate(results):
    print(f"{i:>5} {query_labels[i]:>5} {str(r.pos_columns.tolist()):>16} "
          f"{str(r.neg_columns.tolist()):>16} {r.pos_distance:>6.2f} "
          f"{r.neg_distance:>6.2f} {r.loss:>6.3f}")

print(f"\nepisode loss (sum of hinges): {episode_loss(results):.4f}")

grad_q, grad_s = loss_grad_embeddings(emb_query, emb_support, results, cfg)
print("\ngradient norms per query (0 = inactive hinge):")
print(np.round(np.linalg.norm(grad_q, axis=1), 3))

# the gradients are exact: a small descent step on the embeddings lowers the loss
for lr in (0.05, 0.2, 0.5):
    moved_q = emb_query - lr * grad_q
    moved_s = emb_support - lr * grad_s
    new_loss = episode_loss(mine(distance_matrix(moved_q, moved_s),
                                 query_labels, support_labels, cfg))
    print(f"descent step {lr:.2f}: loss {episode_loss(results):.4f} -> {new_loss:.4f}")
