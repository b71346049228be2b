"""Independent reference implementations used by the test and acceptance suites.

Everything here is written as plain scalar loops, straight off the target
definitions, with none of the vectorisation or stability tricks of the
package implementations. These oracles stay independent of the code paths
they check.
"""

import math

import numpy as np


def supcon_oracle(embeddings, labels, temperature: float) -> float:
    """Double-loop evaluation of the supervised contrastive loss.

    Mean over rows with at least one positive of
    -log[ (1/|P(i)|) * sum_{p in P(i)} exp(z_i . z_p / tau)
          / sum_{a != i} exp(z_i . z_a / tau) ].
    """
    z = np.asarray(embeddings, dtype=np.float64)
    y = list(labels)
    n = len(z)
    terms = []
    for i in range(n):
        positives = [p for p in range(n) if p != i and y[p] == y[i]]
        if not positives:
            continue
        others = [a for a in range(n) if a != i]
        denom = sum(
            math.exp(float(np.dot(z[i], z[a])) / temperature) for a in others
        )
        mean_ratio = (
            sum(
                math.exp(float(np.dot(z[i], z[p])) / temperature) / denom
                for p in positives
            )
            / len(positives)
        )
        terms.append(-math.log(mean_ratio))
    if not terms:
        raise ValueError("no row has a positive")
    return sum(terms) / len(terms)


def cross_entropy_oracle(logits, labels) -> float:
    """Scalar-loop mean negative log softmax probability of the true class."""
    logits = np.asarray(logits, dtype=np.float64)
    total = 0.0
    for row, label in zip(logits, labels):
        log_norm = math.log(sum(math.exp(v) for v in row))
        total += -(row[int(label)] - log_norm)
    return total / len(logits)


def knn_oracle(train_x, train_y, query, k: int, num_classes: int = 8) -> int:
    """Linear-scan nearest-neighbour vote for one query vector."""
    train_x = np.asarray(train_x, dtype=np.float64).reshape(len(train_x), -1)
    q = np.asarray(query, dtype=np.float64).reshape(-1)
    dists = [math.sqrt(float(np.sum((row - q) ** 2))) for row in train_x]
    order = sorted(range(len(dists)), key=lambda i: (dists[i], i))[:k]
    votes = [0] * num_classes
    for i in order:
        votes[int(train_y[i])] += 1
    top = max(votes)
    candidates = [c for c in range(num_classes) if votes[c] == top]
    if len(candidates) == 1:
        return candidates[0]
    best = None
    best_mean = math.inf
    for c in candidates:
        members = [dists[i] for i in order if int(train_y[i]) == c]
        mean = sum(members) / len(members)
        if mean < best_mean:
            best_mean = mean
            best = c
    return best


def mean_std_oracle(values) -> tuple[float, float]:
    """Two-pass sample mean and standard deviation (n-1 denominator)."""
    values = [float(v) for v in values]
    n = len(values)
    mean = sum(values) / n
    if n == 1:
        return mean, 0.0
    var = sum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(var)
