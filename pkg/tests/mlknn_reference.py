"""Independent brute-force evaluation of the ML-KNN counting formulas.

Deliberately naive: plain Python loops, no shared code with the package
implementation. Used as the oracle in equivalence tests.
"""
import math


def cosine_distance(a, b):
    dot = sum(x * y for x, y in zip(a, b))
    na = math.sqrt(sum(x * x for x in a))
    nb = math.sqrt(sum(y * y for y in b))
    if na == 0.0 or nb == 0.0:
        return 1.0
    return 1.0 - dot / (na * nb)


def k_nearest(vectors, query, k):
    scored = []
    for idx, vec in enumerate(vectors):
        scored.append((cosine_distance(query, vec), idx))
    scored.sort(key=lambda t: (t[0], t[1]))
    return [idx for _, idx in scored[:k]]


def brute_force_mlknn(train_x, train_labels, query, k, smooth, num_labels):
    """Predict a label set for the query following the published counting
    scheme: smoothed priors and neighbour-count posteriors, label predicted
    iff the presence hypothesis strictly wins."""
    n = len(train_x)
    prior1 = {}
    prior0 = {}
    for lab in range(num_labels):
        count = sum(1 for labels in train_labels if lab in labels)
        prior1[lab] = (smooth + count) / (2 * smooth + n)
        prior0[lab] = 1.0 - prior1[lab]

    # delta counts over the training set itself (an example is allowed to
    # appear among its own neighbours, same search as at query time)
    c1 = {lab: [0] * (k + 1) for lab in range(num_labels)}
    c0 = {lab: [0] * (k + 1) for lab in range(num_labels)}
    for i in range(n):
        neigh = k_nearest(train_x, train_x[i], k)
        for lab in range(num_labels):
            delta = sum(1 for j in neigh if lab in train_labels[j])
            if lab in train_labels[i]:
                c1[lab][delta] += 1
            else:
                c0[lab][delta] += 1

    def cond(table, lab, delta):
        return (smooth + table[lab][delta]) / (smooth * (k + 1) + sum(table[lab]))

    neigh = k_nearest(train_x, query, k)
    predicted = set()
    for lab in range(num_labels):
        delta = sum(1 for j in neigh if lab in train_labels[j])
        p1 = prior1[lab] * cond(c1, lab, delta)
        p0 = prior0[lab] * cond(c0, lab, delta)
        if p1 > p0:
            predicted.add(lab)
    return predicted
