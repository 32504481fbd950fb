"""Brute-force reference implementations, written from textbook definitions.

Deliberately loop-based and independent of the package code paths.
"""

import itertools
import math
from collections import Counter, defaultdict

import numpy as np


def _dist(a, b):
    return math.sqrt(sum((float(x) - float(y)) ** 2 for x, y in zip(a, b)))


def _groups(labels):
    g = defaultdict(list)
    for i, lab in enumerate(labels):
        g[lab].append(i)
    return g


def silhouette(X, labels):
    X = [list(np.atleast_1d(r)) for r in np.asarray(X, dtype=float).reshape(len(labels), -1)]
    groups = _groups(labels)
    total = 0.0
    for i, lab in enumerate(labels):
        own = [j for j in groups[lab] if j != i]
        if not own:
            continue  # singleton contributes 0
        a = sum(_dist(X[i], X[j]) for j in own) / len(own)
        b = min(
            sum(_dist(X[i], X[j]) for j in members) / len(members)
            for other, members in groups.items() if other != lab
        )
        if max(a, b) > 0:
            total += (b - a) / max(a, b)
    return total / len(labels)


def _centroid(X, idx):
    return [sum(X[i][d] for i in idx) / len(idx) for d in range(len(X[0]))]


def calinski_harabasz(X, labels):
    X = [list(r) for r in np.asarray(X, dtype=float).reshape(len(labels), -1)]
    n, groups = len(X), _groups(labels)
    k = len(groups)
    overall = _centroid(X, range(n))
    between = within = 0.0
    for idx in groups.values():
        c = _centroid(X, idx)
        between += len(idx) * _dist(c, overall) ** 2
        within += sum(_dist(X[i], c) ** 2 for i in idx)
    if within == 0:
        return math.inf
    return (between / (k - 1)) / (within / (n - k))


def davies_bouldin(X, labels):
    X = [list(r) for r in np.asarray(X, dtype=float).reshape(len(labels), -1)]
    groups = list(_groups(labels).values())
    cents = [_centroid(X, idx) for idx in groups]
    scat = [sum(_dist(X[i], c) for i in idx) / len(idx) for idx, c in zip(groups, cents)]
    worst = []
    for i in range(len(groups)):
        best = -math.inf
        for j in range(len(groups)):
            if i == j:
                continue
            m = _dist(cents[i], cents[j])
            if m == 0:
                return math.inf
            best = max(best, (scat[i] + scat[j]) / m)
        worst.append(best)
    return sum(worst) / len(worst)


def ics(labels, subjects):
    by_subject = defaultdict(list)
    for lab, s in zip(labels, subjects):
        by_subject[s].append(lab)
    mismatches = 0
    for labs in by_subject.values():
        counts = Counter(labs)
        top = max(counts.values())
        ref = min(lab for lab, c in counts.items() if c == top)
        mismatches += sum(1 for lab in labs if lab != ref)
    return mismatches / len(labels)


def same_partition(a, b):
    """True when two labelings agree up to renaming of labels."""
    fwd, back = {}, {}
    for x, y in zip(a, b):
        if fwd.setdefault(x, y) != y or back.setdefault(y, x) != x:
            return False
    return len(a) == len(b)


def min_mismatches(truth, pred):
    """Fewest disagreements over all label permutations (exhaustive)."""
    truth, pred = list(truth), list(pred)
    t_labels = sorted(set(truth))
    p_labels = sorted(set(pred))
    k = max(len(t_labels), len(p_labels))
    best = len(truth)
    for perm in itertools.permutations(range(k), len(t_labels)):
        mapping = dict(zip(t_labels, perm))
        p_index = {lab: i for i, lab in enumerate(p_labels)}
        best = min(best, sum(1 for t, p in zip(truth, pred) if mapping[t] != p_index[p]))
    return best


def connected_components(adj):
    """Component id per node of the graph with an edge wherever ``adj`` is nonzero (BFS)."""
    n = len(adj)
    comp = [-1] * n
    current = 0
    for start in range(n):
        if comp[start] != -1:
            continue
        stack = [start]
        comp[start] = current
        while stack:
            u = stack.pop()
            for v in range(n):
                if adj[u][v] != 0 and comp[v] == -1:
                    comp[v] = current
                    stack.append(v)
        current += 1
    return comp


def best_two_split_ss(points):
    """Smallest within-cluster SS over every split of 1-D points into two nonempty groups."""
    n = len(points)
    best, best_split = math.inf, None
    for mask in range(1, 2 ** n - 1):
        groups = [[p for i, p in enumerate(points) if (mask >> i) & 1 == g] for g in (0, 1)]
        ss = sum(sum((p - sum(g) / len(g)) ** 2 for p in g) for g in groups)
        if ss < best:
            best, best_split = ss, [(mask >> i) & 1 for i in range(n)]
    return best, best_split
