"""Slow, direct reference computations used as test oracles.

Nothing here calls into the code paths under test beyond reading plain
attributes (rows, schema values, fitted tables).
"""
from __future__ import annotations

import itertools
import math
from collections import Counter
from fractions import Fraction

import numpy as np


def groupby_counts(rows, names, attrs):
    pos = [names.index(a) for a in attrs]
    return Counter(tuple(r[p] for p in pos) for r in rows)


def brute_uncovered(d, tau, attrs):
    names = list(d.schema.names)
    counts = groupby_counts(d.rows, names, attrs)
    values = [d.schema.column(a).values for a in attrs]
    return {combo: counts.get(combo, 0) for combo in itertools.product(*values)
            if counts.get(combo, 0) < tau}


def _count(rows, names, binding):
    pos = [(names.index(k), v) for k, v in binding.items()]
    return sum(all(r[p] == v for p, v in pos) for r in rows)


def brute_mups(d, tau, attrs):
    """Scan every lattice pattern; keep uncovered ones whose parents are all covered."""
    names = list(d.schema.names)
    choices = [(None,) + d.schema.column(a).values for a in attrs]
    counts = {}
    for combo in itertools.product(*choices):
        b = frozenset((a, v) for a, v in zip(attrs, combo) if v is not None)
        counts[b] = _count(d.rows, names, dict(b))
    out = set()
    for b, c in counts.items():
        if c < tau and all(counts[b - {item}] >= tau for item in b):
            out.add(b)
    return out


def min_set_cover_size(sets, universe):
    sets = [frozenset(s) for s in sets]
    for k in range(1, len(sets) + 1):
        for choice in itertools.combinations(sets, k):
            if frozenset().union(*choice) >= universe:
                return k
    return None


def brute_mi(table):
    table = [[float(x) for x in row] for row in table]
    total = sum(map(sum, table))
    rows = [sum(r) / total for r in table]
    cols = [sum(table[i][j] for i in range(len(table))) / total for j in range(len(table[0]))]
    mi = 0.0
    for i, row in enumerate(table):
        for j, c in enumerate(row):
            if c > 0:
                p = c / total
                mi += p * math.log(p / (rows[i] * cols[j]))
    return mi


def tree_joint(model):
    """Enumerate the full joint of a fitted Chow-Liu model: {codes tuple: prob}."""
    schema = model.schema
    cards = [c.cardinality for c in schema.columns]
    names = list(schema.names)
    root = model.order[0]
    joint = {}
    for codes in itertools.product(*(range(k) for k in cards)):
        p = model.root_probs[codes[names.index(root)]]
        for child, parent in model.parent.items():
            if parent is None:
                continue
            p *= model.cpts[child][codes[names.index(parent)], codes[names.index(child)]]
        joint[codes] = p
    return joint


def exact_ocsvm_objective(K, C):
    """Minimise ½aᵀKa s.t. 0 ≤ a ≤ C, Σa = 1 by enumerating active sets.

    For each assignment of variables to {lower, upper, free}, solve the
    equality-constrained KKT system on the free block and keep feasible,
    dual-consistent solutions.  The problem is convex so any such point is
    optimal; the minimum objective over them is returned.
    """
    m = K.shape[0]
    best = math.inf
    for states in itertools.product((0, 1, 2), repeat=m):
        a = np.zeros(m)
        up = [i for i, s in enumerate(states) if s == 1]
        free = [i for i, s in enumerate(states) if s == 2]
        a[up] = C
        rest = 1.0 - C * len(up)
        if not free:
            if abs(rest) > 1e-12:
                continue
        else:
            f = len(free)
            A = np.zeros((f + 1, f + 1))
            A[:f, :f] = K[np.ix_(free, free)]
            A[:f, f] = -1.0
            A[f, :f] = 1.0
            rhs = np.zeros(f + 1)
            rhs[:f] = -K[np.ix_(free, up)] @ a[up] if up else 0.0
            rhs[f] = rest
            try:
                sol = np.linalg.solve(A, rhs)
            except np.linalg.LinAlgError:
                sol = np.linalg.lstsq(A, rhs, rcond=None)[0]
                if np.abs(A @ sol - rhs).max() > 1e-9:
                    continue
            a[free] = sol[:f]
            if (a[free] < -1e-10).any() or (a[free] > C + 1e-10).any():
                continue
        if abs(a.sum() - 1.0) > 1e-9:
            continue
        best = min(best, 0.5 * a @ K @ a)
    return best


def brute_auc(pos, neg):
    wins = Fraction(0)
    for p in pos:
        for n in neg:
            if p > n:
                wins += 1
            elif p == n:
                wins += Fraction(1, 2)
    return wins / (len(pos) * len(neg))


def central_difference(f, x, h=1e-5):
    g = np.zeros_like(x)
    for i in range(len(x)):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g
