"""Shared generators for the randomized suites.

Everything here is seeded: a test that wants randomness builds its own
`random.Random(seed)` so failures replay exactly.
"""

from __future__ import annotations

import random
from fractions import Fraction

from mdp_workbench import (
    Channel,
    Prior,
    build_constraints,
    enumerate_kernels,
    enumerate_vertices,
    external_choice,
    from_hyper,
    make_loss,
    make_metric,
)
from mdp_workbench.exact import mat_mul


def space_and_kernels(kind, n):
    if kind == "hamming":
        space = make_metric("hamming", bits=n, base=2)
    elif kind == "grid":
        space = make_metric("grid", width=n, height=n, base=2)
    else:
        space = make_metric(kind, n=n, base=2)
    vertices = enumerate_vertices(build_constraints(space))
    kernels = enumerate_kernels(space, vertices)
    return space, vertices, kernels


def rand_fraction(rng: random.Random, num_max: int = 12, den_max: int = 6) -> Fraction:
    return Fraction(rng.randint(0, num_max), rng.randint(1, den_max))


def rand_prior(rng: random.Random, labels, full_support: bool = False) -> Prior:
    low = 1 if full_support else 0
    weights = [rng.randint(low, 20) for _ in labels]
    if sum(weights) == 0:
        weights[rng.randrange(len(weights))] = 1
    total = sum(weights)
    return Prior(tuple(labels), tuple(Fraction(w, total) for w in weights))


def rand_loss(rng: random.Random, x_labels, actions: int = None, num_max: int = 12):
    if actions is None:
        actions = rng.randint(1, len(x_labels) + 1)
    w_labels = [f"w{i}" for i in range(actions)]
    table = [
        [rand_fraction(rng, num_max) for _ in x_labels] for _ in w_labels
    ]
    return make_loss("custom", w_labels=w_labels, x_labels=x_labels, table=table)


def rand_gain(rng: random.Random, x_labels, actions: int = None):
    # Gains are structurally the same tables; kept separate for readability.
    return rand_loss(rng, x_labels, actions)


def rand_stochastic_rows(rng: random.Random, rows: int, cols: int):
    out = []
    for _ in range(rows):
        weights = [rng.randint(0, 6) for _ in range(cols)]
        if sum(weights) == 0:
            weights[rng.randrange(cols)] = 1
        total = sum(weights)
        out.append(tuple(Fraction(w, total) for w in weights))
    return tuple(out)


def rand_dx_channel(rng: random.Random, space, kernels) -> Channel:
    """A random member of the privacy type: a mix of kernels, then a random
    post-processing.  Both steps preserve the row-ratio bounds."""
    first = from_hyper(rng.choice(kernels))[0]
    if rng.random() < 0.7:
        second = from_hyper(rng.choice(kernels))[0]
        p = Fraction(rng.randint(1, 9), 10)
        mixed = external_choice(first, second, p)
    else:
        mixed = first
    if rng.random() < 0.7:
        cols = rng.randint(1, len(mixed.y_labels))
        post = rand_stochastic_rows(rng, len(mixed.y_labels), cols)
        rows = mat_mul(mixed.rows, post)
        keep = [j for j in range(cols) if any(row[j] for row in rows)]
        return Channel(
            mixed.x_labels,
            tuple(f"y{j}" for j in keep),
            tuple(tuple(row[j] for j in keep) for row in rows),
        )
    return mixed


def rand_monotone_profile(rng: random.Random, distances, strict: bool = False):
    """A non-decreasing (or strictly increasing) distance -> loss map."""
    value = Fraction(rng.randint(0, 3))
    profile = {}
    for d in sorted(distances):
        profile[d] = value
        step = rng.randint(1, 4) if strict else rng.randint(0, 4)
        value = value + Fraction(step, 2)
    return profile
