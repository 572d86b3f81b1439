import itertools

import numpy as np


def brute_force_energy(params, v, h):
    total = 0.0
    for i in range(params.n_visible):
        total -= params.b[i] * v[i]
        for j in range(params.n_hidden):
            total -= params.W[i, j] * v[i] * h[j]
    for j in range(params.n_hidden):
        total -= params.c[j] * h[j]
    return total


def brute_force_table(params):
    """Every (v, h) with its Boltzmann probability, by explicit enumeration."""
    states = []
    for v in itertools.product((0.0, 1.0), repeat=params.n_visible):
        for h in itertools.product((0.0, 1.0), repeat=params.n_hidden):
            states.append((np.array(v), np.array(h), brute_force_energy(params, v, h)))
    energies = np.array([e for _, _, e in states])
    weights = np.exp(-(energies - energies.min()))
    probs = weights / weights.sum()
    return [(v, h, e, p) for (v, h, e), p in zip(states, probs)]


def brute_force_log_z(params):
    energies = np.array([e for _, _, e, _ in brute_force_table(params)])
    shift = -energies.min()
    return float(np.log(np.exp(-energies - shift).sum()) + shift)


