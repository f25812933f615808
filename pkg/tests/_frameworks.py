"""Random frameworks shared by the test modules."""
import itertools

import numpy as np

from weakrigidity.graph import FrameworkSpec
from weakrigidity.rigidity import fw_values, sample_configuration


def random_framework(rng, d=None, n=None, allow_empty_edges=True, realized=False):
    """Random spec plus a configuration in its domain.

    Targets are drawn from a second random configuration unless
    ``realized`` is set, in which case the returned configuration is a
    realization of them.
    """
    d = d or int(rng.choice([2, 3]))
    n = n or int(rng.integers(3, 7))
    pairs = list(itertools.combinations(range(n), 2))
    m = int(rng.integers(0 if allow_empty_edges else 1, min(4, len(pairs)) + 1))
    edges = [pairs[i] for i in rng.choice(len(pairs), size=m, replace=False)]
    triples = [t for t in itertools.permutations(range(n), 3) if t[1] < t[2]]
    w = int(rng.integers(1 if m == 0 else 0, min(8, len(triples)) + 1))
    angles = [triples[i] for i in rng.choice(len(triples), size=w, replace=False)]
    spec = FrameworkSpec(n, d, edges, angles, [1.0] * m, [0.0] * w)
    target_cfg = sample_configuration(spec, rng)
    spec = spec.with_targets(fw_values(spec, target_cfg))
    P = target_cfg if realized else sample_configuration(spec, rng)
    return spec, P


def equilateral(side=10.0):
    return np.array([[0.0, 0.0], [side, 0.0], [side / 2, side * np.sqrt(3) / 2]])
