"""Shared oracles for the projection gradient checks."""

import numpy as np

from typeseek.projection import ProjectionModel, Triplet, batch_loss, forward


def finite_difference_grads(model, triplets, margin, eps=1e-5):
    """Central-difference gradients of the mean batch loss, parameter by parameter."""
    grads = []
    for param in model.params():
        g = np.zeros_like(param)
        flat = param.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            up = batch_loss(model, triplets, margin)
            flat[i] = orig - eps
            down = batch_loss(model, triplets, margin)
            flat[i] = orig
            gflat[i] = (up - down) / (2 * eps)
        grads.append(g)
    return grads


def relative_error(analytic, numeric):
    a = np.concatenate([x.reshape(-1) for x in analytic])
    n = np.concatenate([x.reshape(-1) for x in numeric])
    denom = max(float(np.linalg.norm(a)), float(np.linalg.norm(n)), 1e-12)
    return float(np.linalg.norm(a - n)) / denom


def random_gradcheck_case(seed, min_active=1, kink_gap=1e-3):
    """A random small model and triplet batch with no triplet near the hinge kink.

    Central differences are meaningless at the kink, so batches are resampled
    until every triplet's hinge pre-activation is comfortably non-zero and at
    least ``min_active`` triplets are active.
    """
    rng = np.random.default_rng(seed)
    in_dim = int(rng.integers(5, 14))
    hidden = int(rng.integers(4, 11))
    out = int(rng.integers(3, 9))
    margin = float(rng.uniform(0.1, 0.6))
    model = ProjectionModel.initialize(in_dim, hidden, out, dropout_rate=0.0,
                                       seed=int(rng.integers(1 << 30)))
    batch = int(rng.integers(2, 6))
    for _ in range(200):
        triplets = [
            Triplet(
                anchor=rng.standard_normal(in_dim),
                positive=rng.standard_normal(in_dim),
                negative=rng.standard_normal(in_dim),
            )
            for _ in range(batch)
        ]
        pres = []
        for t in triplets:
            ya, yp, yn = (forward(model, v) for v in (t.anchor, t.positive, t.negative))
            ya, yp, yn = (v / np.linalg.norm(v) for v in (ya, yp, yn))
            pres.append(float(ya @ yn - ya @ yp + margin))
        pres = np.array(pres)
        if np.all(np.abs(pres) > kink_gap) and (pres > 0).sum() >= min_active:
            return model, triplets, margin
    raise AssertionError("could not sample a kink-free gradcheck batch")
