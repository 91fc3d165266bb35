"""Independent reference implementations used as test oracles.

Written in plain Python scalars (no numpy broadcasting, no shared helpers
with the package) so an error in the vectorised code cannot hide here.
"""

import math

import numpy as np


def _sig(x):
    return 1.0 / (1.0 + math.exp(-x))


def _matvec(W, v):
    return [sum(W[r][c] * v[c] for c in range(len(v))) for r in range(len(W))]


def scalar_step(p, x, h, c):
    """One LSTM step, element by element. ``p`` holds nested lists."""
    n = len(h)
    gates = {}
    for g, act in (("i", _sig), ("f", _sig), ("o", _sig), ("c", math.tanh)):
        wx = _matvec(p[f"W_x{g}"], x)
        wh = _matvec(p[f"W_h{g}"], h)
        gates[g] = [act(wx[k] + wh[k] + p[f"b_{g}"][k]) for k in range(n)]
    c_new = [gates["f"][k] * c[k] + gates["i"][k] * gates["c"][k] for k in range(n)]
    h_new = [gates["o"][k] * math.tanh(c_new[k]) for k in range(n)]
    return h_new, c_new


def scalar_forward(p, tokens):
    """Class probabilities for one token sequence."""
    n = len(p["b_i"])
    h, c = [0.0] * n, [0.0] * n
    for tok in tokens:
        h, c = scalar_step(p, list(p["W_es"][tok]), h, c)
    C = len(p["b_p"])
    z = [sum(h[k] * p["W_p"][k][j] for k in range(n)) + p["b_p"][j] for j in range(C)]
    m = max(z)
    e = [math.exp(v - m) for v in z]
    s = sum(e)
    return [v / s for v in e]


def scalar_loss(p, batch, l2):
    nll = -sum(math.log(scalar_forward(p, toks)[y]) for toks, y in batch) / len(batch)
    sq = sum(float(np.sum(np.asarray(v) ** 2)) for v in p.values())
    return nll + l2 * sq


def as_lists(params):
    return {k: v.tolist() for k, v in params.items()}


def finite_difference_check(params, loss_fn, grads, coords, eps=1e-5):
    """Max relative error of ``grads`` against central differences at ``coords``.

    ``coords`` is a list of ``(name, flat index)``. The relative error uses
    ``max(|a|, |n|, 1e-8)`` as the denominator, so entries whose true
    gradient vanishes are compared absolutely.
    """
    worst = 0.0
    for name, idx in coords:
        arr = getattr(params, name).reshape(-1)
        old = arr[idx]
        arr[idx] = old + eps
        up = loss_fn(params)
        arr[idx] = old - eps
        down = loss_fn(params)
        arr[idx] = old
        numeric = (up - down) / (2 * eps)
        analytic = getattr(grads, name).reshape(-1)[idx]
        worst = max(worst, abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-8))
    return worst


def random_coords(params, rng, n):
    names = [k for k, _ in params.items()]
    out = []
    for _ in range(n):
        name = names[rng.integers(len(names))]
        out.append((name, int(rng.integers(getattr(params, name).size))))
    return out


def linear_scan_query_vc(store, annotation, rel, vc):
    """``(?X, ?Y, fact)`` triples by scanning every fact for every concept."""
    out = set()
    for concept in annotation.concepts:
        if concept.kind != vc:
            continue
        for fact in store:
            if fact.predicate.kind != rel:
                continue
            if fact.subject == concept.label:
                out.add((concept, fact.object, fact))
            if fact.object == concept.label:
                out.add((concept, fact.subject, fact))
    return out
