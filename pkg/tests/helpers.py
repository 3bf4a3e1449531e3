import numpy as np

# one line per acceptance criterion, printed by the terminal summary hook
ACCEPTANCE_LINES = []


def random_spd(n, rng):
    """M M^T + n I, symmetrised exactly."""
    m = rng.standard_normal((n, n))
    a = m @ m.T + n * np.eye(n)
    # matmul round-off can leave a tiny asymmetry
    return (a + a.T) / 2


def brute_inner_product(l, r):
    """Triple loop over (left prefix, right suffix, contracted index)."""
    l, r = np.asarray(l, dtype=float), np.asarray(r, dtype=float)
    q = l.shape[-1]
    lf = l.reshape(-1, q)
    rf = r.reshape(q, -1)
    out = np.zeros((lf.shape[0], rf.shape[1]))
    for a in range(lf.shape[0]):
        for b in range(rf.shape[1]):
            total = 0.0
            for k in range(q):
                total += lf[a, k] * rf[k, b]
            out[a, b] = total
    return out.reshape(l.shape[:-1] + r.shape[1:])
