"""Independent classical HMM forward/backward/Viterbi, coded from scratch.

Used to check that the generalized lattices collapse to the textbook
algorithms when every dwell is exactly one sample. Deliberately written
with plain Python loops and scalar math so it shares no code paths with
the package's vectorized implementation.
"""
from __future__ import annotations

import math


def _emission_ll(y, levels, sigma):
    """emit[t][s] = log N(y[t]; levels[s], sigma^2), natural log."""
    out = []
    c = -0.5 * math.log(2.0 * math.pi) - math.log(sigma)
    for yt in y:
        out.append([c - 0.5 * ((yt - lv) / sigma) ** 2 for lv in levels])
    return out


def classical_posteriors(mu0, trans, levels, sigma, y):
    """Return (psi, psi_pairs, log_evidence) for the chain S_0 -> S_1..S_m.

    S_0 ~ mu0 emits nothing; S_l emits y[l-1]. psi[l][s] for l in 1..m;
    psi_pairs[l][s'][s] for l in 2..m. Lists of lists, scaled arithmetic.
    """
    n = len(mu0)
    m = len(y)
    emit = _emission_ll(y, levels, sigma)

    alpha = [[0.0] * n for _ in range(m + 1)]
    scale = [0.0] * (m + 1)
    alpha[0] = list(mu0)
    scale[0] = 1.0
    for ell in range(1, m + 1):
        e = [math.exp(v) for v in emit[ell - 1]]
        row = [
            e[s] * math.fsum(alpha[ell - 1][sp] * trans[sp][s] for sp in range(n))
            for s in range(n)
        ]
        scale[ell] = math.fsum(row)
        alpha[ell] = [v / scale[ell] for v in row]

    beta = [[0.0] * n for _ in range(m + 1)]
    beta[m] = [1.0] * n
    for ell in range(m - 1, -1, -1):
        e = [math.exp(v) for v in emit[ell]]
        beta[ell] = [
            math.fsum(trans[s][sn] * e[sn] * beta[ell + 1][sn] for sn in range(n))
            / scale[ell + 1]
            for s in range(n)
        ]

    log_evidence = math.fsum(math.log(c) for c in scale[1:])

    psi = [[0.0] * n for _ in range(m + 1)]
    for ell in range(1, m + 1):
        w = [alpha[ell][s] * beta[ell][s] for s in range(n)]
        z = math.fsum(w)
        psi[ell] = [v / z for v in w]

    pairs = [[[0.0] * n for _ in range(n)] for _ in range(m + 1)]
    for ell in range(2, m + 1):
        e = [math.exp(v) for v in emit[ell - 1]]
        z = 0.0
        for sp in range(n):
            for s in range(n):
                v = (alpha[ell - 1][sp] * trans[sp][s] * e[s] * beta[ell][s]
                     / scale[ell])
                pairs[ell][sp][s] = v
                z += v
        for sp in range(n):
            for s in range(n):
                pairs[ell][sp][s] /= z
    return psi, pairs, log_evidence


def classical_viterbi(mu0, trans, levels, sigma, y):
    """MAP state path; ties broken toward the smaller predecessor index.

    Returns (state indices s_1..s_m, log joint score).
    """
    n = len(mu0)
    m = len(y)
    emit = _emission_ll(y, levels, sigma)
    neg = -math.inf

    def safe_log(p):
        return math.log(p) if p > 0 else neg

    val = [[safe_log(p) for p in mu0]]
    back = []
    for ell in range(1, m + 1):
        row = [neg] * n
        arg = [0] * n
        for s in range(n):
            for sp in range(n):
                cand = val[ell - 1][sp] + safe_log(trans[sp][s])
                if cand > row[s]:
                    row[s] = cand
                    arg[s] = sp
            row[s] += emit[ell - 1][s]
        val.append(row)
        back.append(arg)

    s = max(range(n), key=lambda i: (val[m][i], -i))
    score = val[m][s]
    path = [s]
    for ell in range(m - 1, 0, -1):
        s = back[ell][s]
        path.append(s)
    path.reverse()
    return path, score
