"""Pure-Python simulation kernel.

One call runs one trial of epsilon-greedy or LinUCB against pre-drawn
random streams.  The arithmetic is written as plain scalar loops in a fixed
order so that the compiled twin in ``_kernel_ext.pyx`` produces bit-identical
output; keep the two files in lockstep.
"""
import math

import numpy as np

PIVOT_TOL = 1e-10
EIG_RTOL = 1e-9  # lambda_min(V) >= c is checked as lambda_min > c (1 - EIG_RTOL)
EPS_GREEDY, LINUCB = 0, 1
FORCED, EXPLORE, EXPLOIT = 0, 1, 2


def _lu(a, d):
    """In-place partial-pivot LU of a flat row-major d x d list; returns perm or None."""
    perm = list(range(d))
    for k in range(d):
        p = k
        best = abs(a[k * d + k])
        for i in range(k + 1, d):
            v = abs(a[i * d + k])
            if v > best:
                best = v
                p = i
        if best <= PIVOT_TOL:
            return None
        if p != k:
            for j in range(d):
                a[k * d + j], a[p * d + j] = a[p * d + j], a[k * d + j]
            perm[k], perm[p] = perm[p], perm[k]
        piv = a[k * d + k]
        for i in range(k + 1, d):
            a[i * d + k] = a[i * d + k] / piv
        for i in range(k + 1, d):
            f = a[i * d + k]
            for j in range(k + 1, d):
                a[i * d + j] = a[i * d + j] - f * a[k * d + j]
    return perm


def _lu_solve(lu, perm, b, d):
    x = [b[perm[i]] for i in range(d)]
    for i in range(1, d):
        s = 0.0
        for j in range(i):
            s = s + lu[i * d + j] * x[j]
        x[i] = x[i] - s
    for i in range(d - 1, -1, -1):
        s = 0.0
        for j in range(i + 1, d):
            s = s + lu[i * d + j] * x[j]
        x[i] = (x[i] - s) / lu[i * d + i]
    return x


def _exceeds_min_eig(v, d, c):
    low = [0.0] * (d * d)
    for j in range(d):
        s = v[j * d + j] - c
        for k in range(j):
            s = s - low[j * d + k] * low[j * d + k]
        if not s > 0.0:
            return False
        low[j * d + j] = math.sqrt(s)
        for i in range(j + 1, d):
            s = v[i * d + j]
            for k in range(j):
                s = s - low[i * d + k] * low[j * d + k]
            low[i * d + j] = s / low[j * d + j]
    return True


def run_trial(table, gaps, mu, algo, ridge, R, delta, sigma, min_eig,
              explore, noise, ctx_u, ctx_cdf):
    """Simulate ``T = len(noise)`` rounds.

    table    (C, A, d) features; row ``x * A + a`` of ``gaps``/``mu`` matches.
    ridge    0 selects forced-basis initialisation, otherwise ``V0 = ridge I``.
    min_eig  LinUCB forced mode only: required ``lambda_min(V)`` once the design
             becomes invertible, up to a relative 1e-9 (ridge fallback
             otherwise); 0 disables.
    explore  (T, 2) uniforms: exploration coin and uniform-arm draw.
    noise    (T,) standard normals; ctx_u (T,) uniforms; ctx_cdf (C,).

    Returns ``(contexts, actions, cum_regret, kinds, fell_back)``.
    """
    n_ctx, n_arm, d = table.shape
    T = noise.shape[0]
    feats = table.reshape(-1).tolist()
    gaps_l = gaps.tolist()
    mu_l = mu.tolist()
    ex = explore.reshape(-1).tolist()
    nz = noise.tolist()
    cu = ctx_u.tolist()
    cdf = ctx_cdf.tolist()

    forced = not ridge > 0.0
    V = [0.0] * (d * d)
    S = [0.0] * d
    theta = [0.0] * d
    invertible = not forced
    if not forced:
        for i in range(d):
            V[i * d + i] = ridge
    ech_piv = []
    ech_rows = []
    pulls = 0
    fell_back = False
    log_delta = math.log(delta)

    contexts = np.zeros(T, dtype=np.int64)
    actions = np.zeros(T, dtype=np.int64)
    kinds = np.zeros(T, dtype=np.int8)
    cum = np.zeros(T)
    total = 0.0

    lu = [0.0] * (d * d)
    perm = list(range(d))
    if invertible:
        lu = V[:]
        perm = _lu(lu, d)

    for t in range(1, T + 1):
        u = cu[t - 1]
        x = 0
        while x < n_ctx - 1 and not u < cdf[x]:
            x += 1
        base = x * n_arm
        coin = ex[2 * (t - 1)]
        pick = ex[2 * (t - 1) + 1]

        arm = -1
        kind = EXPLOIT
        if forced and not invertible:
            kind = FORCED
            arm = 0
            for a in range(n_arm):
                off = (base + a) * d
                v = feats[off:off + d]
                vmax = 0.0
                for j in range(d):
                    if abs(v[j]) > vmax:
                        vmax = abs(v[j])
                if vmax == 0.0:
                    continue
                for e in range(len(ech_piv)):
                    c = v[ech_piv[e]]
                    row = ech_rows[e]
                    for j in range(d):
                        v[j] = v[j] - c * row[j]
                rmax = 0.0
                for j in range(d):
                    if abs(v[j]) > rmax:
                        rmax = abs(v[j])
                if rmax > PIVOT_TOL * max(1.0, vmax):
                    arm = a
                    break
        elif algo == EPS_GREEDY:
            if coin < 1.0 / math.sqrt(t):
                kind = EXPLORE
                arm = int(pick * n_arm)
                if arm > n_arm - 1:
                    arm = n_arm - 1
            else:
                best = 0.0
                for a in range(n_arm):
                    off = (base + a) * d
                    s = 0.0
                    for j in range(d):
                        s = s + feats[off + j] * theta[j]
                    if arm < 0 or s > best:
                        best = s
                        arm = a
        else:
            beta = 2.0 * R * R * (0.5 * d * math.log(1.0 + pulls / d) - log_delta)
            radius = math.sqrt(beta)
            best = 0.0
            for a in range(n_arm):
                off = (base + a) * d
                phi = feats[off:off + d]
                z = _lu_solve(lu, perm, phi, d)
                s = 0.0
                for j in range(d):
                    s = s + phi[j] * theta[j]
                w = 0.0
                for j in range(d):
                    w = w + phi[j] * z[j]
                if w < 0.0:
                    w = 0.0
                s = s + radius * math.sqrt(w)
                if arm < 0 or s > best:
                    best = s
                    arm = a

        row_idx = base + arm
        y = mu_l[row_idx] + sigma * nz[t - 1]
        total = total + gaps_l[row_idx]
        contexts[t - 1] = x
        actions[t - 1] = arm
        kinds[t - 1] = kind
        cum[t - 1] = total

        # least-squares update
        pulls += 1
        off = row_idx * d
        phi = feats[off:off + d]
        nonzero = False
        for j in range(d):
            if phi[j] != 0.0:
                nonzero = True
        if not nonzero:
            continue
        was_invertible = invertible
        if forced and len(ech_piv) < d:
            v = phi[:]
            vmax = 0.0
            for j in range(d):
                if abs(v[j]) > vmax:
                    vmax = abs(v[j])
            for e in range(len(ech_piv)):
                c = v[ech_piv[e]]
                row = ech_rows[e]
                for j in range(d):
                    v[j] = v[j] - c * row[j]
            p = 0
            rmax = 0.0
            for j in range(d):
                if abs(v[j]) > rmax:
                    rmax = abs(v[j])
                    p = j
            if rmax > PIVOT_TOL * max(1.0, vmax):
                piv = v[p]
                ech_piv.append(p)
                ech_rows.append([v[j] / piv for j in range(d)])
        for i in range(d):
            for j in range(d):
                V[i * d + j] = V[i * d + j] + phi[i] * phi[j]
            S[i] = S[i] + phi[i] * y
        lu = V[:]
        perm = _lu(lu, d)
        invertible = perm is not None
        if invertible:
            theta = _lu_solve(lu, perm, S, d)
        if (algo == LINUCB and forced and min_eig > 0.0 and invertible and not was_invertible
                and not _exceeds_min_eig(V, d, min_eig * (1.0 - EIG_RTOL))):
            fell_back = True
            for i in range(d):
                V[i * d + i] = V[i * d + i] + min_eig
            lu = V[:]
            perm = _lu(lu, d)
            theta = _lu_solve(lu, perm, S, d)

    return contexts, actions, cum, kinds, fell_back
