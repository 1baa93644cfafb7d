# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twin of ``_kernel_py``; same loops, same operation order."""
import numpy as np

from libc.math cimport fabs, log, sqrt
from libc.stdlib cimport free, malloc

cdef double PIVOT_TOL = 1e-10
cdef double EIG_RTOL = 1e-9
cdef int EPS_GREEDY = 0
cdef int LINUCB = 1


cdef bint _lu(double* a, int* perm, int d) noexcept nogil:
    cdef int i, j, k, p
    cdef double best, v, piv, f, tmp
    cdef int itmp
    for i in range(d):
        perm[i] = i
    for k in range(d):
        p = k
        best = fabs(a[k * d + k])
        for i in range(k + 1, d):
            v = fabs(a[i * d + k])
            if v > best:
                best = v
                p = i
        if best <= PIVOT_TOL:
            return False
        if p != k:
            for j in range(d):
                tmp = a[k * d + j]
                a[k * d + j] = a[p * d + j]
                a[p * d + j] = tmp
            itmp = perm[k]
            perm[k] = perm[p]
            perm[p] = itmp
        piv = a[k * d + k]
        for i in range(k + 1, d):
            a[i * d + k] = a[i * d + k] / piv
        for i in range(k + 1, d):
            f = a[i * d + k]
            for j in range(k + 1, d):
                a[i * d + j] = a[i * d + j] - f * a[k * d + j]
    return True


cdef void _lu_solve(double* lu, int* perm, double* b, double* x, int d) noexcept nogil:
    cdef int i, j
    cdef double s
    for i in range(d):
        x[i] = b[perm[i]]
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


cdef bint _exceeds_min_eig(double* v, double* low, int d, double c) noexcept nogil:
    cdef int i, j, k
    cdef double s
    for j in range(d * d):
        low[j] = 0.0
    for j in range(d):
        s = v[j * d + j] - c
        for k in range(j):
            s = s - low[j * d + k] * low[j * d + k]
        if not s > 0.0:
            return False
        low[j * d + j] = sqrt(s)
        for i in range(j + 1, d):
            s = v[i * d + j]
            for k in range(j):
                s = s - low[i * d + k] * low[j * d + k]
            low[i * d + j] = s / low[j * d + j]
    return True


cdef bint _reduce(double* v, int* ech_piv, double* ech_rows, int n_ech, int d,
                  int* pivot) noexcept nogil:
    """Eliminate against the echelon rows; True when ``v`` is independent."""
    cdef int e, j
    cdef double c, vmax = 0.0, rmax = 0.0
    for j in range(d):
        if fabs(v[j]) > vmax:
            vmax = fabs(v[j])
    for e in range(n_ech):
        c = v[ech_piv[e]]
        for j in range(d):
            v[j] = v[j] - c * ech_rows[e * d + j]
    pivot[0] = 0
    for j in range(d):
        if fabs(v[j]) > rmax:
            rmax = fabs(v[j])
            pivot[0] = j
    if vmax < 1.0:
        vmax = 1.0
    return rmax > PIVOT_TOL * vmax


def run_trial(table, gaps, mu, int algo, double ridge, double R, double delta, double sigma,
              double min_eig, explore, noise, ctx_u, ctx_cdf):
    cdef const double[:, :, ::1] tab = np.ascontiguousarray(table, dtype=np.float64)
    cdef const double[::1] g = np.ascontiguousarray(gaps, dtype=np.float64)
    cdef const double[::1] m = np.ascontiguousarray(mu, dtype=np.float64)
    cdef const double[:, ::1] ex = np.ascontiguousarray(explore, dtype=np.float64)
    cdef const double[::1] nz = np.ascontiguousarray(noise, dtype=np.float64)
    cdef const double[::1] cu = np.ascontiguousarray(ctx_u, dtype=np.float64)
    cdef const double[::1] cdf = np.ascontiguousarray(ctx_cdf, dtype=np.float64)

    cdef int n_ctx = tab.shape[0], n_arm = tab.shape[1], d = tab.shape[2]
    cdef Py_ssize_t T = nz.shape[0]

    contexts_a = np.zeros(T, dtype=np.int64)
    actions_a = np.zeros(T, dtype=np.int64)
    kinds_a = np.zeros(T, dtype=np.int8)
    cum_a = np.zeros(T)
    cdef long long[::1] contexts = contexts_a
    cdef long long[::1] actions = actions_a
    cdef signed char[::1] kinds = kinds_a
    cdef double[::1] cum = cum_a

    cdef double* V = <double*>malloc(d * d * sizeof(double))
    cdef double* lu = <double*>malloc(d * d * sizeof(double))
    cdef double* low = <double*>malloc(d * d * sizeof(double))
    cdef double* ech_rows = <double*>malloc(d * d * sizeof(double))
    cdef double* S = <double*>malloc(d * sizeof(double))
    cdef double* theta = <double*>malloc(d * sizeof(double))
    cdef double* v = <double*>malloc(d * sizeof(double))
    cdef double* phi = <double*>malloc(d * sizeof(double))
    cdef double* z = <double*>malloc(d * sizeof(double))
    cdef int* perm = <int*>malloc(d * sizeof(int))
    cdef int* ech_piv = <int*>malloc(d * sizeof(int))
    if (V == NULL or lu == NULL or low == NULL or ech_rows == NULL or S == NULL or theta == NULL
            or v == NULL or phi == NULL or z == NULL or perm == NULL or ech_piv == NULL):
        free(V); free(lu); free(low); free(ech_rows); free(S); free(theta)
        free(v); free(phi); free(z); free(perm); free(ech_piv)
        raise MemoryError()

    cdef bint forced = not ridge > 0.0
    cdef bint invertible = not forced
    cdef bint was_invertible, nonzero, fell_back = False
    cdef int n_ech = 0, pulls = 0, x, base, arm, kind, a, j, i, p, row_idx
    cdef Py_ssize_t t
    cdef double u, coin, pick, best, s, w, beta, radius, y, piv, total = 0.0
    cdef double log_delta = log(delta)

    try:
        with nogil:
            for i in range(d * d):
                V[i] = 0.0
            for i in range(d):
                S[i] = 0.0
                theta[i] = 0.0
                perm[i] = i
            if not forced:
                for i in range(d):
                    V[i * d + i] = ridge
            for i in range(d * d):
                lu[i] = V[i]
            if invertible:
                _lu(lu, perm, d)

            for t in range(1, T + 1):
                u = cu[t - 1]
                x = 0
                while x < n_ctx - 1 and not u < cdf[x]:
                    x += 1
                base = x * n_arm
                coin = ex[t - 1, 0]
                pick = ex[t - 1, 1]

                arm = -1
                kind = 2
                if forced and not invertible:
                    kind = 0
                    arm = 0
                    for a in range(n_arm):
                        nonzero = False
                        for j in range(d):
                            v[j] = tab[x, a, j]
                            if v[j] != 0.0:
                                nonzero = True
                        if not nonzero:
                            continue
                        if _reduce(v, ech_piv, ech_rows, n_ech, d, &p):
                            arm = a
                            break
                elif algo == EPS_GREEDY:
                    if coin < 1.0 / sqrt(<double>t):
                        kind = 1
                        arm = <int>(pick * n_arm)
                        if arm > n_arm - 1:
                            arm = n_arm - 1
                    else:
                        best = 0.0
                        for a in range(n_arm):
                            s = 0.0
                            for j in range(d):
                                s = s + tab[x, a, j] * theta[j]
                            if arm < 0 or s > best:
                                best = s
                                arm = a
                else:
                    beta = 2.0 * R * R * (0.5 * d * log(1.0 + <double>pulls / d) - log_delta)
                    radius = sqrt(beta)
                    best = 0.0
                    for a in range(n_arm):
                        for j in range(d):
                            phi[j] = tab[x, a, j]
                        _lu_solve(lu, perm, phi, z, d)
                        s = 0.0
                        for j in range(d):
                            s = s + phi[j] * theta[j]
                        w = 0.0
                        for j in range(d):
                            w = w + phi[j] * z[j]
                        if w < 0.0:
                            w = 0.0
                        s = s + radius * sqrt(w)
                        if arm < 0 or s > best:
                            best = s
                            arm = a

                row_idx = base + arm
                y = m[row_idx] + sigma * nz[t - 1]
                total = total + g[row_idx]
                contexts[t - 1] = x
                actions[t - 1] = arm
                kinds[t - 1] = kind
                cum[t - 1] = total

                pulls += 1
                nonzero = False
                for j in range(d):
                    phi[j] = tab[x, arm, j]
                    if phi[j] != 0.0:
                        nonzero = True
                if not nonzero:
                    continue
                was_invertible = invertible
                if forced and n_ech < d:
                    for j in range(d):
                        v[j] = phi[j]
                    if _reduce(v, ech_piv, ech_rows, n_ech, d, &p):
                        piv = v[p]
                        ech_piv[n_ech] = p
                        for j in range(d):
                            ech_rows[n_ech * d + j] = v[j] / piv
                        n_ech += 1
                for i in range(d):
                    for j in range(d):
                        V[i * d + j] = V[i * d + j] + phi[i] * phi[j]
                    S[i] = S[i] + phi[i] * y
                for i in range(d * d):
                    lu[i] = V[i]
                invertible = _lu(lu, perm, d)
                if invertible:
                    _lu_solve(lu, perm, S, theta, d)
                if (algo == LINUCB and forced and min_eig > 0.0 and invertible and not was_invertible
                        and not _exceeds_min_eig(V, low, d, min_eig * (1.0 - EIG_RTOL))):
                    fell_back = True
                    for i in range(d):
                        V[i * d + i] = V[i * d + i] + min_eig
                    for i in range(d * d):
                        lu[i] = V[i]
                    _lu(lu, perm, d)
                    _lu_solve(lu, perm, S, theta, d)
    finally:
        free(V); free(lu); free(low); free(ech_rows); free(S); free(theta)
        free(v); free(phi); free(z); free(perm); free(ech_piv)

    return contexts_a, actions_a, cum_a, kinds_a, bool(fell_back)
