# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled closed-loop kernel.

Mirrors ``hybrid.simulate`` run on ``lif.build_hybrid_system`` operation for
operation, so both backends return bit-identical traces. Any change to the
RK4 stages, bisection, flow map, jump map or signal sampler must be made in
both places.
"""
import numpy as np
from libc.math cimport floor, isfinite

DEF MAXN = 64


cdef struct Loop:
    int n
    double* A
    double* B
    double* C
    double alpha1, alpha2, mu1, mu2, delta1, delta2
    double* dk
    Py_ssize_t nd
    double ds
    bint has_d
    double* nk
    Py_ssize_t nn
    double ns
    bint has_n


cdef inline double sample(double* v, Py_ssize_t nv, double g, double t) nogil:
    cdef double r = t / g
    cdef double k = floor(r + 0.5)
    cdef double theta
    cdef Py_ssize_t i
    if k * g == t:
        return v[<Py_ssize_t>k]
    k = floor(r)
    theta = (t - k * g) / g
    if theta < 0.0:
        theta = 0.0
    elif theta > 1.0:
        theta = 1.0
    i = <Py_ssize_t>k
    return (1.0 - theta) * v[i] + theta * v[i + 1]


cdef inline bint flow(Loop* L, double t, double* q, double* out) nogil:
    cdef int n = L.n
    cdef int i, k
    cdef double acc, y
    cdef double v = 0.0
    cdef double w = 0.0
    if L.has_d:
        v = sample(L.dk, L.nd, L.ds, t)
    if L.has_n:
        w = sample(L.nk, L.nn, L.ns, t)
    for i in range(n):
        acc = 0.0
        for k in range(n):
            acc = acc + L.A[i * n + k] * q[k]
        out[i] = acc + v
    y = 0.0
    for k in range(n):
        y = y + L.C[k] * q[k]
    y = y + w
    out[n] = -L.mu1 * q[n] + (y if y > 0.0 else 0.0)
    out[n + 1] = -L.mu2 * q[n + 1] + (-y if y < 0.0 else 0.0)
    for i in range(n + 2):
        if not isfinite(out[i]):
            return False
    return True


cdef bint rk4(Loop* L, double t, double* q, double h, double* res) nogil:
    cdef int m = L.n + 2
    cdef int i
    cdef double k1[MAXN]
    cdef double k2[MAXN]
    cdef double k3[MAXN]
    cdef double k4[MAXN]
    cdef double s[MAXN]
    cdef double h2 = 0.5 * h
    cdef double h6
    if not flow(L, t, q, k1):
        return False
    for i in range(m):
        s[i] = q[i] + h2 * k1[i]
    if not flow(L, t + h2, s, k2):
        return False
    for i in range(m):
        s[i] = q[i] + h2 * k2[i]
    if not flow(L, t + h2, s, k3):
        return False
    for i in range(m):
        s[i] = q[i] + h * k3[i]
    if not flow(L, t + h, s, k4):
        return False
    h6 = h / 6.0
    for i in range(m):
        res[i] = q[i] + h6 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        if not isfinite(res[i]):
            return False
    return True


cdef inline double gmax(Loop* L, double* q) nogil:
    cdef double r1 = q[L.n] - L.delta1
    cdef double r2 = q[L.n + 1] - L.delta2
    return r1 if r1 >= r2 else r2


cdef class _Samples:
    cdef public object t, j, q
    cdef double[::1] tv
    cdef long long[::1] jv
    cdef double[:, ::1] qv
    cdef Py_ssize_t size, cap
    cdef int m

    def __init__(self, Py_ssize_t cap, int m):
        self.m = m
        self.size = 0
        self._alloc(cap)

    cdef _alloc(self, Py_ssize_t cap):
        t = np.empty(cap)
        j = np.empty(cap, dtype=np.int64)
        q = np.empty((cap, self.m))
        if self.size:
            t[:self.size] = self.t[:self.size]
            j[:self.size] = self.j[:self.size]
            q[:self.size] = self.q[:self.size]
        self.t, self.j, self.q = t, j, q
        self.tv, self.jv, self.qv = t, j, q
        self.cap = cap

    cdef inline void push(self, double t, long long j, double* q):
        cdef int i
        if self.size == self.cap:
            self._alloc(2 * self.cap)
        self.tv[self.size] = t
        self.jv[self.size] = j
        for i in range(self.m):
            self.qv[self.size, i] = q[i]
        self.size += 1

    def arrays(self):
        return self.t[:self.size].copy(), self.j[:self.size].copy(), self.q[:self.size].copy()


def run_closed_loop(double[:, ::1] A, double[::1] B, double[::1] C,
                    double[::1] alpha, double[::1] mu, double[::1] delta, double[::1] q0,
                    double h, double t_end, long long j_max, double tol_state, double tol_time,
                    double[::1] dist_knots, double dist_step, bint has_dist,
                    double[::1] noise_knots, double noise_step, bint has_noise):
    """Simulate the closed loop; returns sample arrays, jump arrays and a termination code.

    Codes: 0 time horizon, 1 jump limit, 2 non-finite flow.
    """
    cdef int n = B.shape[0]
    cdef int m = n + 2
    cdef int i, active
    cdef Loop L
    cdef double t = 0.0
    cdef long long j = 0
    cdef double q[MAXN]
    cdef double qn[MAXN]
    cdef double qm[MAXN]
    cdef double r1, r2, t_new, span, lo, hi, mid
    cdef bint simultaneous
    cdef int code = 0
    if m > MAXN:
        raise ValueError(f"compiled kernel supports n_x <= {MAXN - 2}")
    if (has_dist and dist_knots.shape[0] < 2) or (has_noise and noise_knots.shape[0] < 2):
        raise ValueError("signal knot arrays are too short")
    Acopy = np.ascontiguousarray(A)
    cdef double[:, ::1] Av = Acopy
    L.n = n
    L.A = &Av[0, 0]
    L.B = &B[0]
    L.C = &C[0]
    L.alpha1 = alpha[0]; L.alpha2 = alpha[1]
    L.mu1 = mu[0]; L.mu2 = mu[1]
    L.delta1 = delta[0]; L.delta2 = delta[1]
    L.has_d = has_dist
    L.has_n = has_noise
    L.dk = &dist_knots[0] if has_dist else NULL
    L.nd = dist_knots.shape[0]
    L.ds = dist_step
    L.nk = &noise_knots[0] if has_noise else NULL
    L.nn = noise_knots.shape[0]
    L.ns = noise_step

    for i in range(m):
        q[i] = q0[i]
    samples = _Samples(<Py_ssize_t>(t_end / h) + 64, m)
    cdef _Samples S = samples
    jt, jb, jg, js, qb, qa = [], [], [], [], [], []
    S.push(t, j, q)

    while True:
        r1 = q[n] - L.delta1
        r2 = q[n + 1] - L.delta2
        if (r1 if r1 >= r2 else r2) >= 0.0:
            if r1 >= -tol_state:
                active = 1
                simultaneous = r2 >= -tol_state
            else:
                active = 2
                simultaneous = False
            jt.append(t); jb.append(j); jg.append(active); js.append(simultaneous)
            qb.append([q[i] for i in range(m)])
            if active == 1:
                for i in range(n):
                    q[i] = q[i] - L.B[i] * L.alpha1
                q[n] = 0.0
            else:
                for i in range(n):
                    q[i] = q[i] + L.B[i] * L.alpha2
                q[n + 1] = 0.0
            qa.append([q[i] for i in range(m)])
            j += 1
            S.push(t, j, q)
            if j >= j_max:
                code = 1
                break
            continue
        if t >= t_end:
            break
        t_new = t + h if t + h < t_end else t_end
        span = t_new - t
        if not rk4(&L, t, q, span, qn):
            code = 2
            break
        if gmax(&L, qn) >= 0.0:
            lo = 0.0
            hi = span
            while hi - lo > tol_time:
                mid = lo + 0.5 * (hi - lo)
                if mid <= lo or mid >= hi:
                    break
                if not rk4(&L, t, q, mid, qm):
                    code = 2
                    break
                if gmax(&L, qm) >= 0.0:
                    hi = mid
                    for i in range(m):
                        qn[i] = qm[i]
                else:
                    lo = mid
            if code == 2:
                break
            if hi != span:
                t_new = t + hi
        t = t_new
        for i in range(m):
            q[i] = qn[i]
        S.push(t, j, q)

    ts, jv, qv = S.arrays()
    njump = len(jt)
    return (ts, jv, qv,
            np.array(jt, dtype=float), np.array(jb, dtype=np.int64), np.array(jg, dtype=np.int64),
            np.array(js, dtype=bool),
            np.array(qb, dtype=float).reshape(njump, m), np.array(qa, dtype=float).reshape(njump, m),
            code)
