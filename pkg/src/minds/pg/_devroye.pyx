# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled exact PG(1, c) sampler (alternating-series rejection on the half-line).

Draws are consumed directly from a numpy ``BitGenerator`` stream, so a run is
reproducible given the generator's seed.  The Python-visible entry point is
:func:`draw_pg1_into`, which fills a preallocated output array.
"""

from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.math cimport M_PI, exp, fabs, log, log1p, sqrt, erfc
from numpy.random cimport bitgen_t


cdef double TRUNC = 0.64
cdef double LOG_SQRT_2PI = 0.9189385332046727


cdef inline double _unif(bitgen_t *rng) noexcept nogil:
    return rng.next_double(rng.state)


cdef inline double _expon(bitgen_t *rng) noexcept nogil:
    return -log(1.0 - rng.next_double(rng.state))


cdef double _norm(bitgen_t *rng) noexcept nogil:
    # polar method; the pair partner is discarded
    cdef double u, v, s
    while True:
        u = 2.0 * rng.next_double(rng.state) - 1.0
        v = 2.0 * rng.next_double(rng.state) - 1.0
        s = u * u + v * v
        if 0.0 < s < 1.0:
            return u * sqrt(-2.0 * log(s) / s)


cdef inline double _log_ndtr(double x) noexcept nogil:
    # lower-tail asymptotic expansion below -10 keeps exp(x0 +- z + log Phi)
    # finite where erfc underflows
    cdef double y
    if x > -10.0:
        return log(0.5 * erfc(-x / sqrt(2.0)))
    y = 1.0 / (x * x)
    return -0.5 * x * x - log(-x) - LOG_SQRT_2PI + log1p(-y * (1.0 - 3.0 * y))


cdef double _mass_texpon(double z) noexcept nogil:
    # probability that a proposal comes from the exponential-tail piece
    cdef double t = TRUNC
    cdef double fz = 0.125 * M_PI * M_PI + 0.5 * z * z
    cdef double b = sqrt(1.0 / t) * (t * z - 1.0)
    cdef double a = -sqrt(1.0 / t) * (t * z + 1.0)
    cdef double x0 = log(fz) + fz * t
    cdef double xb = x0 - z + _log_ndtr(b)
    cdef double xa = x0 + z + _log_ndtr(a)
    cdef double qdivp = 4.0 / M_PI * (exp(xb) + exp(xa))
    return 1.0 / (1.0 + qdivp)


cdef inline double _a_coef(int n, double x) noexcept nogil:
    cdef double k = (n + 0.5) * M_PI
    if x > TRUNC:
        return k * exp(-0.5 * k * k * x)
    elif x > 0.0:
        return exp(-1.5 * (log(0.5 * M_PI) + log(x)) + log(k)
                   - 2.0 * (n + 0.5) * (n + 0.5) / x)
    return 0.0


cdef double _rtigauss(bitgen_t *rng, double z) noexcept nogil:
    # inverse-Gaussian(mu = 1/z, lambda = 1) truncated to (0, TRUNC]
    cdef double t = TRUNC
    cdef double x = t + 1.0
    cdef double alpha, e1, e2, mu, y, mu_y
    if z < 1.0 / t:
        # mu > t: squeeze proposal on (0, t]
        alpha = 0.0
        while _unif(rng) > alpha:
            e1 = _expon(rng)
            e2 = _expon(rng)
            while e1 * e1 > 2.0 * e2 / t:
                e1 = _expon(rng)
                e2 = _expon(rng)
            x = t / ((1.0 + t * e1) * (1.0 + t * e1))
            alpha = exp(-0.5 * z * z * x)
    else:
        mu = 1.0 / z
        while x > t:
            y = _norm(rng)
            y = y * y
            mu_y = mu * y
            x = mu + 0.5 * mu * mu_y - 0.5 * mu * sqrt(4.0 * mu_y + mu_y * mu_y)
            if _unif(rng) > mu / (mu + x):
                x = mu * mu / x
    return x


cdef double _draw_pg1(bitgen_t *rng, double psi) noexcept nogil:
    cdef double z = 0.5 * fabs(psi)
    cdef double fz = 0.125 * M_PI * M_PI + 0.5 * z * z
    cdef double p_exp = _mass_texpon(z)
    cdef double x, s, y
    cdef int n
    while True:
        if _unif(rng) < p_exp:
            x = TRUNC + _expon(rng) / fz
        else:
            x = _rtigauss(rng, z)
        s = _a_coef(0, x)
        y = _unif(rng) * s
        n = 0
        while True:
            n += 1
            if n & 1:
                s -= _a_coef(n, x)
                if y <= s:
                    return 0.25 * x
            else:
                s += _a_coef(n, x)
                if y > s:
                    break


def draw_pg1_into(object bit_generator, double[::1] psi, double[::1] out):
    """Fill ``out[i]`` with a PG(1, psi[i]) draw from ``bit_generator``'s stream."""
    cdef bitgen_t *rng = <bitgen_t *> PyCapsule_GetPointer(
        bit_generator.capsule, "BitGenerator")
    cdef Py_ssize_t i, n = psi.shape[0]
    if out.shape[0] != n:
        raise ValueError("output length does not match input length")
    with bit_generator.lock, nogil:
        for i in range(n):
            out[i] = _draw_pg1(rng, psi[i])
