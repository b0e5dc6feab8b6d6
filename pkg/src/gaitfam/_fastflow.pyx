# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled stepping loop for the two-link walker in stance coordinates.

Expression-for-expression twin of ``gaitfam._flow_py.flow_end``; compiled
with FP contraction off so both produce identical bits.
"""

from libc.math cimport sin, cos, sqrt, fabs, pow

cdef double SAFETY = 0.9
cdef double MIN_FACTOR = 0.2
cdef double MAX_FACTOR = 10.0
cdef long MAX_STEPS = 100000

cdef inline void _rhs(double ca, double cb, double mlb, double g1, double g2,
                      double bu1, double bu2, double mu0, double omega,
                      double t, double y1, double y2, double y3, double y4,
                      double* out) nogil:
    cdef double s12 = sin(y1 - y2)
    cdef double c12 = cos(y1 - y2)
    cdef double m12 = -mlb * c12
    cdef double u = mu0 * sin(omega * t)
    cdef double r1 = bu1 * u + mlb * s12 * y4 * y4 + g1 * sin(y1)
    cdef double r2 = bu2 * u - mlb * s12 * y3 * y3 - g2 * sin(y2)
    cdef double det = ca * cb - m12 * m12
    out[0] = y3
    out[1] = y4
    out[2] = (cb * r1 - m12 * r2) / det
    out[3] = (ca * r2 - m12 * r1) / det


def flow_end(double ca, double cb, double mlb, double g1, double g2,
             double bu1, double bu2, double mu0, double omega,
             double q1, double q2, double w1, double w2,
             double tau, double rtol, double atol):
    """See ``gaitfam._flow_py.flow_end``."""
    cdef double c2 = 0.2
    cdef double c3 = 0.3
    cdef double c4 = 0.8
    cdef double c5 = 8.0 / 9.0
    cdef double a21 = 0.2
    cdef double a31 = 3.0 / 40.0
    cdef double a32 = 9.0 / 40.0
    cdef double a41 = 44.0 / 45.0
    cdef double a42 = -56.0 / 15.0
    cdef double a43 = 32.0 / 9.0
    cdef double a51 = 19372.0 / 6561.0
    cdef double a52 = -25360.0 / 2187.0
    cdef double a53 = 64448.0 / 6561.0
    cdef double a54 = -212.0 / 729.0
    cdef double a61 = 9017.0 / 3168.0
    cdef double a62 = -355.0 / 33.0
    cdef double a63 = 46732.0 / 5247.0
    cdef double a64 = 49.0 / 176.0
    cdef double a65 = -5103.0 / 18656.0
    cdef double b1 = 35.0 / 384.0
    cdef double b3 = 500.0 / 1113.0
    cdef double b4 = 125.0 / 192.0
    cdef double b5 = -2187.0 / 6784.0
    cdef double b6 = 11.0 / 84.0
    cdef double e1 = 71.0 / 57600.0
    cdef double e3 = -71.0 / 16695.0
    cdef double e4 = 71.0 / 1920.0
    cdef double e5 = -17253.0 / 339200.0
    cdef double e6 = 22.0 / 525.0
    cdef double e7 = -1.0 / 40.0

    cdef double k[4]
    cdef double t = 0.0
    cdef double f1, f2, f3, f4
    cdef double sc1, sc2, sc3, sc4, d0, d1, d2, dm, h0, h
    cdef double p1, p2, p3, p4
    cdef double k21, k22, k23, k24, k31, k32, k33, k34
    cdef double k41, k42, k43, k44, k51, k52, k53, k54
    cdef double k61, k62, k63, k64, k71, k72, k73, k74
    cdef double y1, y2, y3, y4, er1, er2, er3, er4
    cdef double ay1, ay2, ay3, ay4, norm, factor
    cdef long nsteps = 0
    cdef long nrejected = 0

    _rhs(ca, cb, mlb, g1, g2, bu1, bu2, mu0, omega, 0.0, q1, q2, w1, w2, k)
    f1 = k[0]
    f2 = k[1]
    f3 = k[2]
    f4 = k[3]
    if tau == 0.0:
        return (q1, q2, w1, w2, f1, f2, f3, f4, 0, 0)

    sc1 = atol + rtol * fabs(q1)
    sc2 = atol + rtol * fabs(q2)
    sc3 = atol + rtol * fabs(w1)
    sc4 = atol + rtol * fabs(w2)
    d0 = sqrt(0.25 * ((q1 / sc1) ** 2 + (q2 / sc2) ** 2
                      + (w1 / sc3) ** 2 + (w2 / sc4) ** 2))
    d1 = sqrt(0.25 * ((f1 / sc1) ** 2 + (f2 / sc2) ** 2
                      + (f3 / sc3) ** 2 + (f4 / sc4) ** 2))
    if d0 < 1e-5 or d1 < 1e-5:
        h0 = 1e-6
    else:
        h0 = 0.01 * d0 / d1
    if h0 > tau:
        h0 = tau
    _rhs(ca, cb, mlb, g1, g2, bu1, bu2, mu0, omega, h0,
         q1 + h0 * f1, q2 + h0 * f2, w1 + h0 * f3, w2 + h0 * f4, k)
    p1 = k[0]
    p2 = k[1]
    p3 = k[2]
    p4 = k[3]
    d2 = sqrt(0.25 * (((p1 - f1) / sc1) ** 2 + ((p2 - f2) / sc2) ** 2
                      + ((p3 - f3) / sc3) ** 2 + ((p4 - f4) / sc4) ** 2)) / h0
    dm = d1 if d1 > d2 else d2
    if dm <= 1e-15:
        h = h0 * 1e-3
        if h < 1e-6:
            h = 1e-6
    else:
        h = pow(dm, -0.2) * 0.39810717055349725
    if h > 100.0 * h0:
        h = 100.0 * h0
    if h > tau:
        h = tau

    while t < tau:
        if nsteps + nrejected > MAX_STEPS:
            return (q1, q2, w1, w2, f1, f2, f3, f4, nsteps, -1)
        if h > tau - t:
            h = tau - t
        _rhs(ca, cb, mlb, g1, g2, bu1, bu2, mu0, omega, t + c2 * h,
             q1 + h * (a21 * f1), q2 + h * (a21 * f2),
             w1 + h * (a21 * f3), w2 + h * (a21 * f4), k)
        k21 = k[0]
        k22 = k[1]
        k23 = k[2]
        k24 = k[3]
        _rhs(ca, cb, mlb, g1, g2, bu1, bu2, mu0, omega, t + c3 * h,
             q1 + h * (a31 * f1 + a32 * k21),
             q2 + h * (a31 * f2 + a32 * k22),
             w1 + h * (a31 * f3 + a32 * k23),
             w2 + h * (a31 * f4 + a32 * k24), k)
        k31 = k[0]
        k32 = k[1]
        k33 = k[2]
        k34 = k[3]
        _rhs(ca, cb, mlb, g1, g2, bu1, bu2, mu0, omega, t + c4 * h,
             q1 + h * (a41 * f1 + a42 * k21 + a43 * k31),
             q2 + h * (a41 * f2 + a42 * k22 + a43 * k32),
             w1 + h * (a41 * f3 + a42 * k23 + a43 * k33),
             w2 + h * (a41 * f4 + a42 * k24 + a43 * k34), k)
        k41 = k[0]
        k42 = k[1]
        k43 = k[2]
        k44 = k[3]
        _rhs(ca, cb, mlb, g1, g2, bu1, bu2, mu0, omega, t + c5 * h,
             q1 + h * (a51 * f1 + a52 * k21 + a53 * k31 + a54 * k41),
             q2 + h * (a51 * f2 + a52 * k22 + a53 * k32 + a54 * k42),
             w1 + h * (a51 * f3 + a52 * k23 + a53 * k33 + a54 * k43),
             w2 + h * (a51 * f4 + a52 * k24 + a53 * k34 + a54 * k44), k)
        k51 = k[0]
        k52 = k[1]
        k53 = k[2]
        k54 = k[3]
        _rhs(ca, cb, mlb, g1, g2, bu1, bu2, mu0, omega, t + h,
             q1 + h * (a61 * f1 + a62 * k21 + a63 * k31 + a64 * k41 + a65 * k51),
             q2 + h * (a61 * f2 + a62 * k22 + a63 * k32 + a64 * k42 + a65 * k52),
             w1 + h * (a61 * f3 + a62 * k23 + a63 * k33 + a64 * k43 + a65 * k53),
             w2 + h * (a61 * f4 + a62 * k24 + a63 * k34 + a64 * k44 + a65 * k54), k)
        k61 = k[0]
        k62 = k[1]
        k63 = k[2]
        k64 = k[3]
        y1 = q1 + h * (b1 * f1 + b3 * k31 + b4 * k41 + b5 * k51 + b6 * k61)
        y2 = q2 + h * (b1 * f2 + b3 * k32 + b4 * k42 + b5 * k52 + b6 * k62)
        y3 = w1 + h * (b1 * f3 + b3 * k33 + b4 * k43 + b5 * k53 + b6 * k63)
        y4 = w2 + h * (b1 * f4 + b3 * k34 + b4 * k44 + b5 * k54 + b6 * k64)
        _rhs(ca, cb, mlb, g1, g2, bu1, bu2, mu0, omega, t + h, y1, y2, y3, y4, k)
        k71 = k[0]
        k72 = k[1]
        k73 = k[2]
        k74 = k[3]
        er1 = h * (e1 * f1 + e3 * k31 + e4 * k41 + e5 * k51 + e6 * k61 + e7 * k71)
        er2 = h * (e1 * f2 + e3 * k32 + e4 * k42 + e5 * k52 + e6 * k62 + e7 * k72)
        er3 = h * (e1 * f3 + e3 * k33 + e4 * k43 + e5 * k53 + e6 * k63 + e7 * k73)
        er4 = h * (e1 * f4 + e3 * k34 + e4 * k44 + e5 * k54 + e6 * k64 + e7 * k74)
        ay1 = fabs(q1) if fabs(q1) > fabs(y1) else fabs(y1)
        ay2 = fabs(q2) if fabs(q2) > fabs(y2) else fabs(y2)
        ay3 = fabs(w1) if fabs(w1) > fabs(y3) else fabs(y3)
        ay4 = fabs(w2) if fabs(w2) > fabs(y4) else fabs(y4)
        sc1 = atol + rtol * ay1
        sc2 = atol + rtol * ay2
        sc3 = atol + rtol * ay3
        sc4 = atol + rtol * ay4
        norm = sqrt(0.25 * ((er1 / sc1) ** 2 + (er2 / sc2) ** 2
                            + (er3 / sc3) ** 2 + (er4 / sc4) ** 2))
        if norm <= 1.0:
            t = t + h
            q1 = y1
            q2 = y2
            w1 = y3
            w2 = y4
            f1 = k71
            f2 = k72
            f3 = k73
            f4 = k74
            nsteps += 1
            if norm == 0.0:
                factor = MAX_FACTOR
            else:
                factor = SAFETY * pow(norm, -0.2)
                if factor > MAX_FACTOR:
                    factor = MAX_FACTOR
            if factor < MIN_FACTOR:
                factor = MIN_FACTOR
            h = h * factor
        else:
            nrejected += 1
            factor = SAFETY * pow(norm, -0.2)
            if factor < MIN_FACTOR:
                factor = MIN_FACTOR
            h = h * factor
    return (q1, q2, w1, w2, f1, f2, f3, f4, nsteps, nrejected)
