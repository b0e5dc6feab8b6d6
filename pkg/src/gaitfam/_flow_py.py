"""Pure-Python stepping loop for the two-link walker in stance coordinates.

This is the fallback twin of the compiled module ``gaitfam._fastflow``; the
two are kept expression-for-expression identical so that results match
bitwise (the extension is built with FP contraction disabled).  All state is
scalar ``float`` on purpose: the loop is the innermost kernel of every
residual, Jacobian and corrector evaluation.
"""

from math import sin, cos, sqrt

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0
MAX_STEPS = 100000


def flow_end(ca, cb, mlb, g1, g2, bu1, bu2, mu0, omega,
             q1, q2, w1, w2, tau, rtol, atol):
    """Integrate one stance phase of duration ``tau``.

    Coordinates are the absolute leg angles of the support leg (slot 1) and
    swing leg (slot 2).  Returns the final state, the final derivative and
    step counts:
    ``(q1, q2, w1, w2, f1, f2, f3, f4, nsteps, nrejected)``.
    """
    # Dormand-Prince 5(4) tableau.
    c2 = 0.2
    c3 = 0.3
    c4 = 0.8
    c5 = 8.0 / 9.0
    a21 = 0.2
    a31 = 3.0 / 40.0
    a32 = 9.0 / 40.0
    a41 = 44.0 / 45.0
    a42 = -56.0 / 15.0
    a43 = 32.0 / 9.0
    a51 = 19372.0 / 6561.0
    a52 = -25360.0 / 2187.0
    a53 = 64448.0 / 6561.0
    a54 = -212.0 / 729.0
    a61 = 9017.0 / 3168.0
    a62 = -355.0 / 33.0
    a63 = 46732.0 / 5247.0
    a64 = 49.0 / 176.0
    a65 = -5103.0 / 18656.0
    b1 = 35.0 / 384.0
    b3 = 500.0 / 1113.0
    b4 = 125.0 / 192.0
    b5 = -2187.0 / 6784.0
    b6 = 11.0 / 84.0
    e1 = 71.0 / 57600.0
    e3 = -71.0 / 16695.0
    e4 = 71.0 / 1920.0
    e5 = -17253.0 / 339200.0
    e6 = 22.0 / 525.0
    e7 = -1.0 / 40.0

    def rhs(t, y1, y2, y3, y4):
        s12 = sin(y1 - y2)
        c12 = cos(y1 - y2)
        m12 = -mlb * c12
        u = mu0 * sin(omega * t)
        r1 = bu1 * u + mlb * s12 * y4 * y4 + g1 * sin(y1)
        r2 = bu2 * u - mlb * s12 * y3 * y3 - g2 * sin(y2)
        det = ca * cb - m12 * m12
        return (y3, y4, (cb * r1 - m12 * r2) / det, (ca * r2 - m12 * r1) / det)

    t = 0.0
    f1, f2, f3, f4 = rhs(0.0, q1, q2, w1, w2)
    if tau == 0.0:
        return (q1, q2, w1, w2, f1, f2, f3, f4, 0, 0)

    # Initial step size from the local scale of the state and derivative.
    sc1 = atol + rtol * abs(q1)
    sc2 = atol + rtol * abs(q2)
    sc3 = atol + rtol * abs(w1)
    sc4 = atol + rtol * abs(w2)
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
    p1, p2, p3, p4 = rhs(h0, q1 + h0 * f1, q2 + h0 * f2, w1 + h0 * f3, w2 + h0 * f4)
    d2 = sqrt(0.25 * (((p1 - f1) / sc1) ** 2 + ((p2 - f2) / sc2) ** 2
                      + ((p3 - f3) / sc3) ** 2 + ((p4 - f4) / sc4) ** 2)) / h0
    dm = d1 if d1 > d2 else d2
    if dm <= 1e-15:
        h = h0 * 1e-3
        if h < 1e-6:
            h = 1e-6
    else:
        h = dm ** -0.2 * 0.39810717055349725  # (0.01)**0.2
    if h > 100.0 * h0:
        h = 100.0 * h0
    if h > tau:
        h = tau

    nsteps = 0
    nrejected = 0
    while t < tau:
        if nsteps + nrejected > MAX_STEPS:
            return (q1, q2, w1, w2, f1, f2, f3, f4, nsteps, -1)
        if h > tau - t:
            h = tau - t
        k21, k22, k23, k24 = rhs(t + c2 * h,
                                 q1 + h * (a21 * f1), q2 + h * (a21 * f2),
                                 w1 + h * (a21 * f3), w2 + h * (a21 * f4))
        k31, k32, k33, k34 = rhs(t + c3 * h,
                                 q1 + h * (a31 * f1 + a32 * k21),
                                 q2 + h * (a31 * f2 + a32 * k22),
                                 w1 + h * (a31 * f3 + a32 * k23),
                                 w2 + h * (a31 * f4 + a32 * k24))
        k41, k42, k43, k44 = rhs(t + c4 * h,
                                 q1 + h * (a41 * f1 + a42 * k21 + a43 * k31),
                                 q2 + h * (a41 * f2 + a42 * k22 + a43 * k32),
                                 w1 + h * (a41 * f3 + a42 * k23 + a43 * k33),
                                 w2 + h * (a41 * f4 + a42 * k24 + a43 * k34))
        k51, k52, k53, k54 = rhs(t + c5 * h,
                                 q1 + h * (a51 * f1 + a52 * k21 + a53 * k31 + a54 * k41),
                                 q2 + h * (a51 * f2 + a52 * k22 + a53 * k32 + a54 * k42),
                                 w1 + h * (a51 * f3 + a52 * k23 + a53 * k33 + a54 * k43),
                                 w2 + h * (a51 * f4 + a52 * k24 + a53 * k34 + a54 * k44))
        k61, k62, k63, k64 = rhs(t + h,
                                 q1 + h * (a61 * f1 + a62 * k21 + a63 * k31 + a64 * k41 + a65 * k51),
                                 q2 + h * (a61 * f2 + a62 * k22 + a63 * k32 + a64 * k42 + a65 * k52),
                                 w1 + h * (a61 * f3 + a62 * k23 + a63 * k33 + a64 * k43 + a65 * k53),
                                 w2 + h * (a61 * f4 + a62 * k24 + a63 * k34 + a64 * k44 + a65 * k54))
        y1 = q1 + h * (b1 * f1 + b3 * k31 + b4 * k41 + b5 * k51 + b6 * k61)
        y2 = q2 + h * (b1 * f2 + b3 * k32 + b4 * k42 + b5 * k52 + b6 * k62)
        y3 = w1 + h * (b1 * f3 + b3 * k33 + b4 * k43 + b5 * k53 + b6 * k63)
        y4 = w2 + h * (b1 * f4 + b3 * k34 + b4 * k44 + b5 * k54 + b6 * k64)
        k71, k72, k73, k74 = rhs(t + h, y1, y2, y3, y4)
        er1 = h * (e1 * f1 + e3 * k31 + e4 * k41 + e5 * k51 + e6 * k61 + e7 * k71)
        er2 = h * (e1 * f2 + e3 * k32 + e4 * k42 + e5 * k52 + e6 * k62 + e7 * k72)
        er3 = h * (e1 * f3 + e3 * k33 + e4 * k43 + e5 * k53 + e6 * k63 + e7 * k73)
        er4 = h * (e1 * f4 + e3 * k34 + e4 * k44 + e5 * k54 + e6 * k64 + e7 * k74)
        ay1 = abs(q1) if abs(q1) > abs(y1) else abs(y1)
        ay2 = abs(q2) if abs(q2) > abs(y2) else abs(y2)
        ay3 = abs(w1) if abs(w1) > abs(y3) else abs(y3)
        ay4 = abs(w2) if abs(w2) > abs(y4) else abs(y4)
        sc1 = atol + rtol * ay1
        sc2 = atol + rtol * ay2
        sc3 = atol + rtol * ay3
        sc4 = atol + rtol * ay4
        norm = sqrt(0.25 * ((er1 / sc1) ** 2 + (er2 / sc2) ** 2
                            + (er3 / sc3) ** 2 + (er4 / sc4) ** 2))
        if norm <= 1.0:
            t = t + h
            q1, q2, w1, w2 = y1, y2, y3, y4
            f1, f2, f3, f4 = k71, k72, k73, k74
            nsteps += 1
            if norm == 0.0:
                factor = MAX_FACTOR
            else:
                factor = SAFETY * norm ** -0.2
                if factor > MAX_FACTOR:
                    factor = MAX_FACTOR
            if factor < MIN_FACTOR:
                factor = MIN_FACTOR
            h = h * factor
        else:
            nrejected += 1
            factor = SAFETY * norm ** -0.2
            if factor < MIN_FACTOR:
                factor = MIN_FACTOR
            h = h * factor
    return (q1, q2, w1, w2, f1, f2, f3, f4, nsteps, nrejected)
