"""Compiled integration kernels for the built-in models.

Everything here is numba-compiled with ``cache=True`` so the first import in a
fresh environment pays the JIT cost once and later processes load machine code
from the on-disk cache. To keep the cache valid the kernels avoid dynamic
globals: the Dormand-Prince tableau and the dense-output interpolant are plain
scalar constants, and the right-hand sides are selected through an integer
model id instead of being passed as function values (first-class jitted
functions defeat ``cache=True``).

Models outside this registry integrate through the pure-numpy fallback in
:mod:`cuqdyn.ode`, which implements the identical algorithm.
"""

import numpy as np
from numba import njit

# integer ids used by cuqdyn.ode.integrate to route to the compiled path
KID_LOGISTIC = 0
KID_LOTKA_VOLTERRA = 1
KID_ALPHA_PINENE = 2
KID_NFKB = 3

# status codes returned by _dp45
OK = 0
STEP_LIMIT = 1
NON_FINITE = 2

# Dormand-Prince 4(5) tableau
A21 = 1.0 / 5.0
A31, A32 = 3.0 / 40.0, 9.0 / 40.0
A41, A42, A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
A51, A52, A53, A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
A61, A62, A63, A64, A65 = (
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
)
B1, B3, B4, B5, B6 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
# fifth-minus-fourth order error weights
E1, E3, E4, E5, E6, E7 = (
    71.0 / 57600.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
)
# order-4 continuous extension (Shampine); row 1 of the matrix is all zero
P00, P01, P02, P03 = 1.0, -8048581381.0 / 2820520608.0, 8663915743.0 / 2820520608.0, -12715105075.0 / 11282082432.0
P21, P22, P23 = 131558114200.0 / 32700410799.0, -68118460800.0 / 10900136933.0, 87487479700.0 / 32700410799.0
P31, P32, P33 = -1754552775.0 / 470086768.0, 14199869525.0 / 1410260304.0, -10690763975.0 / 1880347072.0
P41, P42, P43 = 127303824393.0 / 49829197408.0, -318862633887.0 / 49829197408.0, 701980252875.0 / 199316789632.0
P51, P52, P53 = -282668133.0 / 205662961.0, 2019193451.0 / 616988883.0, -1453857185.0 / 822651844.0
P61, P62, P63 = 40617522.0 / 29380423.0, -110615467.0 / 29380423.0, 69997945.0 / 29380423.0


@njit(cache=True, nogil=True)
def logistic_rhs(x, theta, t):
    # theta = (r, K)
    out = np.empty(1)
    out[0] = theta[0] * x[0] * (1.0 - x[0] / theta[1])
    return out


@njit(cache=True, nogil=True)
def lotka_volterra_rhs(x, theta, t):
    # theta = (alpha, beta, gamma, delta); x = (prey, predator)
    out = np.empty(2)
    out[0] = x[0] * (theta[0] - theta[1] * x[1])
    out[1] = -x[1] * (theta[2] - theta[3] * x[0])
    return out


@njit(cache=True, nogil=True)
def alpha_pinene_rhs(x, theta, t):
    # theta = (p1..p5); linear kinetics, total mass is conserved
    p1, p2, p3, p4, p5 = theta[0], theta[1], theta[2], theta[3], theta[4]
    out = np.empty(5)
    out[0] = -(p1 + p2) * x[0]
    out[1] = p1 * x[0]
    out[2] = p2 * x[0] - (p3 + p4) * x[2] + p5 * x[4]
    out[3] = p3 * x[2]
    out[4] = p4 * x[2] - p5 * x[4]
    return out


@njit(cache=True, nogil=True)
def nfkb_rhs(x, theta, t):
    # State order (documented in cuqdyn.models):
    #  0 IKKn, 1 IKKa, 2 IKKi, 3 IKKaIkBa, 4 IKKaIkBaNFkB, 5 NFkB, 6 NFkBn,
    #  7 A20, 8 A20t, 9 IkBa, 10 IkBan, 11 IkBat, 12 IkBaNFkB,
    #  13 IkBanNFkBn, 14 cgent
    ikkn = x[0]
    ikka = x[1]
    ikki = x[2]
    ikka_ikba = x[3]
    ikka_ikba_nfkb = x[4]
    nfkb = x[5]
    nfkbn = x[6]
    a20 = x[7]
    a20t = x[8]
    ikba = x[9]
    ikban = x[10]
    ikbat = x[11]
    ikba_nfkb = x[12]
    ikban_nfkbn = x[13]
    cgent = x[14]

    a1 = theta[0]
    a2 = theta[1]
    t1 = theta[2]
    a3 = theta[3]
    t2 = theta[4]
    c1a = theta[5]
    c2a = theta[6]
    c3a = theta[7]
    c4a = theta[8]
    c5a = theta[9]
    c6a = theta[10]
    c1 = theta[11]
    c2 = theta[12]
    c3 = theta[13]
    c4 = theta[14]
    c5 = theta[15]
    k1 = theta[16]
    k2 = theta[17]
    k3 = theta[18]
    kprod = theta[19]
    kdeg = theta[20]
    kv = theta[21]
    i1 = theta[22]
    e2a = theta[23]
    i1a = theta[24]
    e1a = theta[25]
    c1c = theta[26]
    c2c = theta[27]
    c3c = theta[28]

    # persistent stimulation: the input signal is held at 1 over the horizon
    tr = 1.0

    out = np.empty(15)
    out[0] = kprod - kdeg * ikkn - tr * k1 * ikkn
    out[1] = (
        tr * k1 * ikkn
        - k3 * ikka
        - tr * k2 * ikka * a20
        - kdeg * ikka
        - a2 * ikka * ikba
        + t1 * ikka_ikba
        - a3 * ikka * ikba_nfkb
        + t2 * ikka_ikba_nfkb
    )
    out[2] = k3 * ikka + tr * k2 * ikka * a20 - kdeg * ikki
    out[3] = a2 * ikka * ikba - t1 * ikka_ikba
    out[4] = a3 * ikka * ikba_nfkb - t2 * ikka_ikba_nfkb
    out[5] = c6a * ikba_nfkb - a1 * nfkb * ikba + t2 * ikka_ikba_nfkb - i1 * nfkb
    out[6] = i1 * kv * nfkb - a1 * ikban * nfkbn
    out[7] = c4 * a20t - c5 * a20
    out[8] = c2 + c1 * nfkbn - c3 * a20t
    out[9] = (
        -a2 * ikka * ikba
        - a1 * ikba * nfkb
        + c4a * ikbat
        - c5a * ikba
        - i1a * ikba
        + e1a * ikban
    )
    out[10] = -a1 * ikban * nfkbn + i1a * kv * ikba - e1a * kv * ikban
    out[11] = c2a + c1a * nfkbn - c3a * ikbat
    out[12] = (
        a1 * ikba * nfkb
        - c6a * ikba_nfkb
        - a3 * ikka * ikba_nfkb
        + e2a * ikban_nfkbn
    )
    out[13] = a1 * ikban * nfkbn - e2a * kv * ikban_nfkbn
    out[14] = c2c + c1c * nfkbn - c3c * cgent
    return out


@njit(cache=True, nogil=True)
def _rhs(kid, x, theta, t):
    if kid == 0:
        return logistic_rhs(x, theta, t)
    elif kid == 1:
        return lotka_volterra_rhs(x, theta, t)
    elif kid == 2:
        return alpha_pinene_rhs(x, theta, t)
    else:
        return nfkb_rhs(x, theta, t)


@njit(cache=True, nogil=True)
def _initial_step(kid, t0, x0, f0, theta, direction, rtol, atol):
    # Hairer-style hinit: try h from the ratio of state to derivative norms,
    # refine with one explicit Euler probe of the second derivative.
    n = x0.shape[0]
    d0 = 0.0
    d1 = 0.0
    for i in range(n):
        sc = atol + rtol * abs(x0[i])
        d0 += (x0[i] / sc) ** 2
        d1 += (f0[i] / sc) ** 2
    d0 = np.sqrt(d0 / n)
    d1 = np.sqrt(d1 / n)
    if d0 < 1e-5 or d1 < 1e-5:
        h0 = 1e-6
    else:
        h0 = 0.01 * d0 / d1
    x1 = x0 + h0 * direction * f0
    f1 = _rhs(kid, x1, theta, t0 + h0 * direction)
    d2 = 0.0
    for i in range(n):
        sc = atol + rtol * abs(x0[i])
        d2 += ((f1[i] - f0[i]) / sc) ** 2
    d2 = np.sqrt(d2 / n) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100.0 * h0, h1)


@njit(cache=True, nogil=True)
def _dp45(kid, x0, theta, t_eval, rtol, atol, max_steps, h_init):
    """Adaptive Dormand-Prince 4(5) sweep over t_eval.

    Returns (status, X) with X of shape (len(t_eval), n). Requested points are
    filled from the order-4 continuous extension of each accepted step, so the
    step sequence is independent of the evaluation grid. Step size follows the
    PI controller (safety 0.9, beta 0.04) with growth clamped to [0.2, 10] and
    no growth immediately after a rejection.
    """
    n = x0.shape[0]
    m = t_eval.shape[0]
    X = np.empty((m, n))
    t = t_eval[0]
    tf = t_eval[m - 1]
    x = x0.copy()
    for i in range(n):
        if not np.isfinite(x[i]):
            return NON_FINITE, X
    X[0] = x
    idx = 1
    if idx >= m:
        return OK, X

    direction = 1.0 if tf > t else -1.0
    f = _rhs(kid, x, theta, t)
    for i in range(n):
        if not np.isfinite(f[i]):
            return NON_FINITE, X
    if h_init > 0.0:
        h = h_init
    else:
        h = _initial_step(kid, t, x, f, theta, direction, rtol, atol)
    h = min(h, abs(tf - t))

    safety = 0.9
    beta = 0.04
    expo1 = 0.2 - 0.75 * beta
    facc1 = 5.0   # 1 / max shrink factor
    facc2 = 0.1   # 1 / max growth factor
    facold = 1e-4
    rejected = False
    K = np.empty((7, n))
    nsteps = 0

    while direction * (tf - t) > 0.0:
        nsteps += 1
        if nsteps > max_steps:
            return STEP_LIMIT, X
        h = min(h, abs(tf - t))
        hd = h * direction
        if t + hd == t:
            if t + (tf - t) == t:
                # remaining span is below rounding resolution: snap to the end
                while idx < m:
                    X[idx] = x
                    idx += 1
                return OK, X
            # step size underflowed mid-span, the solution cannot advance
            return STEP_LIMIT, X

        K[0] = f
        K[1] = _rhs(kid, x + hd * (A21 * K[0]), theta, t + 0.2 * hd)
        K[2] = _rhs(kid, x + hd * (A31 * K[0] + A32 * K[1]), theta, t + 0.3 * hd)
        K[3] = _rhs(kid, x + hd * (A41 * K[0] + A42 * K[1] + A43 * K[2]), theta, t + 0.8 * hd)
        K[4] = _rhs(
            kid,
            x + hd * (A51 * K[0] + A52 * K[1] + A53 * K[2] + A54 * K[3]),
            theta,
            t + (8.0 / 9.0) * hd,
        )
        K[5] = _rhs(
            kid,
            x + hd * (A61 * K[0] + A62 * K[1] + A63 * K[2] + A64 * K[3] + A65 * K[4]),
            theta,
            t + hd,
        )
        x_new = x + hd * (B1 * K[0] + B3 * K[2] + B4 * K[3] + B5 * K[4] + B6 * K[5])
        t_new = t + hd
        K[6] = _rhs(kid, x_new, theta, t_new)

        finite = True
        for i in range(n):
            if not (np.isfinite(x_new[i]) and np.isfinite(K[6, i])):
                finite = False
        if not finite:
            return NON_FINITE, X

        # RMS error norm scaled by atol + rtol*max(|x|, |x_new|)
        err = 0.0
        for i in range(n):
            e = hd * (
                E1 * K[0, i]
                + E3 * K[2, i]
                + E4 * K[3, i]
                + E5 * K[4, i]
                + E6 * K[5, i]
                + E7 * K[6, i]
            )
            sc = atol + rtol * max(abs(x[i]), abs(x_new[i]))
            err += (e / sc) ** 2
        err = np.sqrt(err / n)

        if err <= 1.0:
            # fill requested points inside (t, t_new] from the interpolant
            while idx < m and direction * (t_eval[idx] - t_new) <= 0.0:
                sig = (t_eval[idx] - t) / hd
                s2 = sig * sig
                s3 = s2 * sig
                s4 = s3 * sig
                for i in range(n):
                    acc = K[0, i] * (P00 * sig + P01 * s2 + P02 * s3 + P03 * s4)
                    acc += K[2, i] * (P21 * s2 + P22 * s3 + P23 * s4)
                    acc += K[3, i] * (P31 * s2 + P32 * s3 + P33 * s4)
                    acc += K[4, i] * (P41 * s2 + P42 * s3 + P43 * s4)
                    acc += K[5, i] * (P51 * s2 + P52 * s3 + P53 * s4)
                    acc += K[6, i] * (P61 * s2 + P62 * s3 + P63 * s4)
                    X[idx, i] = x[i] + hd * acc
                idx += 1
            t = t_new
            x = x_new
            # keep f an independent buffer: aliasing K[6] would corrupt the
            # first stage of a retried step after a rejection
            for i in range(n):
                f[i] = K[6, i]
            fac11 = err ** expo1
            fac = fac11 / (facold ** beta)
            fac = max(facc2, min(facc1, fac / safety))
            h_new = h / fac
            if rejected:
                h_new = min(h_new, h)
            h = h_new
            facold = max(err, 1e-4)
            rejected = False
        else:
            fac11 = err ** expo1
            h = h / min(facc1, fac11 / safety)
            rejected = True

    return OK, X
