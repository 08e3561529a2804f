"""Compiled numeric core: density-of-states primitives and collision sums.

Kernels are compiled with numba when available and run as pure Python
otherwise (identical results, much slower).  Everything here works on raw
float64 arrays; unit handling and bookkeeping live in the calling modules.

Grid conventions shared with the brute-force reference implementations in
the test suite:

* energy nodes are uniform in the shifted energy eps_bar = eps - mu, with
  node 0 at eps_bar = 0;
* collision integrals use the plain node spacing dx as quadrature weight
  (their integrands vanish at every domain boundary because the density of
  states vanishes at eps_bar = 0), which makes pair-exchange cancellations
  exact in floating point;
* occupations are passed zero-padded to twice the grid length so scattering
  partners that land above the top of the grid are treated as unoccupied.
"""

from __future__ import annotations

import math

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency normally
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(func):
            return func

        return wrap


# ---------------------------------------------------------------------------
# semiclassical density of states above a Thomas-Fermi condensate
# ---------------------------------------------------------------------------

@njit(cache=True)
def ib_minus(eb: float, mu: float, hw: float) -> float:
    """Inner part of the shifted density of states (dimensionless).

    Antiderivative of u^3/... evaluated between x = sqrt(max(0, -a-)) and
    x = sqrt(2 mu / hw), with a- = 2 (eb - mu) / hw and u = sqrt(a- + x^2).
    Vanishes identically for mu = 0.
    """
    am = 2.0 * (eb - mu) / hw
    x_hi = math.sqrt(2.0 * mu / hw) if mu > 0.0 else 0.0
    x_lo = math.sqrt(-am) if am < 0.0 else 0.0
    if x_hi <= x_lo:
        return 0.0

    u_hi = math.sqrt(max(am + x_hi * x_hi, 0.0))
    val = u_hi * u_hi * u_hi * x_hi / 4.0 - am * u_hi * x_hi / 8.0
    if x_hi + u_hi > 0.0 and am != 0.0:
        val -= am * am / 8.0 * math.log(x_hi + u_hi)

    u_lo = math.sqrt(max(am + x_lo * x_lo, 0.0))
    low = u_lo * u_lo * u_lo * x_lo / 4.0 - am * u_lo * x_lo / 8.0
    if x_lo + u_lo > 0.0 and am != 0.0:
        low -= am * am / 8.0 * math.log(x_lo + u_lo)
    return val - low


@njit(cache=True)
def ib_plus(eb: float, mu: float, hw: float) -> float:
    """Outer part of the shifted density of states (dimensionless).

    Evaluated between x = sqrt(2 mu / hw) and x = sqrt(a+), with
    a+ = 2 (eb + mu) / hw and u = sqrt(a+ - x^2).  For mu = 0 this reduces
    to pi a+^2 / 16, the harmonic-trap result.
    """
    ap = 2.0 * (eb + mu) / hw
    if ap <= 0.0:
        return 0.0
    x_lo = math.sqrt(2.0 * mu / hw) if mu > 0.0 else 0.0
    x_hi = math.sqrt(ap)
    if x_hi <= x_lo:
        return 0.0
    sq = math.sqrt(ap)

    # antiderivative at x_hi: u = 0, asin(1) = pi/2
    val = ap * ap / 8.0 * (math.pi / 2.0)

    u_lo = math.sqrt(max(ap - x_lo * x_lo, 0.0))
    arg = x_lo / sq
    if arg > 1.0:
        arg = 1.0
    low = (-u_lo * u_lo * u_lo * x_lo / 4.0 + ap * u_lo * x_lo / 8.0
           + ap * ap / 8.0 * math.asin(arg))
    return val - low


@njit(cache=True)
def fill_dos(eps: np.ndarray, mu: float, hw: float):
    """Shifted DOS rho_bar and its two parts on a node array.

    Returns (rho_bar, i_minus, i_plus); rho_bar = 2/(pi hw) (I- + I+), 1/J.
    """
    n = eps.size
    rho = np.empty(n)
    im = np.empty(n)
    ip = np.empty(n)
    c = 2.0 / (math.pi * hw)
    for i in range(n):
        im[i] = ib_minus(eps[i], mu, hw)
        ip[i] = ib_plus(eps[i], mu, hw)
        rho[i] = c * (im[i] + ip[i])
    return rho, im, ip


# ---------------------------------------------------------------------------
# thermal-thermal collisions
# ---------------------------------------------------------------------------

@njit(cache=True)
def tt_collision_sum(gpad: np.ndarray, rho: np.ndarray, n: int) -> np.ndarray:
    """Energy redistribution rate of thermal-thermal collisions.

    Computes, for every output node i,

        out[i] = sum_{s} [ Q_i(s) * G_P(i, s) - P_i(s) * G_Q(i, s) ]

    which is the double sum over collision partners of
    rho(min(e1, e2, e3, e4)) * [g3 g4 (1 + g1 + g2) - g1 g2 (1 + g3 + g4)]
    with e4 = e1 + e2 - e3 eliminated on the uniform grid.  The caller
    multiplies by (collision constant) * dx^2.

    gpad must have length >= 2 n - 1 with occupations beyond the truncation
    set to zero (or to an untruncated distribution for equilibrium checks).
    P and Q are symmetric under k <-> s - k, so partner sums are binned by
    m = min(k, s - k) and split by prefix/suffix sums around m1 = min(i, s-i),
    using rho[min(m1, m)] = rho[m1] for m >= m1 and rho[m] otherwise.
    """
    out = np.zeros(n)

    # highest occupied node bounds the totals that can contribute
    kmax = -1
    for k in range(2 * n - 1):
        if gpad[k] != 0.0:
            kmax = k
    if kmax < 0:
        return out
    s_top = min(2 * n - 2, 2 * kmax)

    psym = np.empty(n)
    qsym = np.empty(n)
    suf_p = np.empty(n + 1)
    suf_q = np.empty(n + 1)
    pre_p = np.empty(n + 1)
    pre_q = np.empty(n + 1)

    for s in range(s_top + 1):
        m_top = s // 2
        for m in range(m_top + 1):
            ga = gpad[m]
            gb = gpad[s - m]
            p = ga * gb
            q = 1.0 + ga + gb
            if 2 * m < s:
                p *= 2.0
                q *= 2.0
            psym[m] = p
            qsym[m] = q
        suf_p[m_top + 1] = 0.0
        suf_q[m_top + 1] = 0.0
        for m in range(m_top, -1, -1):
            suf_p[m] = suf_p[m + 1] + psym[m]
            suf_q[m] = suf_q[m + 1] + qsym[m]
        pre_p[0] = 0.0
        pre_q[0] = 0.0
        for m in range(m_top + 1):
            pre_p[m + 1] = pre_p[m] + rho[m] * psym[m]
            pre_q[m + 1] = pre_q[m] + rho[m] * qsym[m]

        i_hi = s if s < n else n - 1
        for i in range(i_hi + 1):
            gi = gpad[i]
            gj = gpad[s - i]
            p_i = gi * gj
            q_i = 1.0 + gi + gj
            m1 = i if i <= s - i else s - i
            gp = rho[m1] * suf_p[m1] + pre_p[m1]
            gq = rho[m1] * suf_q[m1] + pre_q[m1]
            out[i] += q_i * gp - p_i * gq
    return out


# ---------------------------------------------------------------------------
# thermal-condensate collisions
# ---------------------------------------------------------------------------

@njit(cache=True)
def tc_collision_sum(gpad: np.ndarray, eps: np.ndarray, dx: float,
                     mu: float, n0: float, n: int):
    """Collision exchange between the condensate and pairs of thermal atoms.

    One condensate atom plus a thermal atom at e2 converts to thermal atoms
    at e3 and e4 = e2 - e3, and back.  Each ordered pair (k, l) of final
    nodes carries the bracket

        b = (1 + g2) g3 g4 - g2 (1 + g3) (1 + g4),   g2 = gpad[k + l],

    weighted by the condensate atoms within the Thomas-Fermi shell where the
    mean-field shift stays below
    u- = 2/3 [(e3 + e4) - sqrt(e3^2 - e3 e4 + e4^2)].

    Returns (out, goff): out[i] is the net rate density at node i with one
    factor dx folded in; goff collects survivor gain that lands above the
    top of the grid (already integrated, one extra dx).  Both lack the
    collision constant prefactor.
    """
    out = np.zeros(n)
    goff = 0.0
    if n0 <= 0.0:
        return out, goff
    for k in range(n):
        gk = gpad[k]
        e3 = eps[k]
        for l in range(n):
            gl = gpad[l]
            s = k + l
            g2 = gpad[s]
            fwd = gk * gl
            if fwd == 0.0 and g2 == 0.0:
                continue
            b = (1.0 + g2) * fwd - g2 * (1.0 + gk) * (1.0 + gl)
            if b == 0.0:
                continue
            e4 = eps[l]
            um = (2.0 / 3.0) * (e3 + e4
                                - math.sqrt(e3 * e3 - e3 * e4 + e4 * e4))
            if mu > 0.0 and um < mu:
                q = 1.0 - um / mu
                vol = n0 * (1.0 - math.sqrt(q) * q * (2.5 - 1.5 * q))
            else:
                vol = n0
            if vol == 0.0:
                continue
            w = b * vol * dx
            out[k] -= w
            out[l] -= w
            if s < n:
                out[s] += w
            else:
                goff += w * dx
    return out, goff


# ---------------------------------------------------------------------------
# three-body loss spatial integrals
# ---------------------------------------------------------------------------

@njit(cache=True)
def three_body_spatials(eps: np.ndarray, g: np.ndarray, wgt: np.ndarray,
                        uq: np.ndarray, wq: np.ndarray, mu: float,
                        half_m_w2: float, g_int: float, c_rho: float):
    """Radial integrals entering three-body loss, on a shared radial grid.

    For each energy node the local density of states is
    c_rho * sqrt(eps_bar - ueff(u)) with ueff = |mu - V(u)|, and the thermal
    density n_t(u) is its occupation-weighted integral using the same grid
    weights as every other number integral, so the decomposition identity
    between per-node rates and total density moments holds to rounding.

    Returns (s_th, s_cd, m_nc3, m_nc2nt, m_ncnt2, m_nt3) where

        s_th[i] = int d3r rho_loc(eps_i, r) (3 nc^2 + 12 nc nt + 6 nt^2)
        s_cd[i] = int d3r rho_loc(eps_i, r) (6 nc^2 + 6 nc nt)

    and m_* are int d3r of nc^3, nc^2 nt, nc nt^2, nt^3.
    """
    n = eps.size
    nq = uq.size
    nc = np.empty(nq)
    nt = np.empty(nq)
    ueff = np.empty(nq)
    vw = np.empty(nq)
    for q in range(nq):
        d = mu - half_m_w2 * uq[q] * uq[q]
        if d > 0.0:
            nc[q] = d / g_int
            ueff[q] = d
        else:
            nc[q] = 0.0
            ueff[q] = -d
        vw[q] = 4.0 * math.pi * uq[q] * uq[q] * wq[q]
        acc = 0.0
        for i in range(n):
            e = eps[i] - ueff[q]
            if e > 0.0 and g[i] != 0.0:
                acc += wgt[i] * g[i] * math.sqrt(e)
        nt[q] = c_rho * acc

    m_nc3 = 0.0
    m_nc2nt = 0.0
    m_ncnt2 = 0.0
    m_nt3 = 0.0
    for q in range(nq):
        a = nc[q]
        b = nt[q]
        m_nc3 += vw[q] * a * a * a
        m_nc2nt += vw[q] * a * a * b
        m_ncnt2 += vw[q] * a * b * b
        m_nt3 += vw[q] * b * b * b

    s_th = np.zeros(n)
    s_cd = np.zeros(n)
    for i in range(n):
        acc_t = 0.0
        acc_c = 0.0
        for q in range(nq):
            e = eps[i] - ueff[q]
            if e > 0.0:
                r = math.sqrt(e) * vw[q]
                a = nc[q]
                b = nt[q]
                acc_t += r * (3.0 * a * a + 12.0 * a * b + 6.0 * b * b)
                acc_c += r * (6.0 * a * a + 6.0 * a * b)
        s_th[i] = c_rho * acc_t
        s_cd[i] = c_rho * acc_c
    return s_th, s_cd, m_nc3, m_nc2nt, m_ncnt2, m_nt3
