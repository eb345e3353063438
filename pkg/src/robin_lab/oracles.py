"""Semi-analytic Robin spectra for intervals, rectangles and disks.

These are the ground truth for the finite element solver.  Bessel functions
are evaluated in this module (power series for small arguments, Miller's
backward recurrence otherwise) and every root is found by bracketing and
bisection to machine precision, so no special-function library is involved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# ---------------------------------------------------------------------------
# Bessel functions of integer order
# ---------------------------------------------------------------------------


def _bessel_j_series(m, x):
    term = (x / 2.0) ** m / math.factorial(m)
    total = term
    q = -(x * x) / 4.0
    j = 0
    while True:
        j += 1
        term *= q / (j * (j + m))
        total += term
        if abs(term) <= 1e-17 * abs(total):
            return total


def bessel_j(m, x):
    """``J_m(x)`` for integer ``m >= 0`` and real ``x >= 0``."""
    if m < 0:
        return (-1) ** m * bessel_j(-m, x)
    x = float(x)
    if x < 0:
        return (-1) ** m * bessel_j(m, -x)
    if x <= 2.0:
        return _bessel_j_series(m, x)
    # Miller: recur downward from well above max(m, x), normalise with
    # J_0 + 2 sum J_{2k} = 1.
    top = 2 * ((max(m, int(x)) + 40 + int(math.sqrt(40 * max(m, x)))) // 2)
    jp1, j = 0.0, 1e-300
    norm = 0.0
    want = 0.0
    for k in range(top, 0, -1):
        jm1 = 2.0 * k / x * j - jp1
        jp1, j = j, jm1
        if k - 1 == m:
            want = j
        if (k - 1) % 2 == 0 and k - 1 > 0:
            norm += 2.0 * j
        if abs(j) > 1e250:
            j *= 1e-250
            jp1 *= 1e-250
            norm *= 1e-250
            want *= 1e-250
    norm += j
    if m == top:
        want = 1e-300
    return want / norm


def bessel_j_prime(m, x):
    if m == 0:
        return -bessel_j(1, x)
    return 0.5 * (bessel_j(m - 1, x) - bessel_j(m + 1, x))


def bessel_i(m, x):
    """Modified Bessel ``I_m(x)`` by its (positive-term) power series."""
    m = abs(m)
    x = float(x)
    term = (x / 2.0) ** m / math.factorial(m)
    total = term
    q = x * x / 4.0
    j = 0
    while True:
        j += 1
        term *= q / (j * (j + m))
        total += term
        if term <= 1e-17 * total:
            return total


def bessel_i_prime(m, x):
    if m == 0:
        return bessel_i(1, x)
    return 0.5 * (bessel_i(m - 1, x) + bessel_i(m + 1, x))


# ---------------------------------------------------------------------------
# root finding
# ---------------------------------------------------------------------------


def bisect(f, lo, hi, flo=None):
    """Bisect a sign change of ``f`` on ``[lo, hi]`` down to adjacent floats."""
    flo = f(lo) if flo is None else flo
    for _ in range(1100):
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            break
        fm = f(mid)
        if fm == 0.0:
            return mid
        if (fm < 0) == (flo < 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _scan_roots(f, sign0, step, kmax, start=0.0):
    """Roots of ``f`` on ``(start, kmax]``; ``sign0`` is the sign just right of ``start``."""
    roots = []
    a, sa = start, sign0
    fa = None
    n = int(math.ceil((kmax - start) / step))
    for i in range(1, n + 1):
        b = start + i * step
        fb = f(b)
        if fb == 0.0:
            roots.append(b)
            a, sa, fa = b, -sa, None
            continue
        sb = 1.0 if fb > 0 else -1.0
        if sb != sa:
            roots.append(bisect(f, a, b, fa if fa is not None else sa * 1e-300))
        a, sa, fa = b, sb, fb
    return roots


def _increasing_root(g, hi=1.0):
    """Root of an increasing function with ``g(0+) < 0``."""
    while g(hi) <= 0:
        hi *= 2.0
    return bisect(g, 0.0, hi, -1.0)


# ---------------------------------------------------------------------------
# spectra
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OracleMode:
    value: float
    multiplicity: int
    label: str
    residual: float


class OracleSpectrum:
    """Sorted reference eigenvalues with multiplicities and mode labels."""

    def __init__(self, modes, name=""):
        self.modes = tuple(sorted(modes, key=lambda md: (md.value, md.label)))
        self.name = name

    def __repr__(self):
        return f"OracleSpectrum({self.name!r}, {len(self.modes)} modes)"

    def values(self, count=None):
        """Eigenvalues repeated according to multiplicity."""
        out = []
        for md in self.modes:
            out.extend([md.value] * md.multiplicity)
        out = np.array(out)
        return out if count is None else out[:count]

    @property
    def max_residual(self):
        return max((md.residual for md in self.modes), default=0.0)

    def negative_count(self):
        return int(sum(md.multiplicity for md in self.modes if md.value < 0))

    def write_csv(self, path):
        """Columns ``rank,lambda,multiplicity,label,residual``."""
        rank = 1
        with open(path, "w", encoding="ascii") as fh:
            fh.write("rank,lambda,multiplicity,label,residual\n")
            for md in self.modes:
                fh.write(f'{rank},{md.value:.17g},{md.multiplicity},"{md.label}",{md.residual:.17g}\n')
                rank += md.multiplicity


def _interval_modes(beta, L, kmax):
    """All 1D modes with ``sqrt(mu) <= kmax`` plus every non-positive mode."""
    beta, L = float(beta), float(L)
    half = L / 2.0
    scale = lambda k: max(1.0, k, abs(beta))  # noqa: E731

    def even(k):
        return k * math.sin(k * half) - beta * math.cos(k * half)

    def odd(k):
        return k * math.cos(k * half) + beta * math.sin(k * half)

    modes = []
    # negative modes: cosh / sinh profiles
    if beta < 0:
        tau = _increasing_root(lambda t: t * math.tanh(t * half) + beta)
        r = abs(tau * math.tanh(tau * half) + beta) / scale(tau)
        modes.append((-tau * tau, "even,neg", r))
    if beta < -2.0 / L:
        tau = _increasing_root(lambda t: (t / math.tanh(t * half) if t > 0 else 1.0 / half) + beta)
        r = abs(tau / math.tanh(tau * half) + beta) / scale(tau)
        modes.append((-tau * tau, "odd,neg", r))
    # zero modes
    if beta == 0.0:
        modes.append((0.0, "even,0", 0.0))
    if beta * L + 2.0 == 0.0:
        modes.append((0.0, "odd,0", 0.0))
    # sign of each function just right of k = 0
    s_even = -1.0 if beta > 0 else 1.0
    c_odd = 1.0 + beta * half
    s_odd = 1.0 if c_odd > 0 else -1.0
    step = math.pi / (4.0 * L)
    for f, s0, tag in ((even, s_even, "even"), (odd, s_odd, "odd")):
        for i, k in enumerate(_scan_roots(f, s0, step, kmax), start=1):
            modes.append((k * k, f"{tag},{i}", abs(f(k)) / scale(k)))
    return modes


def interval_robin(beta, L=1.0, count=10):
    """Lowest ``count`` eigenvalues of ``-u'' = mu u`` on ``(0, L)`` with Robin ends."""
    if not L > 0:
        raise ValueError("L must be positive")
    kmax = (count + 2) * math.pi / L
    while True:
        raw = _interval_modes(beta, L, kmax)
        if len(raw) >= count + 1:
            break
        kmax *= 2.0
    raw.sort()
    modes = [OracleMode(v, 1, lab, r) for v, lab, r in raw[:count]]
    return OracleSpectrum(modes, name=f"interval(beta={beta:g}, L={L:g})")


def _merge(entries, rtol=1e-12):
    """Merge (value, label, residual) entries that coincide to ``rtol``."""
    entries = sorted(entries)
    out = []
    for v, lab, r in entries:
        if out and abs(v - out[-1][0]) <= rtol * max(1.0, abs(v)):
            v0, m0, l0, r0 = out[-1]
            out[-1] = (v0, m0 + 1, f"{l0};{lab}", max(r0, r))
        else:
            out.append((v, 1, lab, r))
    return [OracleMode(v, m, lab, r) for v, m, lab, r in out]


def rectangle_robin(beta, a=1.0, b=1.0, count=10):
    """Tensor-sum spectrum of the ``a x b`` rectangle."""
    if not (a > 0 and b > 0):
        raise ValueError("side lengths must be positive")
    mx = interval_robin(beta, a, count).modes
    my = interval_robin(beta, b, count).modes
    entries = []
    for i, p in enumerate(mx, start=1):
        for j, q in enumerate(my, start=1):
            entries.append((p.value + q.value, f"({i},{j})", max(p.residual, q.residual)))
    modes = _merge(entries)
    kept, n = [], 0
    for md in modes:
        if n >= count:
            break
        kept.append(md)
        n += md.multiplicity
    return OracleSpectrum(kept, name=f"rectangle(beta={beta:g}, a={a:g}, b={b:g})")


def _disk_order_modes(m, beta, R, kmax):
    """Modes of angular order ``m`` with ``sqrt(lambda) <= kmax``."""
    mult = 1 if m == 0 else 2
    out = []
    if m < -beta * R:
        def g(t):
            x = t * R
            return x * bessel_i_prime(m, x) / bessel_i(m, x) + beta * R if t > 0 else m + beta * R
        tau = _increasing_root(g, hi=max(1.0, -beta))
        x = tau * R
        res = abs(tau * bessel_i_prime(m, x) + beta * bessel_i(m, x)) / bessel_i(m, x) / max(1.0, tau, abs(beta))
        out.append((-tau * tau, mult, f"m={m},neg", res))
    if m + beta * R == 0.0:
        out.append((0.0, mult, f"m={m},0", 0.0))

    def f(k):
        x = k * R
        return k * bessel_j_prime(m, x) + beta * bessel_j(m, x)

    lead = m + beta * R
    s0 = 1.0 if lead > 0 else -1.0
    step = math.pi / (4.0 * R)
    for n, k in enumerate(_scan_roots(f, s0, step, kmax), start=1):
        out.append((k * k, mult, f"m={m},n={n}", abs(f(k)) / max(1.0, k, abs(beta))))
    return out


def disk_robin(beta, R=1.0, count=10, m_max=20):
    """Lowest ``count`` eigenvalues (with multiplicity) of the Robin disk.

    Raises
    ------
    ValueError
        If the requested count needs angular orders above ``m_max``.
    """
    if not R > 0:
        raise ValueError("R must be positive")
    beta = float(beta)
    kmax = (count + 4) * math.pi / R
    while True:
        modes = []
        for m in range(m_max + 1):
            modes.extend(_disk_order_modes(m, beta, R, kmax))
        modes.sort()
        if sum(md[1] for md in modes) >= count:
            break
        kmax *= 2.0
    kept, n = [], 0
    for v, mult, lab, r in modes:
        if n >= count:
            break
        kept.append(OracleMode(v, mult, lab, r))
        n += mult
    # the first eigenvalue of each order increases with the order, so order
    # m_max + 1 bounds everything left out
    nxt = _disk_order_modes(m_max + 1, beta, R, kmax)
    if nxt and nxt[0][0] <= kept[-1].value:
        raise ValueError(f"count={count} not reachable with m_max={m_max}; raise m_max")
    return OracleSpectrum(kept, name=f"disk(beta={beta:g}, R={R:g})")
