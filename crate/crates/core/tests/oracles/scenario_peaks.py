"""Independent oracle for the pinned peak values in tests/acceptance.rs.

Dense LAPACK evolution plus bounded scalar refinement; shares no code with
the crate. Run: python3 scenario_peaks.py
"""
import numpy as np
from scipy.optimize import minimize_scalar


def chain(n):
    a = np.zeros((n, n))
    for i in range(n - 1):
        a[i, i + 1] = a[i + 1, i] = 1.0
    return a


def cycle(n):
    a = chain(n)
    a[0, n - 1] = a[n - 1, 0] = 1.0
    return a


def full(adj, terminals):
    """terminals: (node 1-based, coupling, field); terminals first in the basis."""
    m, n = len(terminals), adj.shape[0]
    h = np.zeros((m + n, m + n))
    h[m:, m:] = adj
    for a, (node, c, w) in enumerate(terminals):
        h[a, a] = w
        h[a, m + node - 1] = h[m + node - 1, a] = c
    return h


def peak(h, src, dst, t_max, n=400001):
    lam, v = np.linalg.eigh(h)
    coef = v[src, :]
    row = v[dst, :]

    def pop(t):
        return abs(np.sum(row * coef * np.exp(-1j * lam * t))) ** 2

    ts = np.linspace(0.0, t_max, n)
    amps = (np.exp(-1j * np.outer(ts, lam)) * (row * coef)).sum(axis=1)
    p = np.abs(amps) ** 2
    i = int(p.argmax())
    lo, hi = ts[max(i - 1, 0)], ts[min(i + 1, n - 1)]
    r = minimize_scalar(lambda t: -pop(t), bounds=(lo, hi), method="bounded",
                        options={"xatol": 1e-10})
    return (r.x, -r.fun) if -r.fun > p[i] else (ts[i], p[i])


def resonant_chain():
    n, s, d, k = 30, 2, 13, 5
    lam5 = 2 * np.cos(k * np.pi / (n + 1))
    g = lambda node: np.sqrt(2 / (n + 1)) * np.sin(node * k * np.pi / (n + 1))
    t_est = np.pi / (np.sqrt(2) * 0.01 * abs(g(s)))
    ratio = np.sin(10 * np.pi / 31) / np.sin(3 * np.pi / 31)
    cal = full(chain(n), [(s, 0.01, lam5), (d, 0.01 * ratio, lam5)])
    unc = full(chain(n), [(s, 0.01, lam5), (d, 0.01, lam5)])
    print("chain t_est", repr(t_est))
    print("chain calibrated", peak(cal, 0, 1, 2.5 * t_est))
    print("chain uncalibrated", peak(unc, 0, 1, 2.5 * t_est))


def three_users():
    lam, u = np.linalg.eigh(cycle(21))
    b = abs(0.01 * np.sum(u[2] * u[17] / (lam + 0.9)))
    t = np.pi / (2 * b)
    print("routing b", repr(b), "T", repr(t))
    for wu in (-0.85, -0.87, -0.89):
        h = full(cycle(21), [(3, 0.1, -0.9), (10, 0.1, wu), (18, 0.1, -0.9)])
        print("routing", wu, "d", peak(h, 0, 2, 2 * t), "u", peak(h, 0, 1, 2 * t))


if __name__ == "__main__":
    np.set_printoptions(precision=17)
    resonant_chain()
    three_users()
