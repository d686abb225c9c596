"""Independent reference values for the integration tests.

Run with `python3 tools/oracles.py > crates/core/tests/fixtures/oracles.json`.
Everything here uses scipy/numpy only and shares no code with the crate.
"""

import json
import math

import numpy as np
from scipy import integrate, special, stats


def besq_density(delta, t, x, y):
    """Transition density of BESQ(delta) as a scaled noncentral chi-square."""
    if x == 0.0:
        return stats.chi2.pdf(y / t, delta) / t
    if delta > 0.0:
        return stats.ncx2.pdf(y / t, delta, x / t) / t
    # dimension 0 has index -1 and I_{-1} = I_1
    z = math.sqrt(x * y) / t
    return math.sqrt(x / y) * math.exp(-(x + y) / (2 * t) + z) * special.ive(1, z) / (2 * t)


def besq_cdf(delta, t, x, y):
    if delta == 0.0:
        atom = math.exp(-x / (2 * t))
        return atom + integrate.quad(lambda z: besq_density(0.0, t, x, z), 0, y, limit=200)[0]
    if x == 0.0:
        return stats.chi2.cdf(y / t, delta)
    return stats.ncx2.cdf(y / t, delta, x / t)


def kernel_sides(delta, s, t, u, w):
    lhs = integrate.quad(
        lambda v: besq_density(delta + 2, s, u, v) * (besq_density(delta, t, v, w) if v > 0 else 0.0),
        0,
        np.inf,
        limit=400,
    )[0]
    rhs = s / (s + t) * besq_density(delta + 2, s + t, u, w) + t / (s + t) * besq_density(delta, s + t, u, w)
    return lhs, rhs


def clock_terminal(path, dt, bw, dx, floor):
    """Sum of dt / lambda(s, W_s)^2 over steps before the maximum, where
    lambda counts box-kernel visits from step s onwards (step s included)."""
    k_m = int(np.argmax(path))
    lo = min(path.min(), 0.0)
    hi = path.max() + 2 * bw + dx
    n_cells = int(math.ceil((hi - lo) / dx))
    nodes = lo + (hi - lo) / n_cells * np.arange(n_cells + 1)
    h = nodes[1] - nodes[0]
    steps = path[:-1]
    scale = dt / (2 * bw)
    # visits: node j is hit by step k when |steps[k] - nodes[j]| < bw
    first = np.ceil((steps - bw - lo) / h).astype(int)
    last = np.floor((steps + bw - lo) / h).astype(int)
    visits = [[] for _ in nodes]
    for k, (a, b) in enumerate(zip(first, last)):
        for j in range(max(a, 0), min(b, len(nodes) - 1) + 1):
            if abs(steps[k] - nodes[j]) < bw:
                visits[j].append(k)
    visits = [np.array(v, dtype=np.int64) for v in visits]
    total = 0.0
    for k in range(k_m):
        x = steps[k]
        s = (x - lo) / h
        j = min(int(math.floor(s)), len(nodes) - 2)
        f = s - j
        rem = []
        for jj in (j, j + 1):
            v = visits[jj]
            rem.append((len(v) - np.searchsorted(v, k)) * scale)
        lam = max(rem[0] * (1 - f) + rem[1] * f, floor)
        total += dt / lam**2
    return total


def conditioned_path(rng, xi, dt, ceiling):
    sd = math.sqrt(dt)
    while True:
        x = [xi]
        cur = xi
        ok = True
        while True:
            nxt = cur + sd * rng.standard_normal()
            if nxt >= ceiling or rng.random() < math.exp(-2 * (ceiling - cur) * (ceiling - nxt) / dt):
                ok = False
                break
            if nxt <= 0 or rng.random() < math.exp(-2 * cur * nxt / dt):
                x.append(0.0)
                break
            cur = nxt
            x.append(cur)
        if ok:
            return np.array(x)


def main():
    out = {}
    out["kolmogorov_quantile_1e-3"] = float(stats.kstwobign.ppf(1 - 1e-3))
    out["besq_density"] = [
        {"delta": d, "t": t, "x": x, "y": y, "value": float(besq_density(d, t, x, y))}
        for (d, t, x, y) in [
            (2.0, 1.0, 0.0, 0.7),
            (2.0, 0.5, 1.0, 1.3),
            (0.0, 1.0, 1.0, 0.4),
            (1.0, 2.0, 0.5, 3.0),
            (3.0, 0.1, 5.0, 4.2),
            (4.0, 10.0, 0.5, 25.0),
        ]
    ]
    out["besq_cdf"] = [
        {"delta": d, "t": t, "x": x, "y": y, "value": float(besq_cdf(d, t, x, y))}
        for (d, t, x, y) in [(4.0, 1.0, 2.0, 3.0), (0.0, 1.0, 1.0, 0.5), (2.0, 1.0, 0.0, 1.0), (1.0, 0.5, 2.0, 1.0)]
    ]
    out["besq_atom"] = [{"t": 1.0, "x": 1.0, "value": math.exp(-0.5)}]
    out["kernel_identity"] = []
    for (d, s, t, u, w) in [(2.0, 1.0, 1.0, 1.0, 1.0), (0.0, 0.5, 1.5, 2.0, 1.0), (1.0, 2.0, 0.5, 1.0, 1.0)]:
        lhs, rhs = kernel_sides(d, s, t, u, w)
        out["kernel_identity"].append({"delta": d, "s": s, "t": t, "u": u, "w": w, "lhs": lhs, "rhs": rhs})
    # first nonzero eigenvalue of the (2, 0) Jacobi generator on polynomials
    # is 2n^2 + n(d1 + d2 - 2) at n = 1, so survival decays like exp(-2t)
    out["jacobi_20_absorbed_horizon"] = 50.0
    out["jacobi_20_survival_bound"] = math.exp(-2.0 * 50.0)
    out["drift_one_return_probability_level_1"] = math.exp(-2.0)
    out["drift_one_return_probability_level_5"] = math.exp(-10.0)
    out["single_atom_h_at_1"] = integrate.quad(lambda x: (1 - x / 2) ** -2, 0, 1)[0]

    rng = np.random.default_rng(20240611)
    dt, bw, floor = 1e-4, 1e-2, 1e-3
    terminals = [clock_terminal(conditioned_path(rng, 1.0, dt, 4.0), dt, bw, bw, floor) for _ in range(1000)]
    # a few discrete paths never rise above the start and have a zero clock
    out["clock_terminal_q05"] = float(np.quantile(terminals, 0.05))
    out["clock_terminal_median"] = float(np.median(terminals))
    out["clock_paths"] = len(terminals)
    out["clock_terminal_sample"] = sorted(float(v) for v in terminals)
    print(json.dumps(out, indent=2))


if __name__ == "__main__":
    main()
