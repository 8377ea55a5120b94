#!/usr/bin/env python3
"""Reference energy levels of -u'' + x^4 u = e u by Numerov shooting.

Independent of the C++ library: marches the Numerov recurrence from x = 0
with even/odd parity starts and bisects on the boundary value u(X) = 0.
The printed levels are frozen into the quantum test suite; rerun this
script to regenerate them. A scaling argument turns these into eigenvalues
of -h^2 u'' + c x^4 u: lambda_j(h) = c^(1/3) h^(4/3) e_j.
"""

import argparse


def shoot(e, parity, dx, x_max):
    """Value of u(x_max) for the Numerov solution with given parity."""
    n = int(round(x_max / dx))
    g0 = -e  # u'' = (V - E) u, V(0) = 0
    if parity == "even":
        u_prev = 1.0
        u = 1.0 + 0.5 * g0 * dx * dx + g0 * g0 * dx**4 / 24.0
    else:
        u_prev = 0.0
        u = dx + g0 * dx**3 / 6.0
    c = dx * dx / 12.0
    x_prev, x = 0.0, dx
    f_prev = 1.0 - c * (x_prev**4 - e)
    f = 1.0 - c * (x**4 - e)
    for i in range(2, n + 1):
        x_next = i * dx
        f_next = 1.0 - c * (x_next**4 - e)
        u_next = ((12.0 - 10.0 * f) * u - f_prev * u_prev) / f_next
        u_prev, u = u, u_next
        f_prev, f = f, f_next
        if abs(u) > 1e280:  # renormalize to dodge overflow in the barrier
            u_prev /= u
            u = 1.0
    return u


def bisect_level(lo, hi, parity, dx, x_max):
    flo = shoot(lo, parity, dx, x_max)
    fhi = shoot(hi, parity, dx, x_max)
    assert flo * fhi < 0.0, (lo, hi, parity)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fm = shoot(mid, parity, dx, x_max)
        if fm == 0.0:
            return mid
        if (fm < 0.0) == (flo < 0.0):
            lo, flo = mid, fm
        else:
            hi, fhi = mid, fm
        if hi - lo < 1e-12:
            break
    return 0.5 * (lo + hi)


def locate_and_refine(parity, count, dx, x_max):
    """First `count` levels of the given parity via coarse scan + bisection."""
    levels = []
    e = 0.2
    step = 0.2
    prev = shoot(e, parity, dx, x_max)
    while len(levels) < count:
        e2 = e + step
        cur = shoot(e2, parity, dx, x_max)
        if prev * cur < 0.0:
            levels.append(bisect_level(e, e2, parity, dx, x_max))
        e, prev = e2, cur
        assert e < 60.0
    return levels


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--dx", type=float, default=2e-4)
    ap.add_argument("--xmax", type=float, default=4.5)
    ap.add_argument("--count", type=int, default=2, help="levels per parity")
    args = ap.parse_args()

    for dx in (args.dx, args.dx / 2.0):
        even = locate_and_refine("even", args.count, dx, args.xmax)
        odd = locate_and_refine("odd", args.count, dx, args.xmax)
        merged = sorted(even + odd)
        print(f"dx = {dx:g}")
        for j, e in enumerate(merged):
            print(f"  e_{j} = {e:.12f}")


if __name__ == "__main__":
    main()
