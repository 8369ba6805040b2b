#!/usr/bin/env python3
"""Regenerates the frozen high-precision oracle tables in tests/data/.

Independent oracle for the radial kernel functions, evaluated with mpmath at
40 significant digits and frozen to CSV. The C++ implementation must match
matern to 1e-12 relative and f/g to 1e-10 relative over a*r in [1e-6, 50].

  matern(r; nu, a) = 2^(1-nu)/Gamma(nu) * (a r)^nu * K_nu(a r),  matern(0) = 1
  f(r; nu, a)      = -2^(1-nu)/Gamma(nu) * a^2 (a r)^(nu-1) K_(nu-1)(a r)
                     f(0) = -a^2 / (2 (nu - 1))
  g(r; nu, a)      =  2^(1-nu)/Gamma(nu) * a^4 (a r)^(nu-2) K_(nu-2)(a r)

Also freezes correlation-bound values

  bound(nu1, nu2) = sqrt(G(nu1+3/2)/G(nu1)) sqrt(G(nu2+3/2)/G(nu2))
                    * G((nu1+nu2)/2) / G((nu1+nu2)/2 + 3/2)

and standard-normal quantiles for the inverse-CDF sampler.
"""

import csv
import os

import mpmath as mp

mp.mp.dps = 40

OUT_DIR = os.path.join(os.path.dirname(__file__), "..", "data")

R_VALUES = ["1e-6", "1e-4", "0.01", "0.05", "0.1", "0.25", "0.5", "0.9",
            "1.0", "1.3", "1.7", "2.0"]
NU_VALUES = ["1.05", "1.1", "1.5", "2.0", "2.5", "3.0", "3.5", "3.7", "4.0", "5.0"]
A_VALUES = ["0.5", "1.0", "2.0", "5.0", "20.0"]


def matern(r, nu, a):
    if r == 0:
        return mp.mpf(1)
    x = a * r
    return mp.mpf(2) ** (1 - nu) / mp.gamma(nu) * x ** nu * mp.besselk(nu, x)


def f_radial(r, nu, a):
    if r == 0:
        return -a * a / (2 * (nu - 1))
    x = a * r
    return -(mp.mpf(2) ** (1 - nu) / mp.gamma(nu)) * a ** 2 * x ** (nu - 1) * mp.besselk(nu - 1, x)


def g_radial(r, nu, a):
    x = a * r
    return (mp.mpf(2) ** (1 - nu) / mp.gamma(nu)) * a ** 4 * x ** (nu - 2) * mp.besselk(nu - 2, x)


def rho_bound(nu1, nu2):
    half = mp.mpf(3) / 2
    return (mp.sqrt(mp.gamma(nu1 + half) / mp.gamma(nu1))
            * mp.sqrt(mp.gamma(nu2 + half) / mp.gamma(nu2))
            * mp.gamma((nu1 + nu2) / 2) / mp.gamma((nu1 + nu2) / 2 + half))


def fmt(x):
    return mp.nstr(x, 22, strip_zeros=False)


def write_kernels():
    path = os.path.join(OUT_DIR, "matern_oracle.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["r", "nu", "a", "matern", "f", "g"])
        for r_s in R_VALUES:
            for nu_s in NU_VALUES:
                for a_s in A_VALUES:
                    r, nu, a = mp.mpf(r_s), mp.mpf(nu_s), mp.mpf(a_s)
                    if a * r > 50:
                        continue
                    w.writerow([r_s, nu_s, a_s,
                                fmt(matern(r, nu, a)),
                                fmt(f_radial(r, nu, a)),
                                fmt(g_radial(r, nu, a))])
        # r = 0 rows exercise the closed-form branches (g undefined there).
        for nu_s in NU_VALUES:
            for a_s in A_VALUES:
                nu, a = mp.mpf(nu_s), mp.mpf(a_s)
                w.writerow(["0", nu_s, a_s, "1", fmt(f_radial(mp.mpf(0), nu, a)), "nan"])
    print("wrote", path)


def write_rho_bound():
    path = os.path.join(OUT_DIR, "rho_bound_oracle.csv")
    pairs = [("1.1", "1.1"), ("1.5", "2.5"), ("2.0", "3.0"), ("3.0", "4.0"),
             ("1.2", "4.8"), ("2.7", "2.9"), ("4.0", "5.0"), ("1.01", "1.02")]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["nu1", "nu2", "bound"])
        for n1, n2 in pairs:
            w.writerow([n1, n2, fmt(rho_bound(mp.mpf(n1), mp.mpf(n2)))])
    print("wrote", path)


def write_quantiles():
    # Extreme tails need working precision beyond the probability's exponent.
    mp.mp.dps = 340
    path = os.path.join(OUT_DIR, "normal_quantiles.csv")
    ps = ["1e-300", "1e-10", "1e-5", "0.001", "0.025", "0.3", "0.5",
          "0.6", "0.8413447460685429", "0.975", "0.9986501019683699",
          "0.99999", "1e-10"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["p", "z"])
        seen = set()
        for p_s in ps:
            if p_s in seen:
                continue
            seen.add(p_s)
            p = mp.mpf(p_s)
            z = mp.sqrt(mp.mpf(2)) * mp.erfinv(2 * p - 1)
            w.writerow([p_s, fmt(z)])
    print("wrote", path)


if __name__ == "__main__":
    write_kernels()
    write_rho_bound()
    write_quantiles()
