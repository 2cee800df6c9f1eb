"""Regenerates tests/fixtures/innovation_golden.csv.

Works in levels at 60 significant digits with a plain bisection on tau, so it
shares no code path with the log-space solver in the crate.
"""
import csv
import sys

from mpmath import mp, mpf

mp.dps = 60

P = dict(pi=mpf("0.9"), alpha=mpf("0.3"), rho=mpf(2), gamma=mpf("0.5"), a=mpf("0.1"),
         H=mpf(10), L=mpf(10), phi_ug=mpf("0.9"), psi_ug=mpf("0.6"), phi_bg=mpf("0.5"), n0=mpf(1))


def exps(ug):
    return (P["phi_ug"], P["psi_ug"]) if ug else (P["phi_bg"], P["phi_bg"])


def tau_at(n, phi, psi):
    al, g, rho, H, L = P["alpha"], P["gamma"], P["rho"], P["H"], P["L"]
    k = al / (1 - al) / g * (n**phi * H / (n**psi * L)) ** (rho - 1)
    f = lambda tau: (1 - tau) + k * (1 - tau) ** rho
    target = 1 / (P["a"] * H)
    if f(mpf(0)) <= target:
        return mpf(0)
    lo, hi = mpf(0), mpf(1)
    for _ in range(400):
        mid = (lo + hi) / 2
        if f(mid) > target:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


def state(n, ug):
    phi, psi = exps(ug)
    al, g, rho, H, L, a = P["alpha"], P["gamma"], P["rho"], P["H"], P["L"], P["a"]
    tau = tau_at(n, phi, psi)
    u = 1 - tau
    Y = (al * (n**psi * L) ** (1 - rho) + (1 - al) * (n**phi * u * H) ** (1 - rho)) ** (1 / (1 - rho))
    w_h = g * (1 - al) * n ** (phi * (1 - rho)) * (Y / (u * H)) ** rho
    w_l = al * n ** (psi * (1 - rho)) * (Y / L) ** rho
    D = (1 - g) / g * w_h * u * H / n
    price = w_h / (a * n)
    return dict(n=n, tau=tau, Y=Y, w_H=w_h, w_L=w_l, D=D, P=price, n_next=n * (1 + a * tau * H))


def main(out):
    steps = 10
    rows = []
    n = P["n0"]
    for t in range(steps + 1):
        s = state(n, True)
        ug, bg = state(s["n_next"], True), state(s["n_next"], False)
        R = (P["pi"] * (ug["D"] + ug["P"]) + (1 - P["pi"]) * (bg["D"] + bg["P"])) / s["P"]
        rows.append([t] + [mp.nstr(s[k], 20) for k in ("n", "tau", "Y", "w_H", "w_L", "D", "P")] + [mp.nstr(R, 20)])
        n = s["n_next"]
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "n", "tau", "Y", "w_H", "w_L", "D", "P", "R"])
        w.writerows(rows)


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "crates/core/tests/fixtures/innovation_golden.csv")
