"""Empirical constants for dividing by the distance to the boundary.

A function that vanishes at both ends can be divided by d(x) = min(x, 1 - x)
at the cost of one derivative.  The ratio ||u/d||_{s-1} / ||u||_s is
measured over a small family and on a grid twice as fine.
"""
from physvac.cli import hardy_suite


def main():
    hardy, embed = hardy_suite()
    print("member                 s   ratio       refined")
    for name, s, r0, r1, _ in hardy:
        print(f"{name:20s} {s:3d}   {r0:.6f}    {r1:.6f}")
    for s in (1, 2, 3):
        print(f"max over family, s = {s}: {max(r[2] for r in hardy if r[1] == s):.6f}")

    print("\nweighted embedding ratios ||f||^2_{1-p/2} / int d^p (f^2 + f'^2)")
    for p in (1, 2):
        vals = sorted((r[2], r[0]) for r in embed if r[1] == p)
        print(f"  p = {p}: smallest {vals[0][0]:.4f} ({vals[0][1]}), largest {vals[-1][0]:.4f} ({vals[-1][1]})")


if __name__ == "__main__":
    main()
