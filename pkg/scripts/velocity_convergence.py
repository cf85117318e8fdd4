"""Lattice velocity form against the continuum Bohmian velocity for one particle.

A Gaussian packet is sampled on 1D lattices of decreasing spacing; the
velocity form of the lattice triple with f(x) = x is compared with
hbar Im(psi'/psi) / m at the packet center.  Prints the error table and
the fitted log-log rate.
"""
import argparse

import numpy as np

from fermibundle import bohm
from fermibundle import confspace as C
from fermibundle import triple as T


def lattice_error(a, x0, p0, width, length, params):
    st = bohm.SlaterState([bohm.Orbital([x0], [p0], width)], params)
    box = C.LatticeBox.cube(1, int(round(length / a)) + 1, spacing=a)
    tr = T.make_ordered_triple(C.build_pair(box, 1), None, params)
    xs = np.array([box.position(lab[0])[0] for lab in tr.Q.labels])
    psi, _ = bohm.wave_value(st, xs.reshape(-1, 1, 1))
    vf = T.velocity_form(tr, psi / np.linalg.norm(psi), xs)
    k = int(np.argmin(np.abs(xs - x0)))
    v = bohm.velocity(st, [xs[k]])[0]
    return vf.values[k], v


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--spacings", type=float, nargs="+", default=[0.2, 0.1, 0.05, 0.025])
    ap.add_argument("--p0", type=float, default=0.8)
    ap.add_argument("--width", type=float, default=1.0)
    args = ap.parse_args()
    params = T.PhysicalParams()
    errs = []
    print(f"{'spacing':>8} {'lattice':>12} {'continuum':>12} {'error':>10}")
    for a in args.spacings:
        vl, vc = lattice_error(a, 6.0, args.p0, args.width, 12.0, params)
        errs.append(abs(vl - vc))
        print(f"{a:8.3f} {vl:12.8f} {vc:12.8f} {errs[-1]:10.2e}")
    rate = np.polyfit(np.log(args.spacings), np.log(errs), 1)[0]
    print(f"observed order {rate:.2f}")


if __name__ == "__main__":
    main()
