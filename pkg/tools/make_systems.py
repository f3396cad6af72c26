"""Regenerate the committed system files under systems/.

Each file follows the loader schema in polyreach.cli: name, n, m, f
(drift polynomials), g (n x m input columns), X/U/Z set descriptions,
optional fixed_point. The first four systems are Euler discretizations
(step 0.01) entered directly; the cart-pole model comes from the exact
symbolic expansion in expand_cartpole.py.
"""
import json
import os
import sys

HERE = os.path.dirname(os.path.abspath(__file__))
sys.path.insert(0, os.path.join(HERE, os.pardir, "src"))
sys.path.insert(0, HERE)

from polyreach.poly import Polynomial
from polyreach.sets import SemiAlgebraicSet

from expand_cartpole import cartpole_model

OUT_DIR = os.path.join(HERE, os.pardir, "systems")


def P(n, terms):
    return Polynomial(n, terms).to_json()


def vanderpol():
    # reversed-time Van der Pol, x1' = -2 x2, x2' = 0.8 x1 + 10 (x1^2 - 0.21) x2
    n = 2
    f = [P(n, {(1, 0): 1.0, (0, 1): -0.02}),
         P(n, {(1, 0): 0.008, (0, 1): 0.979, (2, 1): 0.1})]
    g = [[P(n, {})], [P(n, {})]]
    return {"name": "vanderpol", "n": n, "m": 1, "f": f, "g": g,
            "X": SemiAlgebraicSet.box([(-1.5, 1.5)] * 2).to_json(),
            "U": SemiAlgebraicSet.box([(-1.0, 1.0)]).to_json(),
            "Z": SemiAlgebraicSet.box([(-0.1, 0.1)] * 2).to_json()}


def double_integrator():
    n = 2
    f = [P(n, {(1, 0): 1.0, (0, 1): 0.01}), P(n, {(0, 1): 1.0})]
    g = [[P(n, {})], [P(n, {(0, 0): 0.01})]]
    return {"name": "double_integrator", "n": n, "m": 1, "f": f, "g": g,
            "X": SemiAlgebraicSet.box([(-1.0, 1.0)] * 2).to_json(),
            "U": SemiAlgebraicSet.box([(-1.0, 1.0)]).to_json(),
            "Z": SemiAlgebraicSet.ball([0.0, 0.0], 0.05).to_json(),
            "fixed_point": [0.0, 0.0]}


def brockett():
    # x' = (u1, u2, x2 u1 - x1 u2)
    n = 3
    f = [P(n, {(1, 0, 0): 1.0}), P(n, {(0, 1, 0): 1.0}),
         P(n, {(0, 0, 1): 1.0})]
    g = [[P(n, {(0, 0, 0): 0.01}), P(n, {})],
         [P(n, {}), P(n, {(0, 0, 0): 0.01})],
         [P(n, {(0, 1, 0): 0.01}), P(n, {(1, 0, 0): -0.01})]]
    return {"name": "brockett", "n": n, "m": 2, "f": f, "g": g,
            "X": SemiAlgebraicSet.box([(-1.0, 1.0)] * 3).to_json(),
            "U": SemiAlgebraicSet.box([(-1.0, 1.0)] * 2).to_json(),
            "Z": SemiAlgebraicSet.ball([0.0] * 3, 0.1).to_json()}


def vanderpol3d():
    # planar dynamics driven through a cubic scalar subsystem
    n = 3
    f = [P(n, {(1, 0, 0): 1.0, (0, 1, 0): -0.02}),
         P(n, {(1, 0, 0): 0.008, (0, 1, 0): 0.979, (0, 0, 1): 0.01,
               (2, 1, 0): 0.1}),
         P(n, {(0, 0, 1): 0.99, (0, 0, 3): 0.01})]
    g = [[P(n, {})], [P(n, {})], [P(n, {(0, 0, 0): 0.005})]]
    return {"name": "vanderpol3d", "n": n, "m": 1, "f": f, "g": g,
            "X": SemiAlgebraicSet.ball([0.0] * 3, 1.0).to_json(),
            "U": SemiAlgebraicSet.box([(-1.0, 1.0)]).to_json(),
            "Z": SemiAlgebraicSet.ball([0.0] * 3, 0.1).to_json()}


def cartpole():
    n = 4
    f_terms, g_terms = cartpole_model()
    f = [P(n, t) for t in f_terms]
    g = [[P(n, t)] for t in g_terms]
    pi6 = 0.5235987755982988  # pi/6
    bounds = [(-4.0, 4.0), (-pi6, pi6), (-4.0, 4.0), (-2.0, 2.0)]
    return {"name": "cartpole", "n": n, "m": 1, "f": f, "g": g,
            "X": SemiAlgebraicSet.box(bounds).to_json(),
            "U": SemiAlgebraicSet.box([(-40.0, 40.0)]).to_json(),
            "Z": SemiAlgebraicSet.box([(-0.5, 0.5)] * 4).to_json(),
            "fixed_point": [0.0] * 4}


def main():
    os.makedirs(OUT_DIR, exist_ok=True)
    for build in (vanderpol, double_integrator, brockett, vanderpol3d,
                  cartpole):
        obj = build()
        path = os.path.join(OUT_DIR, obj["name"] + ".json")
        with open(path, "w") as fh:
            json.dump(obj, fh, indent=1)
            fh.write("\n")
        print(path)


if __name__ == "__main__":
    main()
