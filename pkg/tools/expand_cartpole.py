"""Third-order polynomial model of the cart-pole, derived symbolically.

The equations of motion

    (mc+mp) x'' + mp l th'' cos(th) - mp l th'^2 sin(th) = force
    mp l x'' cos(th) + mp l^2 th'' + mp grav l sin(th) = 0

are solved for the accelerations, rewritten in deviation coordinates
around the upright equilibrium (x, th, x', th') = (0, pi, 0, 0), and
Taylor-expanded to total degree 3 before Euler discretization with step
0.01. All arithmetic is exact until the final float conversion, so this
doubles as the oracle for the committed systems/cartpole.json data.

Run `python3 tools/expand_cartpole.py` to print the model as JSON.
"""
import json

import sympy as sp

MC = sp.Integer(10)
MP = sp.Integer(1)
L = sp.Rational(1, 2)
GRAV = sp.Rational(981, 100)
DT = sp.Rational(1, 100)


def _accelerations():
    th, thd, force = sp.symbols("th thd force")
    xdd, thdd = sp.symbols("xdd thdd")
    eq1 = sp.Eq((MC + MP) * xdd + MP * L * thdd * sp.cos(th)
                - MP * L * thd ** 2 * sp.sin(th), force)
    eq2 = sp.Eq(MP * L * xdd * sp.cos(th) + MP * L ** 2 * thdd
                + MP * GRAV * L * sp.sin(th), 0)
    sol = sp.solve([eq1, eq2], [xdd, thdd], dict=True)[0]
    return (th, thd, force), (sp.simplify(sol[xdd]), sp.simplify(sol[thdd]))


def _taylor3():
    """Degree-3 expansions of both accelerations in (q2, q4, force)."""
    (th, thd, force), accs = _accelerations()
    q2, q4, c, eps = sp.symbols("q2 q4 c eps")
    out = []
    for expr in accs:
        # scale every deviation by eps and truncate the series at eps^4;
        # setting eps = 1 leaves the total-degree-3 Taylor polynomial
        e = expr.subs({th: sp.pi + eps * q2, thd: eps * q4, force: eps * c})
        cut = sp.series(e, eps, 0, 4).removeO()
        out.append(sp.expand(cut.subs(eps, 1)))
    return q2, q4, c, out


def _terms(expr, variables):
    poly = sp.Poly(expr, *variables)
    return {tuple(int(e) for e in mono): float(coef)
            for mono, coef in zip(poly.monoms(), poly.coeffs())}


def cartpole_model():
    """Euler-discretized deviation dynamics q+ = f(q) + g(q) force.

    Returns (f_terms, g_terms): four drift term-dicts over the state
    (cart position, pole angle from upright, cart velocity, pole rate)
    and four input-column term-dicts, keyed by exponent tuple.
    """
    q2, q4, c, (xdd, thdd) = _taylor3()
    q1, q3 = sp.symbols("q1 q3")
    state = (q1, q2, q3, q4)
    rhs = [q3, q4, xdd, thdd]
    f_terms, g_terms = [], []
    for i, expr in enumerate(rhs):
        poly_c = sp.Poly(sp.expand(expr), c)
        if poly_c.degree() > 1:
            raise AssertionError("dynamics are not affine in the force")
        drift = poly_c.coeff_monomial(1)
        gain = poly_c.coeff_monomial(c)
        step = sp.expand(state[i] + DT * drift)
        f_terms.append(_terms(step, state))
        g_terms.append(_terms(sp.expand(DT * gain), state))
    for terms in f_terms:
        assert max(sum(e) for e in terms) <= 3
    for terms in g_terms:
        assert not terms or max(sum(e) for e in terms) <= 2
    return f_terms, g_terms


def main():
    f_terms, g_terms = cartpole_model()
    as_json = {
        "f": [[[list(e), c] for e, c in sorted(t.items())] for t in f_terms],
        "g": [[[list(e), c] for e, c in sorted(t.items())] for t in g_terms],
    }
    print(json.dumps(as_json, indent=1))


if __name__ == "__main__":
    main()
