import math

import numpy as np
import pytest

from polyreach.poly import (Polynomial, count_monomials, grlex_key, index_map,
                            monomials_up_to, poly_add, poly_compose,
                            poly_diff, poly_embed, poly_eval, poly_map_power,
                            poly_mul, poly_pow, poly_scale)


def brute_eval(p, x):
    total = 0.0
    for exps, c in p.terms.items():
        v = c
        for xi, e in zip(x, exps):
            v *= xi ** e
        total += v
    return total


def random_poly(rng, n, d, terms=6):
    basis = monomials_up_to(n, d)
    idx = rng.choice(len(basis), size=min(terms, len(basis)), replace=False)
    return Polynomial(n, {basis[i]: float(rng.uniform(-2, 2)) for i in idx})


def test_monomials_degree_one():
    assert monomials_up_to(2, 1) == [(0, 0), (1, 0), (0, 1)]


def test_monomials_degree_two():
    ms = monomials_up_to(2, 2)
    assert len(ms) == 6
    assert ms[-1] == (0, 2)


def test_monomials_large_count():
    assert len(monomials_up_to(5, 8)) == math.comb(13, 5)


def test_monomials_sorted_distinct():
    rng = np.random.default_rng(7)
    for _ in range(20):
        n = int(rng.integers(1, 5))
        d = int(rng.integers(0, 6))
        ms = monomials_up_to(n, d)
        assert len(ms) == count_monomials(n, d) == math.comb(n + d, n)
        assert len(set(ms)) == len(ms)
        assert ms == sorted(ms, key=grlex_key)


def test_mul_difference_of_squares():
    one_plus = Polynomial(1, {(0,): 1.0, (1,): 1.0})
    one_minus = Polynomial(1, {(0,): 1.0, (1,): -1.0})
    prod = poly_mul(one_plus, one_minus)
    assert prod.terms == {(0,): 1.0, (2,): -1.0}


def test_additive_inverse_cancels():
    p = Polynomial(2, {(1, 0): 0.5, (0, 2): -3.0})
    z = poly_add(p, poly_scale(p, -1.0))
    assert z.terms == {}
    assert z.is_zero()
    assert z.degree == 0


def test_square_expansion():
    p = Polynomial(2, {(1, 0): 1.0, (0, 1): 0.01})
    sq = poly_pow(p, 2)
    assert sq.terms == pytest.approx({(2, 0): 1.0, (1, 1): 0.02,
                                      (0, 2): 0.0001})


def test_add_dimension_mismatch():
    with pytest.raises(ValueError):
        poly_add(Polynomial(1, {(1,): 1.0}), Polynomial(2, {(1, 0): 1.0}))


def test_compose_square_of_affine():
    p = Polynomial(1, {(2,): 1.0})
    m = Polynomial(2, {(1, 0): 1.0, (0, 1): 0.01})
    out = poly_compose(p, [m])
    assert out.terms == pytest.approx({(2, 0): 1.0, (1, 1): 0.02,
                                       (0, 2): 0.0001})


def test_compose_identity():
    p = Polynomial(1, {(1,): 1.0})
    m = Polynomial(3, {(1, 1, 0): 2.0, (0, 0, 1): -1.0})
    assert poly_compose(p, [m]).terms == m.terms


def test_compose_monomials():
    p = Polynomial(2, {(1, 1): 1.0})
    maps = [Polynomial(1, {(2,): 1.0}), Polynomial(1, {(3,): 1.0})]
    assert poly_compose(p, maps).terms == {(5,): 1.0}


def test_compose_arity_mismatch():
    with pytest.raises(ValueError):
        poly_compose(Polynomial(2, {(1, 1): 1.0}), [Polynomial(1, {(1,): 1.0})])


def test_eval_simple():
    p = Polynomial(2, {(2, 0): 1.0, (0, 1): 1.0})
    assert poly_eval(p, (2.0, 1.0)) == 5.0


def test_eval_zero_polynomial():
    assert poly_eval(Polynomial(3, {}), (9.0, -2.0, 4.0)) == 0.0


def test_eval_matches_brute_force():
    rng = np.random.default_rng(11)
    for _ in range(50):
        n = int(rng.integers(1, 4))
        p = random_poly(rng, n, int(rng.integers(0, 5)))
        x = rng.uniform(-2, 2, n)
        ref = brute_eval(p, x)
        assert poly_eval(p, x) == pytest.approx(ref, rel=1e-10, abs=1e-12)


PHI = [Polynomial(3, {(1, 0, 0): 1.0, (0, 1, 0): 0.01}),
       Polynomial(3, {(0, 1, 0): 1.0, (0, 0, 1): 0.01})]


def test_map_power_empty_product():
    assert poly_map_power(PHI, (0, 0)).terms == {(0, 0, 0): 1.0}


def test_map_power_single_factor():
    assert poly_map_power(PHI, (1, 0)).terms == PHI[0].terms


def test_map_power_square():
    out = poly_map_power(PHI, (2, 0))
    assert out.terms == pytest.approx({(2, 0, 0): 1.0, (1, 1, 0): 0.02,
                                       (0, 2, 0): 0.0001})


def test_mul_eval_homomorphism():
    rng = np.random.default_rng(23)
    for _ in range(40):
        n = int(rng.integers(1, 4))
        p = random_poly(rng, n, int(rng.integers(0, 4)))
        q = random_poly(rng, n, int(rng.integers(0, 4)))
        x = rng.uniform(-1.5, 1.5, n)
        lhs = poly_eval(poly_mul(p, q), x)
        rhs = poly_eval(p, x) * poly_eval(q, x)
        assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-12)


def test_compose_eval_consistency():
    rng = np.random.default_rng(31)
    for _ in range(30):
        k = int(rng.integers(1, 3))
        n = int(rng.integers(1, 3))
        p = random_poly(rng, k, int(rng.integers(0, 4)))
        maps = [random_poly(rng, n, int(rng.integers(0, 3))) for _ in range(k)]
        x = rng.uniform(-1, 1, n)
        lhs = poly_eval(poly_compose(p, maps), x)
        rhs = poly_eval(p, [poly_eval(m, x) for m in maps])
        assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-12)


def test_map_power_eval_consistency():
    rng = np.random.default_rng(43)
    for _ in range(30):
        beta = tuple(int(b) for b in rng.integers(0, 3, 2))
        xu = rng.uniform(-1, 1, 3)
        lhs = poly_eval(poly_map_power(PHI, beta), xu)
        rhs = np.prod([poly_eval(f, xu) ** b for f, b in zip(PHI, beta)])
        assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-12)


def test_diff_power_rule():
    p = Polynomial(2, {(2, 0): 1.0, (1, 1): 3.0, (0, 0): 7.0})
    dp = poly_diff(p, 0)
    assert dp.terms == {(1, 0): 2.0, (0, 1): 3.0}
    assert poly_diff(p, 1).terms == {(1, 0): 3.0}


def test_embed_shifts_variables():
    p = Polynomial(2, {(1, 2): 4.0})
    wide = poly_embed(p, 4, offset=1)
    assert wide.terms == {(0, 1, 2, 0): 4.0}
    with pytest.raises(ValueError):
        poly_embed(p, 2, offset=1)


def test_constant_and_variable_builders():
    c = Polynomial.constant(3, 2.5)
    assert poly_eval(c, (0, 0, 0)) == 2.5
    v = Polynomial.variable(3, 2)
    assert v.terms == {(0, 0, 1): 1.0}


def test_json_round_trip():
    p = Polynomial(2, {(2, 0): 1.0, (0, 1): -0.25})
    q = Polynomial.from_json(p.to_json())
    assert q.num_vars == p.num_vars and q.terms == p.terms


def test_json_duplicate_exponents_rejected():
    with pytest.raises(ValueError):
        Polynomial.from_json({"n": 1, "terms": [
            {"exps": [1], "coef": 1.0}, {"exps": [1], "coef": 2.0}]})


def test_index_map_positions():
    imap = index_map(2, 2)
    assert imap[(0, 0)] == 0
    assert imap[(2, 0)] == 3
    assert len(imap) == 6
