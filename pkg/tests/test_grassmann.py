import itertools
import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tracedyn.grassmann import (
    DimensionError,
    GrassmannNumber,
    Parity,
    gconj,
    generator,
    gmul,
    grade,
    scalar,
)

from conftest import all_words, grassmann_numbers


# ---- independent oracle: Jordan-Wigner creation operators -------------------
# theta_i -> a_i^dagger on 2**K dimensional Fock space; the map is a faithful
# algebra representation, so products must match matrix products.


def _creation_ops(k):
    sz = np.diag([1.0, -1.0])
    up = np.array([[0.0, 0.0], [1.0, 0.0]])
    ops = []
    for i in range(k):
        factors = [sz] * i + [up] + [np.eye(2)] * (k - i - 1)
        m = factors[0]
        for f in factors[1:]:
            m = np.kron(m, f)
        ops.append(m)
    return ops


def _represent(x: GrassmannNumber):
    ops = _creation_ops(x.num_generators)
    out = np.zeros((2**x.num_generators,) * 2, complex)
    for word, c in x.terms.items():
        m = np.eye(2**x.num_generators)
        for g in word:
            m = m @ ops[g]
        out += c * m
    return out


def _naive_product(a, b):
    # expand word by word, sorting with explicit adjacent transpositions
    out = {}
    for wa, ca in a.terms.items():
        for wb, cb in b.terms.items():
            w = list(wa + wb)
            if len(set(w)) < len(w):
                continue
            sign = 1
            changed = True
            while changed:
                changed = False
                for i in range(len(w) - 1):
                    if w[i] > w[i + 1]:
                        w[i], w[i + 1] = w[i + 1], w[i]
                        sign = -sign
                        changed = True
            key = tuple(w)
            out[key] = out.get(key, 0) + sign * ca * cb
    return GrassmannNumber(a.num_generators, out)


# ---- spec examples ----------------------------------------------------------


def test_generator_squares_to_zero():
    t1 = generator(0)
    assert (t1 * t1).is_zero()


def test_generator_antisymmetry():
    t1, t2 = generator(0), generator(1)
    assert t1 * t2 == GrassmannNumber(2, {(0, 1): 1})
    assert t2 * t1 == GrassmannNumber(2, {(0, 1): -1})


def test_one_plus_theta_product_matches_naive_expansion():
    t1, t2 = generator(0), generator(1)
    got = gmul(1 + t1, 1 + t2)
    assert got == _naive_product(1 + t1, 1 + t2)
    assert got == GrassmannNumber(2, {(): 1, (0,): 1, (1,): 1, (0, 1): 1})


@pytest.mark.parametrize(
    "x, expected",
    [
        (3 + 2 * generator(0, 3) * generator(1, 3), Parity.EVEN),
        (generator(2, 3), Parity.ODD),
        (1 + generator(0, 3), Parity.MIXED),
    ],
)
def test_grade_examples(x, expected):
    assert grade(x) is expected


def test_conj_examples():
    t1, t2 = generator(0), generator(1)
    assert gconj(1j * t1) == -1j * t1
    assert gconj(t1 * t2) == t2 * t1 == -(t1 * t2)


def test_mismatched_generator_count_raises():
    with pytest.raises(DimensionError):
        gmul(generator(0, 2), generator(0, 3))


def test_words_are_canonicalised_on_construction():
    x = GrassmannNumber(3, {(2, 0): 1.0, (1, 1): 5.0})
    assert x.terms == {(0, 2): -1.0}


def test_eps_prunes_small_coefficients():
    x = GrassmannNumber(2, {(): 1.0, (0,): 1e-14}, eps=1e-12)
    assert x.terms == {(): 1.0}
    assert GrassmannNumber(2, {(0,): 1e-300}).terms == {(0,): 1e-300}


def test_out_of_range_generator_raises():
    with pytest.raises(DimensionError):
        GrassmannNumber(2, {(2,): 1.0})


def test_body_behaves_as_complex_number():
    a, b = scalar(2 + 1j, 3), scalar(-0.5 + 4j, 3)
    assert (a * b).body == (2 + 1j) * (-0.5 + 4j)
    assert (a + b).body == (2 + 1j) + (-0.5 + 4j)
    assert gconj(a).body == 2 - 1j


def test_json_round_trip():
    x = GrassmannNumber(3, {(): 1.5, (0, 2): -2j, (1,): 0.25 + 0.5j})
    obj = json.loads(x.to_json())
    assert obj["K"] == 3
    assert GrassmannNumber.from_json(x.to_json()) == x


def test_blade_round_trip():
    x = GrassmannNumber(4, {(): 1, (1, 3): 2j, (0, 1, 2): -1})
    assert GrassmannNumber.from_blades(x.to_blades(), 4) == x


# ---- algebra laws -----------------------------------------------------------


@given(st.data())
def test_product_matches_naive_oracle(data):
    k = data.draw(st.integers(1, 6))
    a, b = data.draw(grassmann_numbers(k)), data.draw(grassmann_numbers(k))
    assert gmul(a, b) == _naive_product(a, b)


@given(st.data())
def test_product_matches_fock_representation(data):
    k = data.draw(st.integers(1, 5))
    a, b = data.draw(grassmann_numbers(k)), data.draw(grassmann_numbers(k))
    np.testing.assert_allclose(_represent(a * b), _represent(a) @ _represent(b), atol=1e-12)


@given(st.data())
def test_associative_and_distributive(data):
    k = data.draw(st.integers(1, 6))
    a, b, c = (data.draw(grassmann_numbers(k)) for _ in range(3))
    assert (a * b) * c == a * (b * c)
    assert a * (b + c) == a * b + a * c
    assert (a + b) * c == a * c + b * c


@given(st.data())
def test_odd_elements_square_to_zero(data):
    a = data.draw(grassmann_numbers(parity="odd"))
    assert (a * a).is_zero()


@given(st.data(), st.sampled_from(["even", "odd"]), st.sampled_from(["even", "odd"]))
def test_graded_commutativity(data, pa, pb):
    k = data.draw(st.integers(1, 6))
    a, b = data.draw(grassmann_numbers(k, pa)), data.draw(grassmann_numbers(k, pb))
    sign = -1 if pa == pb == "odd" else 1
    assert a * b == sign * (b * a)


@given(st.data())
def test_conj_is_involutive_anti_automorphism(data):
    k = data.draw(st.integers(1, 6))
    a, b = data.draw(grassmann_numbers(k)), data.draw(grassmann_numbers(k))
    assert gconj(gconj(a)) == a
    assert gconj(a * b) == gconj(b) * gconj(a)


@given(grassmann_numbers())
def test_conj_equals_word_reversal(x):
    # reversing a word of length m takes m(m-1)/2 transpositions
    reversed_terms = {tuple(reversed(w)): np.conj(c) for w, c in x.terms.items()}
    assert gconj(x) == GrassmannNumber(x.num_generators, reversed_terms)


@given(grassmann_numbers())
def test_soul_is_nilpotent(x):
    soul = x - x.body
    power = scalar(1, x.num_generators)
    for _ in range(x.num_generators + 1):
        power = power * soul
    assert power.is_zero()


@given(grassmann_numbers())
def test_grade_classification(x):
    lengths = {len(w) % 2 for w in x.terms}
    expected = Parity.EVEN if lengths <= {0} else Parity.ODD if lengths == {1} else Parity.MIXED
    assert grade(x) is expected


def test_all_basis_products_match_representation():
    k = 4
    basis = [GrassmannNumber(k, {w: 1}) for w in all_words(k)]
    for a, b in itertools.product(basis, repeat=2):
        np.testing.assert_array_equal(_represent(a * b), _represent(a) @ _represent(b))
