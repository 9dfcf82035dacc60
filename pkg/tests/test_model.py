import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from pcsynth.model import (
    ModelError,
    SwitchedSystem,
    SwitchingSignal,
    convex_combination,
    example_family,
    load_system,
    random_simplex_weights,
    save_system,
)


def doc(modes, n=2, m=1):
    return json.dumps({"n": n, "m": m, "modes": modes})


class TestLoad:
    def test_two_modes(self):
        text = doc([{"A": [[1, 0], [0, 1]], "B": [[1], [0]]}, {"A": [[0, 1], [1, 0]], "B": [[0], [1]]}])
        s = load_system(text)
        assert (s.n, s.m, s.M) == (2, 1, 2)

    def test_dimension_error_names_mode(self):
        text = doc([{"A": [[1, 0], [0, 1]], "B": [[1], [0]]}, {"A": [[0, 1], [1, 0]], "B": [[1]]}])
        with pytest.raises(ModelError, match="mode 2"):
            load_system(text)

    def test_example1_document(self):
        s = load_system(save_system(example_family("ex1", 0.5)))
        np.testing.assert_array_equal(s.A[1], [[0.5, 0], [1, 0.5]])
        np.testing.assert_array_equal(s.B[1], [[0.5], [-1]])

    @pytest.mark.parametrize("text", ["{", "[]", '{"n": 2}', doc([{"A": [[1, 0], [0, 1]]}])])
    def test_malformed(self, text):
        with pytest.raises(ModelError):
            load_system(text)

    def test_non_finite(self):
        with pytest.raises(ModelError, match="non-finite"):
            SwitchedSystem(([[np.nan]],), ([[1.0]],))

    def test_read_only(self):
        s = example_family("ex3")
        with pytest.raises(ValueError):
            s.A[0][0, 0] = 5.0

    @settings(max_examples=40, deadline=None)
    @given(
        hnp.arrays(np.float64, (3, 2, 2), elements=st.floats(-1e6, 1e6, allow_nan=False)),
        hnp.arrays(np.float64, (3, 2, 1), elements=st.floats(-1e6, 1e6, allow_nan=False)),
    )
    def test_round_trip_exact(self, A, B):
        s = SwitchedSystem(tuple(A), tuple(B))
        assert load_system(save_system(s)) == s


class TestExamples:
    def test_ex1(self):
        s = example_family("ex1", 0.6667)
        np.testing.assert_array_equal(s.A[0], [[0.1, 0.9], [0, 0.1]])
        np.testing.assert_array_equal(s.B[0], [[0], [0]])

    def test_ex2_actuates_mode_one(self):
        np.testing.assert_array_equal(example_family("ex2", 0.6).B[0], [[1], [0]])

    def test_ex3(self):
        s = example_family("ex3")
        np.testing.assert_array_equal(s.A[1], [[-1, 0], [0, -0.95]])
        for b in s.B:
            np.testing.assert_array_equal(b, [[1], [0]])

    def test_ex4(self):
        s = example_family("ex4")
        assert s.M == 3 and s.n == 2
        np.testing.assert_array_equal(s.A[2], [[0.5, 0.8], [1.1, 0.5]])

    def test_ex5(self):
        s = example_family("ex5")
        assert (s.M, s.n, s.m) == (4, 3, 1)
        for b in s.B:
            np.testing.assert_array_equal(b, [[0], [0], [0.3]])
        np.testing.assert_array_equal(s.A[3][0], [0.32, 0, 0])

    def test_alpha_rules(self):
        with pytest.raises(ModelError):
            example_family("ex1")
        with pytest.raises(ModelError):
            example_family("ex3", 0.5)
        with pytest.raises(ModelError):
            example_family("ex6")


class TestConvexCombination:
    def test_vertex(self):
        s = example_family("ex4")
        A, B = convex_combination(s, [0, 1, 0])
        np.testing.assert_array_equal(A, s.A[1])
        np.testing.assert_array_equal(B, s.B[1])

    def test_midpoint_ex3(self):
        A, B = convex_combination(example_family("ex3"), [0.5, 0.5])
        np.testing.assert_allclose(A, [[-0.5, 0.5], [-0.5, -0.475]], atol=1e-15)
        np.testing.assert_array_equal(B, [[1], [0]])

    @pytest.mark.parametrize("w", [[0.5, 0.4], [1.2, -0.2], [1.0], [0.5, 0.5, 0.0]])
    def test_invalid_weights(self, w):
        with pytest.raises(ModelError):
            convex_combination(example_family("ex3"), w)

    def test_random_weights_in_simplex(self):
        W = random_simplex_weights(3, 100, seed=4)
        assert W.shape == (100, 3)
        assert np.all(W >= 0)
        np.testing.assert_allclose(W.sum(axis=1), 1.0, atol=1e-12)
        np.testing.assert_array_equal(W, random_simplex_weights(3, 100, seed=4))


class TestSignal:
    def test_periodic(self):
        assert list(SwitchingSignal.parse("periodic:1,2,3", 3, 7)) == [1, 2, 3, 1, 2, 3, 1]

    def test_explicit(self):
        assert list(SwitchingSignal.parse("2,1,1", 2, 3)) == [2, 1, 1]

    def test_random_seeded(self):
        a = SwitchingSignal.parse("random:9", 3, 50)
        b = SwitchingSignal.random(3, 50, 9)
        assert a == b
        assert set(a) <= {1, 2, 3}

    def test_out_of_range(self):
        with pytest.raises(ModelError):
            SwitchingSignal.parse("1,3", 2, 2)

    def test_garbage(self):
        with pytest.raises(ModelError):
            SwitchingSignal.parse("periodic:a", 2, 2)
