import logging

import numpy as np
import pytest

from jumpfbsde.core.exceptions import ConfigurationError, NumericalRangeError
from jumpfbsde.utils.io import config_hash, format_value, read_csv, to_jsonable, write_csv
from jumpfbsde.utils.quadrature import tail_integrals
from jumpfbsde.utils.regression import build_model, exponent_set, fit_model, select_variables
from jumpfbsde.utils.rng import (BLOCK_SIZE, check_seed, draw_increments, path_block_index)
from jumpfbsde.utils.roots import at_resolution, bisect_decreasing, expand_bracket, secant_polish


class TestRegression:
    def test_exponent_order(self):
        assert exponent_set(2, [2, 2]) == [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]
        assert exponent_set(3, [1]) == [(0,), (1,)]

    def test_drops_constant_and_collinear_variables(self):
        x = np.linspace(-1.0, 1.0, 50)
        chosen = select_variables([("x", x), ("c", np.ones(50)), ("y", 2.0 * x + 1.0)])
        assert [name for name, _, _ in chosen] == ["x"]

    def test_recovers_polynomial(self):
        x = np.linspace(-1.0, 2.0, 200)
        target = 1.0 + 2.0 * x + 3.0 * x**2
        model = fit_model({"x": x}, target, degree=2)
        assert not model.reduced
        np.testing.assert_allclose(model.predict({"x": x}), target, rtol=0, atol=1e-8)

    def test_discrete_powers_are_capped(self):
        n = np.tile(np.arange(6.0), 20)
        model = build_model({"n": n}, degree=3, discrete=("n",))
        assert max(e[0] for e in model.exponents) == 2

    def test_rank_deficient_design_lowers_degree(self, caplog):
        x = np.tile([-1.0, 0.0, 1.0], 100)
        state = {"x": x, "n": x**2}
        with caplog.at_level(logging.WARNING):
            model = fit_model(state, 2.0 + x, degree=2, discrete=("n",))
        assert model.reduced
        assert model.degree == 1
        assert "Rank-deficient" in caplog.text
        np.testing.assert_allclose(model.predict(state), 2.0 + x, atol=1e-10)

    def test_constant_state_fits_the_mean(self):
        model = fit_model({"x": np.zeros(10)}, np.arange(10.0), degree=3)
        assert model.names == []
        np.testing.assert_allclose(model.predict({"x": np.zeros(3)}), 4.5)


class TestRandomStreams:
    def test_shapes(self):
        dW, dN = draw_increments(1, 10, 4, 0.25, 2.0)
        assert dW.shape == (10, 4)
        assert dN.dtype == np.int64

    def test_block_index(self):
        assert path_block_index(BLOCK_SIZE + 3) == (1, 3)

    @pytest.mark.parametrize("seed", [-1, 2**64, 1.5, True])
    def test_rejects_bad_seeds(self, seed):
        with pytest.raises(ConfigurationError, match="mc.seed"):
            check_seed(seed)


class TestRoots:
    def test_bisection_to_machine_resolution(self):
        lo, hi = bisect_decreasing(lambda x: 1.0 - x, np.array([0.0]), np.array([3.0]))
        assert hi[0] - lo[0] <= 4e-16
        assert secant_polish(lambda x: 1.0 - x, lo, hi)[0] == pytest.approx(1.0, abs=1e-15)

    def test_brackets_shrink_past_the_first_halving(self):
        calls = []

        def cubic(x):
            calls.append(1)
            return np.asarray(1.0 - x**3)

        lo, hi = bisect_decreasing(cubic, np.array([0.0]), np.array([4.0]))
        assert len(calls) > 50
        assert lo[0] <= 1.0 <= hi[0]
        assert at_resolution(lo, hi)[0]

    def test_independent_brackets(self):
        roots = np.array([-2.5, 0.3, 7.0])
        lo, hi = bisect_decreasing(lambda x: roots - x, np.full(3, -10.0), np.full(3, 10.0))
        assert np.all(at_resolution(lo, hi))
        np.testing.assert_allclose(0.5 * (lo + hi), roots, rtol=0, atol=1e-14)

    def test_resolution(self):
        x = np.array([1.0, 1.0])
        assert list(at_resolution(x, np.array([np.nextafter(1.0, 2.0), 1.5]))) == [True, False]

    def test_non_finite_inside_bracket(self):
        def func(x):
            return np.where(x > 1.0, np.nan, 2.0 - x)

        with pytest.raises(NumericalRangeError):
            bisect_decreasing(func, np.array([0.0]), np.array([4.0]))

    def test_expansion(self):
        lo, hi = expand_bracket(lambda x: 5.0 - x, np.array([0.0]))
        assert lo[0] <= 5.0 <= hi[0]

    def test_expansion_without_sign_change(self):
        with pytest.raises(NumericalRangeError):
            expand_bracket(lambda x: np.ones_like(x), np.array([0.0]), max_doublings=10)


class TestQuadrature:
    def test_tail_integrals_of_linear_function(self):
        t = np.linspace(0.0, 1.0, 11)
        out = tail_integrals(2.0 + t, t)
        expected = 2.0 * (1.0 - t) + 0.5 * (1.0 - t**2)
        np.testing.assert_allclose(out, expected, rtol=0, atol=1e-12)
        assert out[-1] == 0.0


class TestFlatFiles:
    def test_config_hash_ignores_key_order(self):
        assert config_hash({"a": 1, "b": {"c": 2.5}}) == config_hash({"b": {"c": 2.5}, "a": 1})
        assert config_hash({"a": 1}) != config_hash({"a": 2})

    def test_jsonable(self):
        data = to_jsonable({"x": np.float64(1.5), "n": np.int64(3), "ok": np.bool_(True),
                            "v": np.array([1.0, np.nan])})
        assert data == {"x": 1.5, "n": 3, "ok": True, "v": [1.0, None]}
        assert isinstance(data["ok"], bool)

    def test_csv_cells(self, tmp_path):
        path = tmp_path / "rows.csv"
        count = write_csv([{"a": 0.1, "b": None}, {"a": 2, "b": True}], path, ["a", "b"])
        assert count == 2
        rows = read_csv(path)
        assert rows[0] == {"a": "0.10000000000000001", "b": ""}
        assert rows[1] == {"a": "2", "b": "true"}
        assert float(rows[0]["a"]) == 0.1
        assert format_value(np.float32(0.5)) == "0.5"
