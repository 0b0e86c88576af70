import numpy as np
import pytest

from lodegp.errors import NoReferenceSolutionError, UnknownSystemError
from lodegp.opalgebra import parse_matrix
from lodegp.systems import SYSTEM_NAMES, generate_data, make_system
from lodegp.verify import ode_residual


class TestMakeSystem:
    def test_unknown_name(self):
        with pytest.raises(UnknownSystemError):
            make_system("quadruple-pendulum")

    def test_bipendulum_matrix(self):
        spec = make_system("bipendulum")
        assert spec.matrix == parse_matrix(
            [["D^2 + 981/100", "0", "-1"], ["0", "D^2 + 981/200", "-1/2"]]
        )
        assert spec.channels == ("f1", "f2", "u")
        assert spec.train_interval == (1.0, 6.0)
        assert spec.eval_interval == (1.0, 11.0)
        assert spec.noise_std == 0.012

    def test_heating_defaults(self):
        spec = make_system("heating")
        assert spec.param_symbols == ("a", "b")
        assert spec.param_defaults == {"a": 3.0, "b": 1.0}
        assert spec.param_init == {"a": 1.0, "b": 1.0}
        assert spec.train_interval == (-5.0, 5.0)
        assert spec.eval_interval == (-9.0, 9.0)
        assert spec.noise_std == 0.02

    def test_three_tank_shape_and_noise(self):
        spec = make_system("three-tank")
        assert spec.matrix.rows == 3 and spec.matrix.cols == 5
        assert spec.noise_std == 0.08

    def test_equal_length_has_no_reference(self):
        spec = make_system("bipendulum-equal")
        assert spec.ref_solution is None


class TestReferenceSolutions:
    def test_heating_initial_values(self):
        spec = make_system("heating")
        v = spec.ref_solution(np.array([0.0]))[0]
        assert v == pytest.approx([0.5, 0.0, 1.9])

    def test_three_tank_initial_values(self):
        spec = make_system("three-tank")
        v = spec.ref_solution(np.array([0.0]))[0]
        assert v == pytest.approx([1.0, 1.0, 0.0, -0.5, 0.25])

    def test_bipendulum_initial_values(self):
        spec = make_system("bipendulum")
        v = spec.ref_solution(np.array([0.0]))[0]
        assert v[0] == pytest.approx(-0.6)
        assert v[1] == pytest.approx(-0.3)

    @pytest.mark.parametrize("name", [n for n in SYSTEM_NAMES if n != "bipendulum-equal"])
    def test_reference_satisfies_system(self, name):
        # first-order systems carry forward-difference truncation near
        # (delta/2) * |f''|, so the bound is 2e-4 rather than 1e-5
        spec = make_system(name)
        rep = ode_residual(
            spec.ref_solution, spec, spec.eval_interval, params=spec.param_defaults
        )
        assert rep.mean <= 2e-4
        if name == "bipendulum":
            assert rep.mean <= 1e-5


class TestGenerateData:
    def test_noiseless_values_match_reference(self):
        spec = make_system("heating")
        data = generate_data(spec, 25, noise_std=0.0, seed=0)
        assert data.values == pytest.approx(spec.ref_solution(data.times))
        assert data.times[0] == spec.train_interval[0]
        assert data.times[-1] == spec.train_interval[1]

    def test_same_seed_identical(self):
        spec = make_system("bipendulum")
        d1 = generate_data(spec, 25, seed=3)
        d2 = generate_data(spec, 25, seed=3)
        assert np.array_equal(d1.values, d2.values)
        d3 = generate_data(spec, 25, seed=4)
        assert not np.array_equal(d1.values, d3.values)

    def test_noise_statistics(self):
        spec = make_system("bipendulum")
        d = generate_data(spec, 10000, interval=(0.0, 1.0), noise_std=0.08, seed=5)
        noise = d.values - spec.ref_solution(d.times)
        assert abs(noise.std() - 0.08) / 0.08 < 0.03

    def test_missing_reference(self):
        spec = make_system("bipendulum-equal")
        with pytest.raises(NoReferenceSolutionError):
            generate_data(spec, 10)
