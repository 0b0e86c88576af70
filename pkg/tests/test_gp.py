import math

import numpy as np
import pytest

from lodegp.errors import EmptySelectionError, UnboundSymbolError
from lodegp.gp import (
    Dataset,
    LodeGPModel,
    eig_count,
    gram,
    init_model,
    marginalize,
    neg_mll,
    posterior,
    posterior_mean,
    sample,
    transform,
)
from lodegp.kernelalg import compile_lodegp, diagonal_se_kernel
from lodegp.systems import generate_data, make_system


@pytest.fixture(scope="module")
def se_model():
    kernel = diagonal_se_kernel(("y",))
    return init_model(kernel)  # sigma = ell = 1


@pytest.fixture(scope="module")
def bip_model():
    kernel = compile_lodegp(make_system("bipendulum"))
    return init_model(kernel)


class TestGram:
    def test_single_point_unit_se(self, se_model):
        G = gram(se_model, [0.0])
        assert G.shape == (1, 1)
        assert G[0, 0] == pytest.approx(1.0)

    def test_two_point_unit_se(self, se_model):
        G = gram(se_model, [0.0, 1.0])
        e = math.exp(-0.5)
        assert G == pytest.approx(np.array([[1.0, e], [e, 1.0]]))

    def test_time_major_layout(self, bip_model):
        times = np.array([0.5, 1.5])
        G = gram(bip_model, times)
        assert G.shape == (6, 6)
        kernel, binding = bip_model.resolved()
        # row i*n + c is time i, channel c
        assert G[0 * 3 + 1, 1 * 3 + 2] == pytest.approx(
            kernel.entry(1, 2).evaluate(0.5, 1.5, binding), rel=1e-9, abs=1e-9
        )

    def test_psd_on_random_grid(self, bip_model):
        rng = np.random.default_rng(3)
        times = np.sort(rng.uniform(0, 8, 10))
        G = gram(bip_model, times)
        assert np.allclose(G, G.T)
        eig = np.linalg.eigvalsh(G)
        assert eig.min() >= -1e-8 * np.trace(G)

    def test_unbound_slot_raises(self):
        kernel = diagonal_se_kernel(("y",))
        model = LodeGPModel(kernel=kernel, raw_hypers={}, ode_params={}, noise_raw=0.0)
        with pytest.raises(UnboundSymbolError):
            gram(model, [0.0])


class TestNegMll:
    def test_single_point_zero_observation(self, se_model):
        # K = [[1]], noise ~ 0, y = 0: nll = 0.5 log 2 pi
        model = se_model.with_raw(noise_raw=-40.0)
        data = Dataset([0.0], [[0.0]], ("y",))
        assert neg_mll(model, data) == pytest.approx(0.5 * math.log(2 * math.pi), abs=1e-6)

    def test_single_point_closed_form(self, se_model):
        # K = [[1]], s^2 = 1, y = 2: nll = (4/2/2) + 0.5 log 2 + 0.5 log 2 pi
        data = Dataset([0.0], [[2.0]], ("y",))
        softplus_inv_1 = math.log(math.e - 1.0)
        model = se_model.with_raw(noise_raw=softplus_inv_1)
        expected = 0.5 * 4 / 2 + 0.5 * math.log(2.0) + 0.5 * math.log(2 * math.pi)
        assert neg_mll(model, data) == pytest.approx(expected, abs=1e-8)

    def test_permutation_invariance(self, bip_model):
        rng = np.random.default_rng(0)
        times = np.array([0.1, 0.9, 2.0, 3.3])
        values = rng.normal(size=(4, 3))
        d1 = Dataset(times, values, ("f1", "f2", "u"))
        perm = [2, 0, 3, 1]
        d2 = Dataset(times[perm], values[perm], ("f1", "f2", "u"))
        assert neg_mll(bip_model, d1) == pytest.approx(neg_mll(bip_model, d2), abs=1e-12)

    def test_empty_data_rejected(self, se_model):
        with pytest.raises(Exception):
            neg_mll(se_model, Dataset([], np.zeros((0, 1)), ("y",)))


class TestPosterior:
    def test_no_data_gives_prior(self, se_model):
        times = np.array([0.0, 1.0])
        post = posterior(se_model, None, times)
        assert post.mean == pytest.approx(np.zeros((2, 1)))
        assert post.covariance == pytest.approx(gram(se_model, times))

    def test_interpolation_limit(self, se_model):
        model = se_model.with_raw(noise_raw=-40.0)  # noise at the floor
        data = Dataset([0.0, 1.0, 2.5], [[0.3], [-0.4], [0.9]], ("y",))
        post = posterior(model, data, data.times)
        assert post.mean == pytest.approx(data.values, abs=1e-6)

    def test_variance_never_exceeds_prior(self, bip_model):
        spec = make_system("bipendulum")
        data = generate_data(spec, 10, noise_std=0.01, seed=1)
        query = np.linspace(0.5, 7.0, 9)
        post = posterior(bip_model, data, query)
        prior = gram(bip_model, query)
        assert np.all(np.diag(post.covariance) <= np.diag(prior) + 1e-9)

    def test_posterior_mean_matches_full_posterior(self, bip_model):
        spec = make_system("bipendulum")
        data = generate_data(spec, 8, noise_std=0.01, seed=3)
        query = np.linspace(1.0, 6.0, 7)
        post = posterior(bip_model, data, query)
        mean = posterior_mean(bip_model, data, query)
        assert mean == pytest.approx(post.mean, abs=1e-10)


class TestSample:
    def test_deterministic_given_seed(self, bip_model):
        times = np.linspace(1, 4, 12)
        a = sample(bip_model, times, count=2, seed=77)
        b = sample(bip_model, times, count=2, seed=77)
        for x, y in zip(a, b):
            assert np.array_equal(x, y)
        c = sample(bip_model, times, count=2, seed=78)
        assert not np.array_equal(a[0], c[0])

    def test_standard_normal_statistics(self, se_model):
        # with covariance I (se at distant points ~ I is awkward; use one point)
        draws = sample(se_model, [0.0], count=10000, seed=5)
        vals = np.array([d[0, 0] for d in draws])
        assert abs(vals.mean()) < 0.05
        assert abs(vals.std() - 1.0) < 0.05

    def test_empirical_covariance_matches(self, se_model):
        times = np.linspace(0, 2, 5)
        draws = sample(se_model, times, count=200, seed=4)
        X = np.stack([d[:, 0] for d in draws])
        emp = (X.T @ X) / len(draws)
        K = gram(se_model, times)
        rel = np.linalg.norm(emp - K) / np.linalg.norm(K)
        assert rel < 0.15

    def test_prior_sample_satisfies_odes(self, bip_model):
        from lodegp.verify import ode_residual

        spec = make_system("bipendulum")
        draw = {}

        def eval_fn(ts):
            draw["values"] = sample(bip_model, ts, count=1, seed=2)[0]
            return draw["values"]

        rep = ode_residual(eval_fn, spec, (1.0, 6.0))
        bound = 1e-3 * float(np.max(np.abs(draw["values"])))
        assert rep.mean <= bound


class TestMarginalize:
    def test_keep_all_channels_identity(self, bip_model):
        times = np.linspace(0, 3, 4)
        full = gram(bip_model, times)
        kept = gram(marginalize(bip_model, ["f1", "f2", "u"]), times)
        assert kept == pytest.approx(full)

    def test_single_channel_block(self, bip_model):
        times = np.linspace(0, 3, 4)
        sub = gram(marginalize(bip_model, ["f2"]), times)
        full = gram(bip_model, times)
        picked = full.reshape(4, 3, 4, 3)[:, 1, :, 1].reshape(4, 4)
        assert sub == pytest.approx(picked)

    def test_marginalize_then_gram_equals_subblock(self):
        kernel = compile_lodegp(make_system("three-tank"))
        model = init_model(kernel)
        times = np.linspace(1, 5, 6)
        sub = gram(marginalize(model, ["f1", "f2", "f3"]), times)
        full = gram(model, times).reshape(6, 5, 6, 5)
        block = full[:, :3, :, :3].reshape(18, 18)
        assert sub == pytest.approx(block)

    def test_empty_selection(self, bip_model):
        with pytest.raises(EmptySelectionError):
            marginalize(bip_model, [])


class TestEigCount:
    def test_identity_model(self, se_model):
        # three distant points: gram ~ I
        count = eig_count(se_model, [0.0, 100.0, 200.0], 1e-6)
        assert count == 3

    def test_zero_kernel(self):
        kernel = diagonal_se_kernel(("y",))
        model = init_model(kernel, raw_hypers={"sigma0": -200.0})
        assert eig_count(model, np.linspace(0, 1, 5), 1e-6) == 0

    def test_threshold_validation(self, se_model):
        with pytest.raises(ValueError):
            eig_count(se_model, [0.0], 0.0)


class TestTransform:
    def test_noise_softplus_at_zero(self):
        assert transform(0.0, "noise") == pytest.approx(math.log(2.0) + 1e-10)

    def test_lengthscale_exp(self):
        assert transform(0.0, "lengthscale") == 1.0
        assert transform(1.0, "variance") == pytest.approx(math.e)

    def test_noise_floor(self):
        assert transform(-30.0, "noise") >= 1e-10

    def test_odeparam_identity(self):
        assert transform(-2.5, "odeparam") == -2.5

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            transform(0.0, "scale")
