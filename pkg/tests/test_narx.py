import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from helpers import fd_jacobian, max_rel_error, random_dataset, scalar_predict
from narxsoc.data import build_regressors, fit_normalizer, normalized_channels
from narxsoc.errors import DelayMismatch, SeedLengthMismatch, ValidationError
from narxsoc.lm import TrainConfig, lm_fit
from narxsoc.narx import (
    NarxModel,
    forward_closed_loop,
    forward_open_loop,
    init_model,
    jacobian,
    load_model,
    n_params,
    save_model,
)


def zero_model(H, d, **overrides):
    fields = dict(
        input_weights=np.zeros((H, 4 * d)),
        input_bias=np.zeros(H),
        output_weights=np.zeros(H),
        output_bias=0.0,
    )
    fields.update(overrides)
    return NarxModel(H, d, **fields)


def test_param_count():
    assert init_model(4, 100).param_count == 1609
    assert n_params(4, 2) == 41


def test_init_deterministic_and_bounded():
    a, b = init_model(4, 2, seed=9), init_model(4, 2, seed=9)
    assert_array_equal(a.params(), b.params())
    assert np.all(np.abs(a.input_weights) <= 1 / math.sqrt(8))
    assert np.all(np.abs(a.input_bias) <= 0.1)
    assert not np.array_equal(a.params(), init_model(4, 2, seed=10).params())


def test_params_roundtrip():
    m = init_model(3, 4, seed=1)
    assert_array_equal(m.with_params(m.params()).params(), m.params())
    theta = m.params()
    assert_array_equal(m.with_params(theta).input_weights.ravel(), theta[: 3 * 16])


def test_zero_network():
    ds = random_dataset(10, 3, 0)
    assert_array_equal(forward_open_loop(zero_model(2, 3), ds), np.zeros(10))


def test_constant_through_tanh():
    m = zero_model(1, 3, input_bias=[0.5], output_weights=[1.0])
    pred = forward_open_loop(m, random_dataset(5, 3, 1))
    assert_allclose(pred, 0.462117, atol=1e-6)
    assert pred[0] == math.tanh(0.5)


def test_scalar_oracle():
    m = init_model(3, 4, seed=2).with_params(np.random.default_rng(2).normal(size=n_params(3, 4)))
    ds = random_dataset(20, 4, 3)
    expected = [scalar_predict(m, x) for x in ds.features]
    assert_allclose(forward_open_loop(m, ds), expected, rtol=0, atol=1e-12)


def test_delay_mismatch():
    with pytest.raises(DelayMismatch):
        forward_open_loop(init_model(2, 3), random_dataset(5, 4, 0))
    with pytest.raises(DelayMismatch):
        jacobian(init_model(2, 3), random_dataset(5, 4, 0))


@given(seed=st.integers(0, 1000))
def test_permutation_equivariance(seed):
    m = init_model(4, 5, seed=seed)
    ds = random_dataset(30, 5, seed)
    perm = np.random.default_rng(seed).permutation(30)
    assert_array_equal(forward_open_loop(m, ds)[perm], forward_open_loop(m, ds.subset(perm)))


@given(scale=st.floats(1e-3, 1e6), seed=st.integers(0, 100))
def test_predictions_finite(scale, seed):
    m = init_model(4, 2, seed=seed)
    m = m.with_params(m.params() * scale)
    ds = random_dataset(10, 2, seed)
    ds = type(ds)(2, ds.features * scale, ds.targets, ds.source_cycle, ds.time)
    assert np.all(np.isfinite(forward_open_loop(m, ds)))


def test_teacher_forced_equals_open_loop(urban_log, small_dataset):
    ds, norm = small_dataset
    for seed in range(3):
        m = init_model(4, 3, seed=seed)
        z = normalized_channels(urban_log, norm)
        closed = forward_closed_loop(m, z[:, :3], z[:3, 3], teacher=z[:, 3])
        open_ = forward_open_loop(m, build_regressors([urban_log], 3, norm))
        assert_array_equal(closed, open_)


def test_closed_loop_zero_model():
    z = np.random.default_rng(0).uniform(-1, 1, (30, 3))
    out = forward_closed_loop(zero_model(2, 4, output_bias=0.25), z, np.zeros(4))
    assert_array_equal(out, np.full(26, 0.25))


def test_closed_loop_errors():
    m = init_model(2, 4)
    z = np.zeros((10, 3))
    with pytest.raises(SeedLengthMismatch):
        forward_closed_loop(m, z, np.zeros(3))
    with pytest.raises(ValidationError):
        forward_closed_loop(m, np.zeros((4, 3)), np.zeros(4))


def reference_rollout(model, exog, seed):
    d = model.delay_count
    fb = list(seed)
    out = []
    for t in range(d, len(exog)):
        x = []
        for k in range(3):
            x += [exog[t - lag, k] for lag in range(1, d + 1)]
        x += [fb[t - lag] for lag in range(1, d + 1)]
        y = scalar_predict(model, x)
        out.append(y)
        fb.append(y)
    return np.array(out)


def test_closed_loop_matches_reference(urban_log):
    log = urban_log
    norm = fit_normalizer([log])
    ds = build_regressors([log], 3, norm)
    model, _ = lm_fit(init_model(2, 3, seed=0, normalizer=norm), ds, ds, TrainConfig(max_epochs=10))
    z = normalized_channels(log, norm)[:203]
    closed = forward_closed_loop(model, z[:, :3], z[:3, 3])
    assert len(closed) == 200
    assert_allclose(closed, reference_rollout(model, z[:, :3], z[:3, 3]), rtol=0, atol=1e-12)


def test_clamped_feedback_bounded():
    m = zero_model(1, 2, output_bias=5.0)
    z = np.zeros((10, 3))
    free = forward_closed_loop(m, z, np.zeros(2))
    assert np.all(free == 5.0)
    clamped = forward_closed_loop(m, z, np.zeros(2), clamp_feedback=True)
    assert np.all(clamped == 5.0)  # outputs are not clamped, only what is fed back


def _fd_check(model, ds):
    J, r = jacobian(model, ds)

    def resid(theta):
        return forward_open_loop(model.with_params(theta), ds) - ds.targets

    assert_allclose(r, resid(model.params()), rtol=0, atol=1e-15)
    return max_rel_error(J, fd_jacobian(resid, model.params()))


@pytest.mark.parametrize("kind", ["zero", "random", "trained"])
def test_jacobian_finite_differences(kind):
    ds = random_dataset(50, 3, 7)
    if kind == "zero":
        model = zero_model(2, 3)
    else:
        model = init_model(2, 3, seed=4)
        if kind == "trained":
            model, _ = lm_fit(model, ds, ds, TrainConfig(max_epochs=20))
    assert _fd_check(model, ds) < 1e-6


def test_jacobian_output_bias_column_and_shape():
    ds = random_dataset(12, 100, 0)
    J, r = jacobian(init_model(4, 100), ds)
    assert J.shape == (12, 1609) and r.shape == (12,)
    assert_array_equal(J[:, -1], 1.0)


def test_model_file_roundtrip(tmp_path, small_dataset):
    _, norm = small_dataset
    m = init_model(4, 3, seed=5, normalizer=norm)
    m = m.with_params(m.params() * np.pi)
    save_model(m, tmp_path / "m.json")
    back = load_model(tmp_path / "m.json")
    assert_array_equal(back.params(), m.params())
    assert back.normalizer == norm
    text = (tmp_path / "m.json").read_text()
    assert '"format_version": 1' in text


def test_model_file_bad_version(tmp_path):
    (tmp_path / "m.json").write_text('{"format_version": 99}')
    with pytest.raises(ValidationError):
        load_model(tmp_path / "m.json")
