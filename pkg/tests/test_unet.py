import numpy as np
import pytest

from _gradcheck import check_gradients
from rpeakkit.autodiff.functional import smooth_l1
from rpeakkit.autodiff.tensor import Tensor
from rpeakkit.dtmap import DistanceMap, dt_from_peaks
from rpeakkit.errors import ConfigError, InputError, ShapeError
from rpeakkit.signal_io import Window
from rpeakkit.unet import (
    ModelConfig,
    TrainConfig,
    build,
    channels_at,
    fit,
    kfold_split,
    length_trace,
    load_model,
    predict_peaks,
    save_model,
)
from rpeakkit.unet.model import InceptionRes
from rpeakkit.unet.train import read_train_log


def test_channels_at():
    cfg = ModelConfig()
    assert [channels_at(cfg, s) for s in (0, 6, 7)] == [16, 1024, 1024]
    assert [channels_at(cfg, s) for s in range(8)] == [16, 32, 64, 128, 256, 512, 1024, 1024]
    with pytest.raises(ConfigError):
        channels_at(cfg, 8)


def test_default_length_trace():
    trace = length_trace(ModelConfig())
    assert [t[0] for t in trace] == [5000, 2500, 1250, 625, 312, 156, 78, 39]
    assert [t[1] for t in trace] == [False, False, False, True, False, False, False, True]
    assert trace[-1][2] == 19


@pytest.mark.parametrize("kw", [
    {"depth": 0}, {"base_channels": 6}, {"base_channels": 2, "inception_kernels": (3, 5)},
    {"inception_kernels": (15, 16, 19, 21)}, {"input_length": 1}, {"max_channels": 8},
])
def test_config_validation(kw):
    with pytest.raises(ConfigError):
        ModelConfig(**kw)


def test_bottleneck_too_short():
    with pytest.raises(ConfigError):
        build(ModelConfig(input_length=8, depth=5, base_channels=8))


def test_small_build_shape():
    model = build(ModelConfig(input_length=40, depth=3, base_channels=8), seed=1)
    y = model(Tensor(np.random.default_rng(0).standard_normal((2, 1, 40))))
    assert y.shape == (2, 1, 40)
    assert np.all((y.data > 0) & (y.data < 1))


def test_same_seed_same_parameters():
    cfg = ModelConfig(input_length=64, depth=2, base_channels=8)
    a, b, c = build(cfg, 3), build(cfg, 3), build(cfg, 4)
    pa, pb, pc = a.state_arrays(), b.state_arrays(), c.state_arrays()
    assert all(np.array_equal(pa[k], pb[k]) for k in pa)
    assert not all(np.array_equal(pa[k], pc[k]) for k in pa)


def test_forward_length_mismatch():
    model = build(ModelConfig(input_length=64, depth=2, base_channels=8))
    with pytest.raises(ShapeError):
        model(Tensor(np.zeros((1, 1, 63))))


def test_eval_forward_is_bitwise_repeatable():
    model = build(ModelConfig(input_length=77, depth=3, base_channels=8), 0).eval()
    x = Tensor(np.random.default_rng(1).standard_normal((3, 1, 77)))
    assert np.array_equal(model(x).data, model(x).data)


def test_zero_input_is_finite():
    model = build(ModelConfig(input_length=100, depth=3, base_channels=8)).eval()
    y = model(Tensor(np.zeros((1, 1, 100)))).data
    assert np.all(np.isfinite(y)) and np.all((y > 0) & (y < 1))


# ---------------------------------------------------------------- inception-res block


def _block(channels, seed=0):
    return InceptionRes(np.random.default_rng(seed), channels, ModelConfig(base_channels=8))


def test_residual_identity_when_branches_zero():
    block = _block(16)
    for name, p in block.named_parameters():
        if not name.endswith(("gamma", "beta")):
            p.data[...] = 0.0
    for b in block.branches:
        b.bn.training = False
    x = np.random.default_rng(2).standard_normal((2, 16, 38))
    np.testing.assert_array_equal(block(Tensor(x)).data, x)


@pytest.mark.parametrize("channels,length", [(16, 38), (16, 625), (64, 38), (64, 625)])
def test_block_preserves_shape(channels, length):
    block = _block(channels)
    assert block(Tensor(np.zeros((1, channels, length)))).shape == (1, channels, length)


def test_block_channel_errors():
    with pytest.raises(ShapeError):
        _block(6)
    with pytest.raises(ShapeError):
        _block(8)(Tensor(np.zeros((1, 16, 20))))


def test_block_gradients():
    rng = np.random.default_rng(3)
    block = _block(8, seed=3)
    x = Tensor(rng.standard_normal((2, 8, 64)), requires_grad=True)
    inputs = {"x": x, **dict(block.named_parameters())}
    err = check_gradients(lambda: block(x), inputs, rng, max_coords=30)
    assert err < 1e-4


def test_tiny_model_end_to_end_gradients():
    rng = np.random.default_rng(4)
    model = build(ModelConfig(input_length=64, depth=2, base_channels=8), seed=4)
    x = Tensor(rng.standard_normal((2, 1, 64)))
    target = rng.uniform(0, 1, (2, 1, 64))
    err = check_gradients(lambda: smooth_l1(model(x), target), model.parameters(), rng, max_coords=10)
    assert err < 1e-3


# ---------------------------------------------------------------- training


def _toy_pairs(n, length=128, seed=0):
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        peaks = np.sort(rng.choice(np.arange(10, length - 10), 2, replace=False))
        x = rng.standard_normal(length) * 0.05
        x[peaks] += 1.0
        w = Window(x, f"r{i}", 0, 500.0, peaks)
        out.append((w, dt_from_peaks(peaks, length)))
    return out


def test_zero_epochs_leaves_parameters():
    model = build(ModelConfig(input_length=128, depth=2, base_channels=8), 0)
    before = {k: v.copy() for k, v in model.state_arrays().items()}
    log = fit(model, _toy_pairs(4), TrainConfig(epochs=0))
    assert log.epochs == []
    after = model.state_arrays()
    assert all(np.array_equal(before[k], after[k]) for k in before)


def test_training_is_deterministic_and_reduces_loss():
    cfg = ModelConfig(input_length=128, depth=2, base_channels=8)
    tc = TrainConfig(epochs=6, batch_size=4, seed=5, base_lr=0.01)
    runs = []
    for _ in range(2):
        model = build(cfg, 1)
        log = fit(model, _toy_pairs(8), tc)
        runs.append((model.state_arrays(), log.losses))
    (pa, la), (pb, lb) = runs
    assert la == lb
    assert all(np.array_equal(pa[k], pb[k]) for k in pa)
    assert all(np.isfinite(la)) and la[-1] < la[0]


def test_fit_input_errors():
    model = build(ModelConfig(input_length=128, depth=2, base_channels=8))
    with pytest.raises(InputError):
        fit(model, [], TrainConfig(epochs=1))
    w, dt = _toy_pairs(1)[0]
    with pytest.raises(InputError):
        fit(model, [(w, DistanceMap(dt.values * 0 - 0.5 + 0.4, cap_samples=500))], TrainConfig(epochs=1))
    with pytest.raises(ShapeError):
        fit(model, _toy_pairs(1, length=100), TrainConfig(epochs=1))
    with pytest.raises(ConfigError):
        TrainConfig(batch_size=0)


def test_log_and_checkpoint_roundtrip(tmp_path):
    cfg = ModelConfig(input_length=128, depth=2, base_channels=8)
    model = build(cfg, 2)
    log = fit(model, _toy_pairs(4), TrainConfig(epochs=2, batch_size=2))
    log.write_csv(tmp_path / "log.csv")
    header = (tmp_path / "log.csv").read_text().splitlines()[0]
    assert header == "epoch,lr,mean_loss,val_f1"
    assert read_train_log(tmp_path / "log.csv").losses == pytest.approx(log.losses)

    save_model(model, tmp_path / "m.ckpt")
    back = load_model(tmp_path / "m.ckpt")
    assert back.config == cfg
    x = Tensor(np.random.default_rng(0).standard_normal((1, 1, 128)))
    assert np.array_equal(back(x).data, model.eval()(x).data)
    with pytest.raises(ShapeError):
        load_model(tmp_path / "m.ckpt", ModelConfig(input_length=128, depth=2, base_channels=12))


def test_predict_peaks_flat_and_idempotent():
    model = build(ModelConfig(input_length=128, depth=2, base_channels=8))
    # a large head bias pins the sigmoid output near 1: no valleys
    model.head.bias.data[:] = 20.0
    w = Window(np.zeros(128), "flat", 0, 500.0, np.zeros(0, np.int64))
    assert predict_peaks(model, w).sample_indices.tolist() == []
    w2 = _toy_pairs(1)[0][0]
    model.head.bias.data[:] = 0.0
    assert np.array_equal(predict_peaks(model, w2).sample_indices, predict_peaks(model, w2).sample_indices)


# ---------------------------------------------------------------- k-fold


def test_kfold_examples():
    folds = kfold_split(6, 3, seed=0)
    assert [len(v) for _, v in folds] == [2, 2, 2]
    assert sorted(np.concatenate([v for _, v in folds]).tolist()) == list(range(6))
    for train, val in folds:
        assert not set(train) & set(val)
        assert len(train) + len(val) == 6
    assert sorted(len(v) for _, v in kfold_split(2000, 3)) == [666, 667, 667]


def test_kfold_deterministic_and_errors():
    a, b = kfold_split(50, 3, 7), kfold_split(50, 3, 7)
    assert all(np.array_equal(x[1], y[1]) for x, y in zip(a, b))
    with pytest.raises(ConfigError):
        kfold_split(2, 3)
