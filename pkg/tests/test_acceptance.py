"""Acceptance suite: one PASS/FAIL verdict per criterion, printed in the run summary.

Each test records its verdict before asserting, so a failing criterion still
reports its measured value.
"""
import time

import numpy as np
import pytest

from _gradcheck import check_gradients
from _oracles import brute_dt, max_matching_oracle
from rpeakkit.autodiff import functional as F
from rpeakkit.autodiff.checkpoint import dumps
from rpeakkit.autodiff.optim import lr_at
from rpeakkit.autodiff.tensor import Tensor
from rpeakkit.detectors import CLASSIC, RPNetDetector, swt_detect
from rpeakkit.dtmap import dt_from_peaks, peaks_from_dt
from rpeakkit.evaluation import (evaluate_detector, make_noise, match_peaks, measured_snr_db,
                                 mix_noise, snr_sweep, synth_corpus)
from rpeakkit.signal_io import decode_fmt212, encode_fmt212, window_record
from rpeakkit.unet import (ModelConfig, TrainConfig, build, channels_at, evaluate_windows, fit,
                           make_targets, predict_peaks)
from rpeakkit.unet.model import InceptionRes

TOY = ModelConfig(input_length=2000, depth=4, base_channels=8)
TOY_SECONDS = 4.0  # 2000 samples at 500 Hz
KERNELS = (1, 4, 15, 17, 19, 21)
SHAPES_PER_PRIMITIVE = 20
SWEEP_LEVELS = (24.0, 18.0, 12.0, 6.0, 0.0)


def T(a, grad=True):
    return Tensor(np.asarray(a, dtype=np.float64), requires_grad=grad)


# ---------------------------------------------------------------- corpora


def clean_windows(n, seed):
    out = []
    for rec, ann in synth_corpus(n, duration_s=TOY_SECONDS, seed=seed):
        out += window_record(rec, ann, TOY_SECONDS)
    return out


def noisy_windows(n, seed, lo=6.0, hi=24.0):
    """One window per record, each mixed with its own ``mixed`` noise at a random SNR in [lo, hi]."""
    rng = np.random.default_rng(seed)
    out = []
    for i, (rec, ann) in enumerate(synth_corpus(n, duration_s=TOY_SECONDS, seed=seed)):
        noise = make_noise("mixed", len(rec), rec.fs, seed=seed * 1000 + i)
        out += window_record(mix_noise(rec, noise, rng.uniform(lo, hi)), ann, TOY_SECONDS)
    return out


def train_toy(windows, epochs, seed=0):
    model = build(TOY, seed=seed)
    t0 = time.perf_counter()
    fit(model, list(zip(windows, make_targets(windows))), TrainConfig(epochs=epochs, batch_size=16, seed=seed))
    return model, time.perf_counter() - t0


@pytest.fixture(scope="session")
def generalization_run():
    train_w, held_out = noisy_windows(200, seed=200), noisy_windows(50, seed=300)
    assert not {w.source_record_id for w in train_w} & {w.source_record_id for w in held_out}
    model, seconds = train_toy(train_w, epochs=60)
    return model, held_out, seconds


# ---------------------------------------------------------------- 1. gradients


def _conv_case(rng):
    k, s = int(rng.choice(KERNELS)), int(rng.integers(1, 3))
    c_in, c_out, batch = (int(v) for v in rng.integers(1, 4, 3))
    pad = (int(rng.integers(0, k)), int(rng.integers(0, k)))
    length = int(rng.integers(max(1, k - pad[0] - pad[1]), 40))
    x, w, b = T(rng.standard_normal((batch, c_in, length))), T(rng.standard_normal((c_out, c_in, k))), T(rng.standard_normal(c_out))
    return lambda: F.conv1d(x, w, b, s, pad), {"x": x, "w": w, "b": b}


def _convt_case(rng):
    k, s = int(rng.choice(KERNELS)), int(rng.integers(1, 3))
    c_in, c_out, batch = (int(v) for v in rng.integers(1, 4, 3))
    length = int(rng.integers(1, 20))
    op = int(rng.integers(0, s))
    full = (length - 1) * s + k + op
    pad = int(rng.integers(0, min(k, (full - 1) // 2 + 1)))
    x, w, b = T(rng.standard_normal((batch, c_in, length))), T(rng.standard_normal((c_in, c_out, k))), T(rng.standard_normal(c_out))
    return lambda: F.conv_transpose1d(x, w, b, s, pad, op), {"x": x, "w": w, "b": b}


def _bn_case(rng):
    batch, ch, length = int(rng.integers(1, 4)), int(rng.integers(1, 5)), int(rng.integers(2, 20))
    training = bool(rng.integers(0, 2))
    x = T(rng.standard_normal((batch, ch, length)) * rng.uniform(0.5, 3) + rng.uniform(-2, 2))
    g, b = T(rng.uniform(0.5, 2, ch)), T(rng.standard_normal(ch))
    rm, rv = rng.standard_normal(ch), rng.uniform(0.5, 2, ch)
    return lambda: F.batch_norm(x, g, b, rm.copy(), rv.copy(), training), {"x": x, "g": g, "b": b}


def _shape(rng):
    return tuple(int(v) for v in (rng.integers(1, 4), rng.integers(1, 5), rng.integers(1, 30)))


def _leaky_case(rng):
    x = T(rng.standard_normal(_shape(rng)))
    return lambda: F.leaky_relu(x), {"x": x}


def _concat_case(rng):
    b, c, n = _shape(rng)
    x, y = T(rng.standard_normal((b, c, n))), T(rng.standard_normal((b, int(rng.integers(1, 5)), n)))
    return lambda: F.concat_channels(x, y), {"x": x, "y": y}


def _add_case(rng):
    shape = _shape(rng)
    x, y = T(rng.standard_normal(shape)), T(rng.standard_normal(shape))
    return lambda: F.add(x, y), {"x": x, "y": y}


def _smooth_l1_case(rng):
    shape = _shape(rng)
    pred, target = rng.uniform(-3, 3, shape), rng.uniform(-3, 3, shape)
    # keep every difference clear of the branch switch, where the function is only C1
    near = np.abs(np.abs(target - pred) - 1.0) < 1e-2
    pred[near] += 0.1
    p, t = T(pred), T(target)
    return lambda: F.smooth_l1(p, t), {"p": p, "t": t}


def _block_case(rng):
    channels = 4 * int(rng.integers(1, 4))
    batch, length = int(rng.integers(1, 3)), int(rng.integers(8, 48))
    block = InceptionRes(rng, channels, ModelConfig(base_channels=8))
    x = T(rng.standard_normal((batch, channels, length)))
    return lambda: block(x), {"x": x, **dict(block.named_parameters())}


def _model_case(rng):
    depth = int(rng.integers(1, 3))
    length = int(rng.integers(4 * 2 ** depth, 48))
    model = build(ModelConfig(input_length=length, depth=depth, base_channels=4), seed=int(rng.integers(2**31)))
    x = Tensor(rng.standard_normal((2, 1, length)))
    target = rng.uniform(0, 1, (2, 1, length))
    return lambda: F.smooth_l1(model(x), target), model.parameters()


PRIMITIVES = [
    ("conv1d", _conv_case, None, 1e-4),
    ("conv1d_transpose", _convt_case, None, 1e-4),
    ("batch_norm", _bn_case, None, 1e-4),
    ("leaky_relu", _leaky_case, None, 1e-4),
    ("concat", _concat_case, None, 1e-4),
    ("add", _add_case, None, 1e-4),
    ("smooth_l1", _smooth_l1_case, None, 1e-4),
    ("inception_res", _block_case, 4, 1e-4),
    ("end_to_end", _model_case, 2, 1e-3),
]


def test_criterion_01_gradient_correctness(verdicts):
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    worst = {}
    for name, make, max_coords, _ in PRIMITIVES:
        errs = []
        for _ in range(SHAPES_PER_PRIMITIVE):
            fn, inputs = make(rng)
            errs.append(check_gradients(fn, inputs, rng, max_coords=max_coords))
        worst[name] = max(errs)
    seconds = time.perf_counter() - t0
    ok = all(worst[name] < tol for name, _, _, tol in PRIMITIVES) and seconds < 120
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    verdicts.record(1, "gradient correctness", ok,
                    f"{SHAPES_PER_PRIMITIVE} shapes per primitive, worst rel err {detail}; {seconds:.0f} s")
    assert ok


# ---------------------------------------------------------------- 2. SmoothL1


def _loss_and_grad(diff):
    pred = T([[[0.0]]])
    loss = F.smooth_l1(pred, np.array([[[diff]]]))
    loss.backward()
    return float(loss.data), -float(pred.grad.reshape(-1)[0])


def test_criterion_02_smooth_l1(verdicts):
    values = [_loss_and_grad(d)[0] for d in (0.0, 0.5, 2.0)]
    exact = values == [0.0, 0.125, 1.5]
    eps = 1e-13
    gaps = []
    for side in (1.0, -1.0):
        lo, hi = _loss_and_grad(side * (1 - eps)), _loss_and_grad(side * (1 + eps))
        at = _loss_and_grad(side)
        gaps += [abs(lo[0] - hi[0]), abs(lo[1] - hi[1]), abs(at[0] - 0.5), abs(at[1] - side)]
    ok = exact and max(gaps) <= 1e-12
    verdicts.record(2, "SmoothL1 exactness", ok,
                    f"values {values}, largest C1 gap at |diff| = 1 is {max(gaps):.1e}")
    assert ok


# ---------------------------------------------------------------- 3. distance transform


def test_criterion_03_dt_oracle(verdicts):
    rng = np.random.default_rng(3)
    mismatches = 0
    for _ in range(1000):
        length = int(rng.integers(1, 2001))
        k = int(rng.integers(0, min(20, length) + 1))
        peaks = np.sort(rng.choice(length, k, replace=False))
        if not np.array_equal(dt_from_peaks(peaks, length).values, brute_dt(peaks, length, 500)):
            mismatches += 1

    refractory = 100  # 200 ms at 500 Hz
    roundtrip_fail = 0
    for _ in range(1000):
        gaps = rng.integers(refractory, 700, int(rng.integers(1, 21)))
        peaks = int(rng.integers(0, 300)) + np.concatenate([[0], np.cumsum(gaps[1:])])
        length = int(peaks[-1]) + int(rng.integers(1, 300))
        got = peaks_from_dt(dt_from_peaks(peaks, length)).sample_indices
        if not np.array_equal(got, peaks):
            roundtrip_fail += 1
    ok = mismatches == 0 and roundtrip_fail == 0
    verdicts.record(3, "DT oracle equivalence", ok,
                    f"{mismatches}/1000 oracle mismatches, {roundtrip_fail}/1000 round-trip failures")
    assert ok


# ---------------------------------------------------------------- 4. format 212


def test_criterion_04_fmt212_roundtrip(verdicts):
    rng = np.random.default_rng(4)
    failures = 0
    for _ in range(1000):
        v = rng.integers(-2048, 2048, int(rng.integers(1, 300)))
        if not np.array_equal(decode_fmt212(encode_fmt212(v.tolist()), v.size), v):
            failures += 1
    verdicts.record(4, "format 212 round-trip", failures == 0, f"{failures}/1000 vectors differ")
    assert failures == 0


# ---------------------------------------------------------------- 5. matching


def test_criterion_05_matching_oracle(verdicts):
    rng = np.random.default_rng(5)
    mismatches = 0
    for _ in range(1000):
        fs = float(rng.choice([250.0, 360.0, 500.0]))
        tol_ms = float(rng.choice([0.0, 50.0, 75.0, 150.0]))
        span = int(rng.integers(20, 400))
        pred = np.sort(rng.choice(span, int(rng.integers(0, 9)), replace=False))
        ref = np.sort(rng.choice(span, int(rng.integers(0, 9)), replace=False))
        mr = match_peaks(pred, ref, fs, tol_ms)
        best = max_matching_oracle(pred.tolist(), ref.tolist(), tol_ms * fs / 1000.0)
        if (mr.tp, mr.fp, mr.fn) != (best, pred.size - best, ref.size - best):
            mismatches += 1
    # 75 ms at 500 Hz is 37.5 samples: 37 is inside, 38 outside, on either side of the reference
    boundary = [match_peaks([1000 + d], [1000], 500.0).tp for d in (37, -37, 38, -38)]
    ok = mismatches == 0 and boundary == [1, 1, 0, 0]
    verdicts.record(5, "matching oracle", ok,
                    f"{mismatches}/1000 mismatches vs exhaustive matching, boundary tp at +-37/+-38 = {boundary}")
    assert ok


# ---------------------------------------------------------------- 6. overfit


def test_criterion_06_overfit(verdicts):
    windows = clean_windows(32, seed=100)
    model, seconds = train_toy(windows, epochs=300)
    f1 = evaluate_windows(model, windows)
    ok = len(windows) == 32 and f1 >= 0.99 and seconds < 600
    verdicts.record(6, "overfit experiment", ok,
                    f"train F1 {f1:.4f} on {len(windows)} windows after 300 epochs in {seconds:.0f} s")
    assert ok


# ---------------------------------------------------------------- 7. generalization


def test_criterion_07_generalization(verdicts, generalization_run):
    model, held_out, seconds = generalization_run
    f1 = evaluate_windows(model, held_out)
    ok = len(held_out) == 50 and f1 >= 0.95 and seconds < 1800
    verdicts.record(7, "generalization smoke", ok,
                    f"held-out F1 {f1:.4f} on {len(held_out)} windows, trained on 200 noisy windows in {seconds:.0f} s")
    assert ok


# ---------------------------------------------------------------- 8. SNR sweep


def test_criterion_08_snr_sweep(verdicts, generalization_run):
    model = generalization_run[0]
    clean = synth_corpus(100, duration_s=10.0, seed=400)
    noise = [make_noise("mixed", len(rec), rec.fs, seed=4000 + i) for i, (rec, _) in enumerate(clean)]

    snr_err = max(abs(measured_snr_db(rec, mix_noise(rec, n, lvl)) - lvl)
                  for (rec, _), n in zip(clean, noise) for lvl in SWEEP_LEVELS)
    detectors = dict(CLASSIC, rpnet=RPNetDetector(model))
    curves = {}
    for name, detect in detectors.items():
        rows = snr_sweep(detect, clean, noise, SWEEP_LEVELS, name).rows
        curves[name] = [r.report.f1 for r in rows]
    monotone = {k: all(a >= b for a, b in zip(v, v[1:])) for k, v in curves.items()}
    at6 = {k: v[SWEEP_LEVELS.index(6.0)] for k, v in curves.items()}
    beats = {k: at6["rpnet"] > at6[k] for k in CLASSIC}
    ok = all(monotone.values()) and all(beats.values()) and snr_err <= 0.1
    table = "; ".join(f"{k} " + "/".join(f"{f:.4f}" for f in v) for k, v in curves.items())
    verdicts.record(8, "SNR sweep property", ok,
                    f"F1 at {'/'.join(f'{lvl:g}' for lvl in SWEEP_LEVELS)} dB: {table}; "
                    f"monotone {all(monotone.values())}, model strictly above baselines at 6 dB "
                    f"{beats}, mixer error {snr_err:.1e} dB")
    assert ok


# ---------------------------------------------------------------- 9. classic detectors


def test_criterion_09_classic_detectors(verdicts):
    clean = synth_corpus(40, duration_s=10.0, seed=500)
    f1 = {name: evaluate_detector(detect, clean).f1 for name, detect in CLASSIC.items()}
    noisy = [(mix_noise(rec, make_noise("mixed", len(rec), rec.fs, seed=5000 + i), 6.0), ann)
             for i, (rec, ann) in enumerate(clean)]
    swt6 = evaluate_detector(swt_detect, noisy).f1
    ok = all(v >= 0.99 for v in f1.values()) and swt6 >= 0.90
    detail = ", ".join(f"{k} {v:.4f}" for k, v in sorted(f1.items()))
    verdicts.record(9, "classic-detector sanity", ok, f"clean F1 {detail}; swt at 6 dB {swt6:.4f}")
    assert ok


# ---------------------------------------------------------------- 10. shapes and schedule


def test_criterion_10_shapes_and_schedule(verdicts):
    configs = [
        ModelConfig(),
        ModelConfig(input_length=2000, depth=4, base_channels=8),
        ModelConfig(input_length=1000, depth=3, base_channels=16),
        ModelConfig(input_length=777, depth=5, base_channels=8),
        ModelConfig(input_length=40, depth=3, base_channels=8),
        ModelConfig(input_length=3600, depth=6, base_channels=4, max_channels=64),
    ]
    rng = np.random.default_rng(10)
    shapes_ok = []
    for cfg in configs:
        batch = 1 if cfg.input_length == 5000 else 2
        y = build(cfg, seed=0).eval()(Tensor(rng.standard_normal((batch, 1, cfg.input_length))))
        shapes_ok.append(y.shape == (batch, 1, cfg.input_length))
    lrs = [lr_at(e) for e in (0, 150, 300, 450)]
    lr_ok = np.allclose(lrs, [0.05, 0.005, 0.0005, 0.00005], rtol=1e-12, atol=0)
    default = ModelConfig()
    chans = [channels_at(default, s) for s in range(default.depth)]
    cap_ok = max(chans) == 1024 and chans[-2:] == [1024, 1024]
    ok = all(shapes_ok) and lr_ok and cap_ok
    verdicts.record(10, "shape and schedule exactness", ok,
                    f"{sum(shapes_ok)}/{len(configs)} configs shape-preserving incl. (1,1,5000); "
                    f"lr {lrs}; channels {chans}")
    assert ok


# ---------------------------------------------------------------- 11. determinism


def test_criterion_11_determinism(verdicts):
    windows = noisy_windows(12, seed=1100)
    runs = []
    for _ in range(2):
        model, _ = train_toy(windows, epochs=3, seed=11)
        peaks = [predict_peaks(model, w).sample_indices.tolist() for w in windows]
        runs.append((dumps(model.state_arrays()), peaks))
    (blob_a, peaks_a), (blob_b, peaks_b) = runs
    clean = synth_corpus(5, seed=1101)
    classic_same = all(
        np.array_equal(d(rec).peaks.sample_indices, d(rec).peaks.sample_indices)
        for d in CLASSIC.values() for rec, _ in clean)
    ok = blob_a == blob_b and peaks_a == peaks_b and classic_same
    verdicts.record(11, "determinism", ok,
                    f"checkpoints identical {blob_a == blob_b} ({len(blob_a)} bytes), model peaks identical "
                    f"{peaks_a == peaks_b}, classic detector peaks identical {classic_same}")
    assert ok
