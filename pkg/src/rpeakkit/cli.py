"""``rpeakkit`` command line: ingest, train, detect, eval, mix-noise, sweep, plot, synth.

Exit codes: 0 success, 1 runtime or numerics failure, 2 usage or config error.
Every run writes ``manifest.json`` next to its outputs; data files carry no
timestamps, so re-running with the same inputs and seed reproduces them byte
for byte.
"""
from __future__ import annotations

import argparse
import json
import logging
import platform
import sys
import time
from dataclasses import replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import __version__
from .dtmap import DEFAULT_FS, read_dt_csv, write_dt_csv
from .errors import (ConfigError, InputError, NumericsError, ParseError, RPeakKitError, ShapeError,
                     UsageError)
from .signal_io import (BeatAnnotations, EcgRecord, Window, load_dataset, parse_annotation_csv,
                        read_peak_table, read_record, record_from_json, record_to_json,
                        rescale_annotations, resample_linear, save_dataset, window_from_json,
                        window_record, window_to_json, write_peak_table)

log = logging.getLogger("rpeakkit")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


# --------------------------------------------------------------------------- dataset helpers


def _is_window(entry: dict) -> bool:
    return "padding" in entry and "source_record_id" in entry


def entry_record(entry: dict) -> Tuple[EcgRecord, BeatAnnotations]:
    """Signal and beats of a dataset entry; windows lose their zero-padded tail."""
    if _is_window(entry):
        w = window_from_json(entry)
        valid = len(w) - w.padding
        rec = EcgRecord(w.record_id, w.samples[:valid], w.fs, entry.get("lead_name", ""))
        return rec, BeatAnnotations(w.peak_indices[w.peak_indices < valid])
    return record_from_json(entry)


def _load_entries(path) -> List[dict]:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"dataset not found: {p}")
    return load_dataset(p)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _safe_name(record_id: str) -> str:
    return "".join(c if c.isalnum() or c in "-_.@" else "_" for c in record_id)


# --------------------------------------------------------------------------- manifest


def _jsonable(v):
    if isinstance(v, Path):
        return str(v)
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (np.integer, np.floating)):
        return v.item()
    return v


def write_manifest(out: Path, args, inputs: Sequence, outputs: Sequence, started: float,
                   extra: Optional[dict] = None) -> Path:
    config = {k: _jsonable(v) for k, v in sorted(vars(args).items()) if k not in ("func",)}
    manifest = {
        "command": args.command,
        "config": config,
        "seed": args.seed,
        "inputs": [str(p) for p in inputs],
        "outputs": sorted(str(Path(p).relative_to(out)) if Path(p).is_relative_to(out) else str(p)
                          for p in outputs),
        "version": __version__,
        "python": platform.python_version(),
        "started_unix": round(started, 3),
        "wall_clock_s": round(time.time() - started, 3),
    }
    if extra:
        manifest.update(extra)
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


# --------------------------------------------------------------------------- synth


def cmd_synth(args) -> int:
    from .evaluation.synth import synth_corpus

    started = time.time()
    out = _out_dir(args)
    corpus = synth_corpus(args.n, fs=args.fs, duration_s=args.duration, seed=args.seed,
                          hr_range=(args.hr_min, args.hr_max))
    entries = [record_to_json(rec, ann) for rec, ann in corpus]
    path = out / "dataset.json"
    save_dataset(path, entries)
    write_manifest(out, args, [], [path], started)
    log.info("wrote %d synthetic records to %s", len(entries), path)
    return EXIT_OK


# --------------------------------------------------------------------------- ingest


def _ingest_header(path: Path, ann_path: Optional[Path], args):
    rec = read_record(path, lead=args.lead)
    if ann_path is not None:
        ann = parse_annotation_csv(ann_path.read_text(encoding="utf-8"))
    else:
        ann = BeatAnnotations()
    if ann.sample_indices.size and ann.sample_indices.max() >= len(rec):
        raise ParseError(f"{ann_path}: annotation index beyond the record length {len(rec)}")
    return rec, ann


def _annotation_for(path: Path, explicit: Dict[int, Path], k: int) -> Optional[Path]:
    if k in explicit:
        return explicit[k]
    guess = path.with_suffix(".csv")
    return guess if guess.exists() else None


def cmd_ingest(args) -> int:
    started = time.time()
    inputs = [Path(p) for p in args.inputs]
    anns = [Path(p) for p in (args.ann or [])]
    if anns and len(anns) != len(inputs):
        raise UsageError(f"--ann given {len(anns)} times for {len(inputs)} inputs")
    explicit = dict(enumerate(anns))
    for p in inputs + anns:
        if not p.exists():
            raise FileNotFoundError(f"input not found: {p}")

    loaded: List[Tuple[EcgRecord, BeatAnnotations, bool]] = []
    failures = []
    for k, path in enumerate(inputs):
        try:
            if path.suffix == ".json" or path.is_dir():
                for entry in load_dataset(path):
                    rec, ann = entry_record(entry)
                    loaded.append((rec, ann, bool(entry.get("annotated", "peaks" in entry))))
                continue
            ann_path = _annotation_for(path, explicit, k)
            if ann_path is None and args.require_ann:
                raise UsageError(f"{path}: no annotation file (pass --ann or place {path.stem}.csv alongside)")
            rec, ann = _ingest_header(path, ann_path, args)
            loaded.append((rec, ann, ann_path is not None))
        except (ParseError, ValueError) as exc:
            if isinstance(exc, (ConfigError, UsageError)):
                raise
            failures.append(f"{path}: {exc}")
            log.error("%s: %s", path, exc)
    if failures:
        print(f"{len(failures)} input(s) failed to parse:", file=sys.stderr)
        for f in failures:
            print(f"  {f}", file=sys.stderr)
        return EXIT_RUNTIME

    entries = []
    for rec, ann, annotated in loaded:
        x = resample_linear(rec.samples, rec.fs, args.fs)
        target = EcgRecord(rec.record_id, x, args.fs, rec.lead_name, rec.units)
        ann_t = rescale_annotations(ann, rec.fs, args.fs)
        ann_t = BeatAnnotations(ann_t.sample_indices[ann_t.sample_indices < len(target)])
        for w in window_record(target, ann_t, args.win_seconds, drop_partial=not args.keep_partial,
                               source_fs=rec.fs):
            d = window_to_json(w, rec.lead_name)
            d["annotated"] = annotated
            entries.append(d)
    out = _out_dir(args)
    path = out / "dataset.json"
    save_dataset(path, entries)
    write_manifest(out, args, inputs + anns, [path], started, {"n_windows": len(entries)})
    log.info("wrote %d windows from %d records to %s", len(entries), len(loaded), path)
    return EXIT_OK


# --------------------------------------------------------------------------- train


def _model_config(args, input_length: int):
    from .unet.model import ModelConfig

    kw = {"input_length": input_length}
    for name in ("depth", "base_channels", "max_channels"):
        v = getattr(args, name)
        if v is not None:
            kw[name] = v
    if args.kernels:
        kw["inception_kernels"] = tuple(int(k) for k in str(args.kernels).split(","))
    return ModelConfig(**kw)


def _training_windows(entries: List[dict]) -> List[Window]:
    windows = [window_from_json(e) for e in entries]
    if not windows:
        raise InputError("dataset is empty")
    lengths = {len(w) for w in windows}
    if len(lengths) != 1:
        raise ShapeError(f"windows have mixed lengths {sorted(lengths)}; re-ingest with one --win-seconds")
    rates = {w.fs for w in windows}
    if rates != {DEFAULT_FS}:
        raise ConfigError(f"training expects windows at {DEFAULT_FS:g} Hz, found {sorted(rates)}")
    return windows


def cmd_train(args) -> int:
    from .unet.model import build, length_trace
    from .unet.train import TrainConfig, evaluate_windows, fit, kfold_split, make_targets, save_model

    started = time.time()
    windows = _training_windows(_load_entries(args.data))
    mcfg = _model_config(args, len(windows[0]))
    length_trace(mcfg)  # rejects configs whose bottleneck would vanish
    if args.input_length is not None and args.input_length != mcfg.input_length:
        raise ShapeError(f"--input-length {args.input_length} != window length {mcfg.input_length}")
    tcfg = TrainConfig(epochs=args.epochs, batch_size=args.batch_size, seed=args.seed,
                       base_lr=args.lr, lr_step_epochs=args.lr_step,
                       checkpoint_every=args.checkpoint_every)
    out = _out_dir(args)
    outputs = []

    def run(train_w: List[Window], val_w: Optional[List[Window]], dest: Path):
        dest.mkdir(parents=True, exist_ok=True)
        model = build(mcfg, seed=args.seed)
        tc = replace(tcfg, checkpoint_dir=str(dest) if tcfg.checkpoint_every else None,
                     val_every=args.val_every if val_w else 0)

        def progress(e):
            if not args.quiet and (e.epoch % max(1, args.log_every) == 0 or e.epoch == tc.epochs - 1):
                log.info("epoch %d lr %.3g loss %.6f%s", e.epoch, e.lr, e.mean_loss,
                         "" if e.val_f1 is None else f" val_f1 {e.val_f1:.4f}")

        history = fit(model, list(zip(train_w, make_targets(train_w))), tc, validation=val_w,
                      on_epoch=progress)
        ckpt = dest / "model.ckpt"
        save_model(model, ckpt)
        history.write_csv(dest / "train_log.csv")
        outputs.extend([ckpt, Path(str(ckpt) + ".json"), dest / "train_log.csv"])
        return model

    if args.folds:
        rows = []
        for i, (tr, va) in enumerate(kfold_split(len(windows), args.folds, seed=args.seed)):
            train_w = [windows[j] for j in tr]
            val_w = [windows[j] for j in va]
            log.info("fold %d: %d train / %d validation windows", i, len(train_w), len(val_w))
            model = run(train_w, val_w, out / f"fold{i}")
            rows.append({"fold": i, "n_train": len(train_w), "n_val": len(val_w),
                         "f1": evaluate_windows(model, val_w)})
        f1s = np.array([r["f1"] for r in rows])
        summary = {"folds": rows, "mean_f1": float(f1s.mean()), "std_f1": float(f1s.std())}
        (out / "folds.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n",
                                        encoding="utf-8")
        outputs.append(out / "folds.json")
        print(f"{args.folds}-fold F1: mean {summary['mean_f1']:.4f} std {summary['std_f1']:.4f}")
    else:
        model = run(windows, None, out)
        f1 = evaluate_windows(model, windows)
        print(f"train F1 {f1:.4f}")
    write_manifest(out, args, [args.data], outputs, started, {"model_config": mcfg.to_dict()})
    return EXIT_OK


# --------------------------------------------------------------------------- detect


def cmd_detect(args) -> int:
    from .detectors import MODEL_DETECTOR, RPNetDetector, get_detector
    from .evaluation.experiments import _pmap, worker_count

    started = time.time()
    detect = get_detector(args.detector, args.ckpt)
    if args.emit_dt and args.detector != MODEL_DETECTOR:
        raise ConfigError("--emit-dt is only available for the rpnet detector")
    entries = _load_entries(args.data)
    out = _out_dir(args)
    outputs = []
    dt_dir = out / "dt"
    if args.emit_dt:
        dt_dir.mkdir(exist_ok=True)

    def one(entry: dict):
        if isinstance(detect, RPNetDetector) and _is_window(entry):
            w = window_from_json(entry)
            peaks, dt = detect.predict_window(w)
            return w.record_id, peaks, dt
        rec, _ = entry_record(entry)
        if isinstance(detect, RPNetDetector):
            res, dt = detect.predict(rec)
            return rec.record_id, res.peaks, dt
        return rec.record_id, detect(rec).peaks, None

    results = _pmap(one, entries, worker_count())
    rows = []
    for rid, peaks, dt in results:
        rows.append((rid, args.detector, peaks.tolist()))
        if args.emit_dt and dt is not None:
            p = dt_dir / f"{_safe_name(rid)}.csv"
            write_dt_csv(p, dt)
            outputs.append(p)
    path = out / "peaks.csv"
    write_peak_table(path, rows)
    outputs.append(path)
    write_manifest(out, args, [args.data] + ([args.ckpt] if args.ckpt else []), outputs, started)
    log.info("%s: %d records, %d peaks -> %s", args.detector, len(rows),
             sum(len(r[2]) for r in rows), path)
    return EXIT_OK


# --------------------------------------------------------------------------- eval


def cmd_eval(args) -> int:
    from .evaluation.experiments import (ExperimentReport, ReportRow, format_table,
                                         write_per_record_csv, write_report_csv, write_report_json)
    from .evaluation.matching import MatchResult, match_peaks, metrics

    started = time.time()
    pred = read_peak_table(args.pred)
    refs = {}
    for entry in _load_entries(args.ref):
        rec, ann = entry_record(entry)
        refs[rec.record_id] = (rec.fs, ann)
    only_pred = sorted(set(pred) - set(refs))
    only_ref = sorted(set(refs) - set(pred))
    if only_pred or only_ref:
        print("record ids differ between predictions and references:", file=sys.stderr)
        for rid in only_pred:
            print(f"  + {rid} (predictions only)", file=sys.stderr)
        for rid in only_ref:
            print(f"  - {rid} (references only)", file=sys.stderr)
        return EXIT_USAGE

    by_detector: Dict[str, Dict[str, MatchResult]] = {}
    for rid in sorted(refs):
        det, peaks = pred[rid]
        fs, ann = refs[rid]
        by_detector.setdefault(det, {})[rid] = match_peaks(peaks, ann, fs, args.tol_ms)
    report = ExperimentReport()
    dataset = args.dataset_name or Path(args.ref).stem
    for det, per in sorted(by_detector.items()):
        total = MatchResult(0, 0, 0)
        for mr in per.values():
            total = total + mr
        rep = metrics(total)
        rep.per_record = {rid: metrics(mr).row() for rid, mr in per.items()}
        report.rows.append(ReportRow(det, dataset, None, rep))
    out = _out_dir(args)
    paths = [out / "eval.csv", out / "eval.json", out / "per_record.csv"]
    write_report_csv(paths[0], report)
    write_report_json(paths[1], report)
    write_per_record_csv(paths[2], report)
    write_manifest(out, args, [args.pred, args.ref], paths, started)
    if not args.quiet:
        print(format_table(report))
    return EXIT_OK


# --------------------------------------------------------------------------- noise


def _noise_source(args, n: int, fs: float, k: int) -> np.ndarray:
    from .evaluation.noise import make_noise

    if args.noise_file:
        p = Path(args.noise_file)
        if not p.exists():
            raise FileNotFoundError(f"noise file not found: {p}")
        return np.loadtxt(p, dtype=np.float64, delimiter=",", ndmin=1).reshape(-1)
    return make_noise(args.kind, n, fs, seed=args.seed * 100_003 + k)


def cmd_mix_noise(args) -> int:
    from .evaluation.noise import mix_noise

    started = time.time()
    entries = _load_entries(args.data)
    mixed = []
    for k, entry in enumerate(entries):
        if _is_window(entry):
            w = window_from_json(entry)
            valid = len(w) - w.padding
            rec = EcgRecord(w.record_id, w.samples[:valid], w.fs)
            noisy = mix_noise(rec, _noise_source(args, valid, w.fs, k), args.snr)
            samples = np.concatenate([noisy.samples, np.zeros(w.padding)])
            d = dict(entry, samples=samples.tolist())
        else:
            rec, _ = record_from_json(entry)
            noisy = mix_noise(rec, _noise_source(args, len(rec), rec.fs, k), args.snr)
            d = dict(entry, samples=noisy.samples.tolist())
        d["noise"] = {"kind": "file" if args.noise_file else args.kind, "snr_db": args.snr}
        mixed.append(d)
    out = _out_dir(args)
    path = out / "dataset.json"
    save_dataset(path, mixed)
    write_manifest(out, args, [args.data] + ([args.noise_file] if args.noise_file else []),
                   [path], started)
    return EXIT_OK


# --------------------------------------------------------------------------- sweep


def cmd_sweep(args) -> int:
    from .detectors import get_detector, registered_names
    from .evaluation.experiments import (format_table, merge, snr_sweep, write_report_csv,
                                         write_report_json)
    from .plotting import sweep_svg

    started = time.time()
    levels = [float(v) for v in str(args.levels).split(",") if v.strip()] if args.levels else []
    names = [n.strip() for n in str(args.detectors).split(",") if n.strip()]
    for n in names:
        if n not in registered_names():
            raise ConfigError(f"unknown detector {n!r}; registered: {', '.join(registered_names())}")
    clean = [entry_record(e) for e in _load_entries(args.data)]
    noise = [_noise_source(args, len(rec), rec.fs, k) for k, (rec, _) in enumerate(clean)]
    dataset = args.dataset_name or Path(args.data).stem
    reports = []
    for n in names:
        reports.append(snr_sweep(get_detector(n, args.ckpt), clean, noise, levels, n, dataset,
                                 args.tol_ms))
    report = merge(*reports)
    out = _out_dir(args)
    paths = [out / "sweep.csv", out / "sweep.json", out / "sweep.svg"]
    write_report_csv(paths[0], report)
    write_report_json(paths[1], report)
    curves = {n: [(r.snr_db, r.report.f1) for r in report.by_detector(n)] for n in names}
    paths[2].write_text(sweep_svg(curves, title=f"F1 vs SNR ({args.kind})"), encoding="utf-8")
    write_manifest(out, args, [args.data] + ([args.ckpt] if args.ckpt else []), paths, started)
    if not args.quiet:
        print(format_table(report))
    return EXIT_OK


# --------------------------------------------------------------------------- plot


def cmd_plot(args) -> int:
    from .plotting import window_svg

    started = time.time()
    entries = _load_entries(args.data)
    pred = read_peak_table(args.peaks) if args.peaks else {}
    overlay = not args.no_dt
    if overlay and not args.dt_dir:
        raise ConfigError("distance-map overlay requested but --dt-dir not given (use --no-dt to skip)")
    out = _out_dir(args)
    outputs = []
    for entry in entries[: args.limit] if args.limit else entries:
        if _is_window(entry):
            w = window_from_json(entry)
            rid, samples, fs, ref = w.record_id, w.samples, w.fs, w.peak_indices
        else:
            rec, ann = record_from_json(entry)
            rid, samples, fs, ref = rec.record_id, rec.samples, rec.fs, ann.sample_indices
        dt = None
        if overlay:
            p = Path(args.dt_dir) / f"{_safe_name(rid)}.csv"
            if not p.exists():
                raise ConfigError(f"no distance map for {rid} at {p}")
            dt = read_dt_csv(p)
        peaks = pred[rid][1].sample_indices if rid in pred else np.zeros(0, np.int64)
        svg = window_svg(samples, fs, dt, peaks, ref if args.with_ref else None, overlay_dt=overlay,
                         title=rid)
        path = out / f"{_safe_name(rid)}.svg"
        path.write_text(svg, encoding="utf-8")
        outputs.append(path)
    write_manifest(out, args, [args.data] + [p for p in (args.peaks, args.dt_dir) if p], outputs, started)
    log.info("wrote %d plots to %s", len(outputs), out)
    return EXIT_OK


# --------------------------------------------------------------------------- parser


def _common(seed_default: int = 0) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=seed_default, help="random seed (default 0)")
    p.add_argument("--config", help="TOML file; explicit flags override its values")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--quiet", action="store_true", help="only print warnings and errors")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="rpeakkit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"rpeakkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[common], help="parse records, resample and window to JSON")
    p.add_argument("--in", dest="inputs", nargs="+", required=True,
                   help="WFDB header files (.hea) or canonical JSON datasets")
    p.add_argument("--ann", action="append", help="beat CSV per header input, in order")
    p.add_argument("--require-ann", action="store_true", help="fail when a header has no annotations")
    p.add_argument("--fs", type=float, default=500.0, help="target sampling rate (Hz)")
    p.add_argument("--win-seconds", type=float, default=10.0)
    p.add_argument("--lead", type=int, default=0)
    p.add_argument("--keep-partial", action="store_true", help="zero-pad the last partial window")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train", parents=[common], help="fit the U-Net on an ingested dataset")
    p.add_argument("--in", "--data", dest="data", required=True)
    p.add_argument("--epochs", type=int, default=500)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--lr-step", type=int, default=150, help="epochs per 10x learning-rate decay")
    p.add_argument("--input-length", type=int, default=None)
    p.add_argument("--depth", type=int, default=None)
    p.add_argument("--base-channels", type=int, default=None)
    p.add_argument("--max-channels", type=int, default=None)
    p.add_argument("--kernels", default=None, help="comma-separated inception kernel sizes")
    p.add_argument("--folds", type=int, default=0, help="k-fold cross-validation (e.g. 3)")
    p.add_argument("--val-every", type=int, default=0)
    p.add_argument("--checkpoint-every", type=int, default=0)
    p.add_argument("--log-every", type=int, default=10)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("detect", parents=[common], help="run a detector over a dataset")
    p.add_argument("--in", "--data", dest="data", required=True)
    p.add_argument("--detector", required=True, help="hamilton, christov, swt or rpnet")
    p.add_argument("--ckpt", default=None, help="checkpoint for rpnet")
    p.add_argument("--emit-dt", action="store_true", help="also write predicted distance maps")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("eval", parents=[common], help="score predicted peaks against references")
    p.add_argument("--pred", required=True, help="peaks.csv from detect")
    p.add_argument("--ref", required=True, help="dataset holding the reference beats")
    p.add_argument("--tol-ms", type=float, default=75.0)
    p.add_argument("--dataset-name", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("mix-noise", parents=[common], help="add noise at a fixed SNR")
    p.add_argument("--in", "--data", dest="data", required=True)
    p.add_argument("--snr", type=float, required=True, help="target SNR in dB")
    p.add_argument("--kind", default="mixed",
                   help="baseline_wander, muscle_artifact, electrode_motion, white or mixed")
    p.add_argument("--noise-file", default=None, help="CSV column of noise samples (tiled)")
    p.set_defaults(func=cmd_mix_noise)

    p = sub.add_parser("sweep", parents=[common], help="F1 of detectors across SNR levels")
    p.add_argument("--in", "--data", dest="data", required=True, help="clean annotated dataset")
    p.add_argument("--detectors", default="hamilton,christov,swt")
    p.add_argument("--ckpt", default=None, help="checkpoint when rpnet is swept")
    p.add_argument("--levels", default="24,18,12,6,0")
    p.add_argument("--kind", default="mixed")
    p.add_argument("--noise-file", default=None)
    p.add_argument("--tol-ms", type=float, default=75.0)
    p.add_argument("--dataset-name", default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("plot", parents=[common], help="SVG per window: ECG, distance map, peaks")
    p.add_argument("--in", "--data", dest="data", required=True)
    p.add_argument("--peaks", default=None, help="peaks.csv from detect")
    p.add_argument("--dt-dir", default=None, help="directory of distance-map CSVs (detect --emit-dt)")
    p.add_argument("--no-dt", action="store_true", help="skip the distance-map overlay")
    p.add_argument("--with-ref", action="store_true", help="mark false positives and negatives")
    p.add_argument("--limit", type=int, default=0)
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("synth", parents=[common], help="write a synthetic annotated corpus")
    p.add_argument("--n", type=int, default=20)
    p.add_argument("--fs", type=float, default=500.0)
    p.add_argument("--duration", type=float, default=10.0)
    p.add_argument("--hr-min", type=float, default=50.0)
    p.add_argument("--hr-max", type=float, default=110.0)
    p.set_defaults(func=cmd_synth)
    return parser


def _subparser(parser: argparse.ArgumentParser, command: str) -> argparse.ArgumentParser:
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[command]
    raise UsageError(f"no subcommand {command!r}")


def load_config(path, command: str, sub: argparse.ArgumentParser) -> dict:
    """Flatten a TOML file into defaults for ``command``.

    Top-level keys apply to every command; ``[<command>]`` and, for training,
    ``[model]`` tables apply to that command. Unknown keys are rejected.
    """
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    try:
        data = tomllib.loads(p.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{p}: {exc}") from exc
    tables = {command}
    if command == "train":
        tables.add("model")
    flat = {k: v for k, v in data.items() if not isinstance(v, dict)}
    for name in sorted(tables):
        flat.update(data.get(name, {}))
    dests = {a.dest for a in sub._actions}
    out = {}
    for key, value in flat.items():
        dest = key.replace("-", "_")
        if dest in ("config", "func", "command"):
            continue
        if dest not in dests:
            raise ConfigError(f"{p}: unknown key {key!r} for {command}")
        if isinstance(value, list):
            value = ",".join(str(v) for v in value)
        out[dest] = value
    return out


def parse_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        sub = _subparser(parser, args.command)
        sub.set_defaults(**load_config(args.config, args.command, sub))
        args = parser.parse_args(argv)
    if args.out is None:
        args.out = f"runs/{args.command}-seed{args.seed}"
    return args


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = parse_args(argv)
    except SystemExit as exc:  # argparse usage errors and --help
        return int(exc.code or 0)
    except (ConfigError, UsageError) as exc:
        print(f"rpeakkit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr, force=True)
    try:
        return args.func(args)
    except (ConfigError, UsageError, ShapeError, FileNotFoundError) as exc:
        print(f"rpeakkit {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericsError, RPeakKitError, OSError, ValueError) as exc:
        print(f"rpeakkit {args.command}: failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
