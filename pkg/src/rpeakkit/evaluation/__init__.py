"""Matching, metrics, noise mixing, synthetic data and experiment drivers."""
from .experiments import (ExperimentReport, ReportRow, compare_detectors, evaluate_detector,
                          snr_sweep, write_report_csv, write_report_json)
from .matching import DEFAULT_TOL_MS, EvalReport, MatchResult, match_peaks, metrics
from .noise import NOISE_KINDS, NoiseMixSpec, make_noise, measured_snr_db, mix_noise
from .synth import synth_corpus, synth_ecg

__all__ = [
    "DEFAULT_TOL_MS",
    "EvalReport",
    "ExperimentReport",
    "MatchResult",
    "NOISE_KINDS",
    "NoiseMixSpec",
    "ReportRow",
    "compare_detectors",
    "evaluate_detector",
    "make_noise",
    "match_peaks",
    "measured_snr_db",
    "metrics",
    "mix_noise",
    "snr_sweep",
    "synth_corpus",
    "synth_ecg",
    "write_report_csv",
    "write_report_json",
]
