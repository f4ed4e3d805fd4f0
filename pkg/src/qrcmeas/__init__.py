"""Simulation and analysis of quantum reservoirs read out by repeated
mid-circuit ancilla measurements."""

from ._accel import backend
from .qcore import GateParams
from .readout import MetricReport, ReadoutModel, dtw, evaluate, fit, nmse_paper, predict
from .reservoir import FeatureMatrix, ReservoirConfig, ShotTable, run, run_baseline
from .tasks import NarmaSpec, SeriesBundle, gen_input, gen_narma, load_csv
from .tipc import CapacityReport, compute_tipc

__version__ = "0.1.0"

__all__ = [
    "CapacityReport",
    "FeatureMatrix",
    "GateParams",
    "MetricReport",
    "NarmaSpec",
    "ReadoutModel",
    "ReservoirConfig",
    "SeriesBundle",
    "ShotTable",
    "backend",
    "compute_tipc",
    "dtw",
    "evaluate",
    "fit",
    "gen_input",
    "gen_narma",
    "load_csv",
    "nmse_paper",
    "predict",
    "run",
    "run_baseline",
]
