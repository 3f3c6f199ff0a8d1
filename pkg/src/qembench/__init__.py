"""Density-matrix simulation, error mitigation and a hybrid classifier benchmark."""

from .batch import Executor, PtmSimulator
from .circuit import QuantumCircuit
from .mitigation import MitigationKind, MitigationPlan
from .noise import NoiseKind, NoiseModel, make_channel

__all__ = [
    "Executor",
    "MitigationKind",
    "MitigationPlan",
    "NoiseKind",
    "NoiseModel",
    "PtmSimulator",
    "QuantumCircuit",
    "make_channel",
]
