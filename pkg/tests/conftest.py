from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

from magneto_qed.media import (
    BandRegion,
    ClosedFormRegion,
    LorentzTerm,
    MediumModel,
    OscillatorBand,
    Placement,
    ZeemanTerm,
)

settings.register_profile("repo", deadline=None, max_examples=40, derandomize=True)
settings.load_profile("repo")

BENCHMARKS = Path(__file__).resolve().parent.parent / "benchmarks"


def dm1_model(gamma=0.1):
    return MediumModel((ClosedFormRegion("dm1", (LorentzTerm("ee", 0.5, 1.0, gamma),)),))


def me_n1_model(gauge=None):
    band = OscillatorBand(
        0,
        electric=(0.5, 1.0, 0.1),
        magnetic=(0.2, 1.0, 0.1),
        sign=1,
        gauge=np.eye(3, dtype=complex) if gauge is None else gauge,
    )
    return MediumModel((BandRegion("me1", (band,)),))


def stack_model():
    vac = ClosedFormRegion("vacuum")
    slab = ClosedFormRegion("slab", (LorentzTerm("ee", 0.5, 1.0, 0.5),))
    return MediumModel((vac, slab), (Placement("vacuum"), Placement("slab", 0, 28 / 60, 32 / 60)))


def zeeman_model():
    z = ZeemanTerm(0.5, 1.0, 0.2, bias=(0.0, 0.0, 1.0), kappa=0.3)
    return MediumModel((ClosedFormRegion("gyro", (z,), flips=("bias",)),))


@pytest.fixture
def dm1():
    return dm1_model()


@pytest.fixture
def me_n1():
    return me_n1_model()


@pytest.fixture
def stack():
    return stack_model()


@pytest.fixture
def benchmarks():
    return BENCHMARKS
