import json
import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from brepmatch.brep import BRepGraph, load_brep, to_dict
from brepmatch.synth.dataset import generate_dataset
from brepmatch.synth.part import Part, build_part

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large]
)
settings.register_profile("ci", deadline=None, max_examples=15, suppress_health_check=list(HealthCheck))
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def cube_model():
    return build_part(Part((0.0, 0.0, 0.0), (1.0, 1.0, 1.0)), "cube")


@pytest.fixture(scope="session")
def cube(cube_model):
    return cube_model.brep


@pytest.fixture(scope="session")
def small_dataset():
    return generate_dataset(12, 2, "complete", seed=5)


@pytest.fixture(scope="session")
def construct_dataset():
    return generate_dataset(12, 2, "construct", seed=9)


def ref_index(model, name: str, kind):
    """Index of the entity called ``name`` in a synthetic model."""
    from brepmatch.synth.edits import names_by_kind

    return names_by_kind(model)[kind].index(name)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def translate_brep(b: BRepGraph, t) -> BRepGraph:
    """Rigidly translate every position, sample and anchor by ``t``."""
    t = np.asarray(t, dtype=np.float64)
    doc = to_dict(b)
    doc["bbox"] = {"min": (b.bbox[0] + t).tolist(), "max": (b.bbox[1] + t).tolist()}
    for v in doc["vertices"]:
        v["pos"] = (np.array(v["pos"]) + t).tolist()
    for ent in doc["edges"] + doc["faces"]:
        ent["samples"] = (np.array(ent["samples"]) + t).tolist()
        ent["geom"]["params"][:3] = (np.array(ent["geom"]["params"][:3]) + t).tolist()
    return load_brep(json.dumps(doc))


# -- acceptance summary -------------------------------------------------------------

ACCEPTANCE: dict[str, tuple[bool, str]] = {}


def record(criterion: str, ok: bool, detail: str) -> bool:
    """Remember one acceptance outcome for the end-of-run summary (a criterion fails if any part fails)."""
    prev = ACCEPTANCE.get(criterion)
    if prev is not None:
        ok = ok and prev[0]
        detail = f"{prev[1]}; {detail}"
    ACCEPTANCE[criterion] = (ok, detail)
    print(f"{criterion} {'PASS' if ok else 'FAIL'}: {detail}")
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[name]
        terminalreporter.write_line(f"{name} {'PASS' if ok else 'FAIL'}  {detail}")
