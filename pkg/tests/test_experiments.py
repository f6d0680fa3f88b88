import csv
import io
import json

import pytest

from csforms.chern_simons import ModZValue
from csforms.experiments import (
    CSV_HEADER,
    SCHEMA_VERSION,
    ExperimentReport,
    reports_from_json,
    reports_to_csv,
    reports_to_json,
    run_algebra_constants,
    run_cs_lens,
    run_hypersurface,
    run_identity_fuzz,
    run_mc_integral,
    run_polar_check,
)
from csforms.geometry import QuadratureSpec


def _report(**kw):
    base = dict(name="x", params={"a": 1}, raw_value=0.25, expected=0.0, abs_error=0.25, tolerance=0.5,
                passed=True, mod_z=ModZValue(0.25, 0.25, 0), quadrature={"order_per_axis": 4, "node_count": 64},
                differentiation={"backend": "central_fd", "step": 1e-5, "richardson": True}, seed=3, elapsed_ms=7)
    base.update(kw)
    return ExperimentReport(**base)


def test_report_roundtrip_real_and_complex():
    reps = [_report(), _report(name="c", raw_value=complex(1.5, -2.0), mod_z=None)]
    back = reports_from_json(reports_to_json(reps))
    assert [r.to_dict() for r in back] == [r.to_dict() for r in reps]
    d = json.loads(reports_to_json(reps))
    assert d[1]["raw_value"] == {"real": 1.5, "imag": -2.0}
    assert all(x["schema_version"] == SCHEMA_VERSION for x in d)
    assert {"name", "params", "raw_value", "mod_z", "expected", "abs_error", "quadrature", "differentiation",
            "seed", "elapsed_ms", "pass"} <= set(d[0])


def test_report_rejects_other_schema():
    d = _report().to_dict()
    d["schema_version"] = 2
    with pytest.raises(ValueError):
        ExperimentReport.from_dict(d)


def test_csv_projection():
    text = reports_to_csv([_report(), _report(name="y", passed=False, mod_z=None)])
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == CSV_HEADER == "name,param_summary,raw,reduced_mod_z,expected,abs_error,pass,elapsed_ms".split(",")
    assert rows[1][0] == "x" and rows[1][1] == "a=1" and rows[1][6] == "true"
    assert rows[2][3] == "" and rows[2][6] == "false"


def test_mc_integral_low_order():
    r = run_mc_integral("su2", QuadratureSpec(8))
    assert r.passed and r.expected == -1.0
    assert r.differentiation["backend"] == "analytic"
    assert r.quadrature == {"order_per_axis": 8, "node_count": 512}
    with pytest.raises(ValueError):
        run_mc_integral("so4")


def test_lens_report_fields():
    r = run_cs_lens((2, 1, 1), QuadratureSpec(8), convergence=False)
    assert r.passed
    assert r.expected == -0.5
    assert r.mod_z.distance_to(0.5) < 1e-6
    assert r.params == {"p": 2, "q1": 1, "q2": 1}
    with pytest.raises(ValueError):
        run_cs_lens((6, 2, 1))


def test_pass_requires_sub_checks():
    r = run_cs_lens((3, 1, 1), QuadratureSpec(4), tol=1.0)
    # a coarse rule still lands within 1.0, but the doubled-order check sees the change
    names = [c["name"] for c in r.details["checks"]]
    assert "doubled_order_delta" in names and "deck_invariance" in names
    assert r.passed == all(c["pass"] for c in r.details["checks"])


def test_hypersurface_records_integer():
    r = run_hypersurface((1.0, 1.1, 1.2, 1.3), QuadratureSpec(12), convergence=False)
    assert r.details["integer"] == -1 and r.expected == -1.0 and r.passed


@pytest.mark.parametrize("which", ["gauge", "block", "dcs", "frobenius", "realification", "structure", "subgroup"])
def test_fuzz_small(which):
    r = run_identity_fuzz(which, seed=1, trials=2, n_points=20)
    assert r.passed, r.summary_line()
    assert len(r.details["per_trial_max"]) == 2


def test_fuzz_unknown():
    with pytest.raises(ValueError):
        run_identity_fuzz("nonsense")


def test_fuzz_is_deterministic():
    a = run_identity_fuzz("gauge", seed=5, trials=2, n_points=10)
    b = run_identity_fuzz("gauge", seed=5, trials=2, n_points=10)
    assert a.raw_value == b.raw_value and a.details == b.details


def test_constants_and_polar():
    assert run_algebra_constants().passed
    r = run_polar_check(seed=2, n=10)
    assert r.passed and r.raw_value < 1e-10


def test_degenerate_lens_is_the_sphere():
    r = run_cs_lens((1, 1, 1), QuadratureSpec(12), convergence=False)
    assert r.passed and abs(r.raw_value + 1) < 1e-6
