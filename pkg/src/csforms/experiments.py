"""Named, seeded experiments producing :class:`ExperimentReport` records."""

from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import dataclass, field

import numpy as np

from . import lie
from .calculus import (
    ANALYTIC,
    DEFAULT_DIFF,
    DiffSpec,
    constant_field,
    exterior_derivative,
    field_scale,
    field_expm,
    field_scalar_mul,
    field_trace,
    field_wedge,
    random_trig_field,
    realify,
    zero_field,
)
from .chern_simons import (
    MC_COMPLEX,
    MC_REAL,
    BlockConnection,
    Connection,
    ModZValue,
    block_cs_defect,
    complexify,
    cs_form,
    cs_form_complex,
    curvature,
    gauge_change_defect,
    gauge_transform,
    pontryagin,
    reduce_mod_Z,
    stable_extend,
)
from .geometry import (
    Cycle3,
    LensParams,
    QuadratureSpec,
    conformal_metric,
    conformal_variation,
    ellipsoid_frame,
    hopf_chart,
    hopf_embedding,
    induced_hypersurface_connection,
    integrate3,
    left_invariant_frame,
    lens_cycle,
    lens_deck,
    levi_civita_form,
    random_ambient_function,
    round_metric,
    sphere_cycle,
)

__all__ = [
    "SCHEMA_VERSION",
    "ExperimentReport",
    "reports_to_json",
    "reports_from_json",
    "reports_to_csv",
    "run_mc_integral",
    "run_algebra_constants",
    "run_cs_sphere",
    "run_cs_lens",
    "run_hypersurface",
    "run_conformal_check",
    "run_identity_fuzz",
    "run_vanishing",
    "run_stable_extension",
    "run_polar_check",
    "run_all",
    "MC_TARGETS",
    "FUZZ_KINDS",
    "LENS_CASES",
]

SCHEMA_VERSION = 1
MC_TARGETS = ("so3", "s3_real", "s3_real_inverse", "su2")
FUZZ_KINDS = ("gauge", "block", "dcs", "frobenius", "realification", "structure", "subgroup")
LENS_CASES = ((2, 1, 1), (3, 1, 1), (5, 1, 2), (7, 2, 3))
CSV_HEADER = ["name", "param_summary", "raw", "reduced_mod_z", "expected", "abs_error", "pass", "elapsed_ms"]


@dataclass
class ExperimentReport:
    """Machine-readable record of one experiment.

    ``passed`` holds iff ``abs_error <= tolerance`` and every entry of
    ``details["checks"]`` (auxiliary sub-checks) passed.
    """

    name: str
    params: dict
    raw_value: float | complex
    expected: float | None
    abs_error: float | None
    tolerance: float
    passed: bool
    mod_z: ModZValue | None = None
    quadrature: dict | None = None
    differentiation: dict | None = None
    seed: int = 0
    elapsed_ms: int = 0
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        raw = self.raw_value
        if isinstance(raw, complex):
            raw = {"real": raw.real, "imag": raw.imag}
        return {
            "schema_version": SCHEMA_VERSION,
            "name": self.name,
            "params": self.params,
            "raw_value": raw,
            "mod_z": None if self.mod_z is None else {
                "raw": self.mod_z.raw, "reduced": self.mod_z.reduced, "nearest_int": self.mod_z.nearest_int},
            "expected": self.expected,
            "abs_error": self.abs_error,
            "tolerance": self.tolerance,
            "quadrature": self.quadrature,
            "differentiation": self.differentiation,
            "seed": self.seed,
            "elapsed_ms": self.elapsed_ms,
            "pass": self.passed,
            "details": self.details,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentReport":
        if d.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported report schema {d.get('schema_version')!r}")
        raw = d["raw_value"]
        if isinstance(raw, dict):
            raw = complex(raw["real"], raw["imag"])
        mz = d.get("mod_z")
        return cls(
            name=d["name"],
            params=d["params"],
            raw_value=raw,
            expected=d["expected"],
            abs_error=d["abs_error"],
            tolerance=d["tolerance"],
            passed=d["pass"],
            mod_z=None if mz is None else ModZValue(mz["raw"], mz["reduced"], mz["nearest_int"]),
            quadrature=d["quadrature"],
            differentiation=d["differentiation"],
            seed=d["seed"],
            elapsed_ms=d["elapsed_ms"],
            details=d.get("details", {}),
        )

    def csv_row(self) -> list:
        raw = self.raw_value.real if isinstance(self.raw_value, complex) else self.raw_value
        summary = ";".join(f"{k}={_short(v)}" for k, v in sorted(self.params.items()))
        return [
            self.name,
            summary,
            repr(float(raw)),
            "" if self.mod_z is None else repr(self.mod_z.reduced),
            "" if self.expected is None else repr(self.expected),
            "" if self.abs_error is None else repr(self.abs_error),
            "true" if self.passed else "false",
            str(self.elapsed_ms),
        ]

    def summary_line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        err = "n/a" if self.abs_error is None else f"{self.abs_error:.3e}"
        return f"[{status}] {self.name} raw={_short(self.raw_value)} err={err} tol={self.tolerance:.1e}"


def _short(v):
    if isinstance(v, float):
        return f"{v:.12g}"
    if isinstance(v, complex):
        return f"{v.real:.12g}{v.imag:+.3g}j"
    if isinstance(v, (list, tuple)):
        return "/".join(_short(t) for t in v)
    return str(v)


def reports_to_json(reports) -> str:
    return json.dumps([r.to_dict() for r in reports], indent=2, sort_keys=False)


def reports_from_json(text: str) -> list:
    return [ExperimentReport.from_dict(d) for d in json.loads(text)]


def reports_to_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in reports:
        w.writerow(r.csv_row())
    return buf.getvalue()


# ----------------------------------------------------------------------
# helpers


def _diff_dict(spec: DiffSpec) -> dict:
    return {"backend": spec.backend, "step": spec.step, "richardson": spec.richardson}


def _quad_dict(quad: QuadratureSpec) -> dict:
    return {"order_per_axis": quad.order_per_axis, "node_count": quad.order_per_axis ** 3}


def _finish(name, params, raw, expected, tol, t0, *, quad=None, spec=None, seed=0, mod_z=None, abs_error=None,
            checks=None, details=None) -> ExperimentReport:
    if abs_error is None and expected is not None:
        abs_error = abs(raw - expected)
    details = dict(details or {})
    ok = abs_error is not None and bool(abs_error <= tol)
    if checks:
        details["checks"] = checks
        ok = ok and all(c["pass"] for c in checks)
    return ExperimentReport(
        name=name,
        params=params,
        raw_value=raw,
        expected=expected,
        abs_error=None if abs_error is None else float(abs_error),
        tolerance=float(tol),
        passed=ok,
        mod_z=mod_z,
        quadrature=None if quad is None else _quad_dict(quad),
        differentiation=None if spec is None else _diff_dict(spec),
        seed=int(seed),
        elapsed_ms=int(round(1000 * (time.perf_counter() - t0))),
        details=details,
    )


def _check(name, value, tol) -> dict:
    value = float(value)
    return {"name": name, "value": value, "tolerance": float(tol), "pass": bool(value <= tol)}


def _integrate_checked(F, cycle, quad, tol, checks, convergence, label="doubled_order_delta"):
    """Integrate, optionally re-integrating at doubled order as a convergence check."""
    value = integrate3(F, cycle, quad)
    if convergence:
        fine = integrate3(F, cycle, quad.doubled())
        checks.append(_check(label, abs(fine - value), tol / 10))
    return value


def _rng(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


def _sphere_connection() -> Connection:
    return Connection(levi_civita_form(round_metric(), left_invariant_frame()), "IJK")


def _random_rotation(rng, n) -> np.ndarray:
    q, r = np.linalg.qr(rng.normal(size=(n, n)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def _random_invertible(rng, n) -> np.ndarray:
    # well conditioned, positive determinant
    a = rng.uniform(-1, 1, size=(n, n)) + 3 * np.eye(n)
    return a


# SO(2) inside SO(3) as the stabilizer of the first basis vector
SO2_GENERATOR = np.array([[0.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, 1.0, 0.0]])


# ----------------------------------------------------------------------
# Maurer-Cartan integrals and algebra constants


def mc_group_map(target: str) -> tuple:
    """``(group map field, multiplicity, normalization, expected)`` for a target."""
    q = hopf_embedding()
    if target == "so3":
        return lie.adjoint_field(q), 0.5, MC_REAL, -1.0
    if target == "s3_real":
        return lie.rep_real_field(q), 1.0, MC_REAL, -1.0
    if target == "s3_real_inverse":
        return lie.inverse_rep_real_field(q), 1.0, MC_REAL, 1.0
    if target == "su2":
        return lie.rep_complex_field(q), 1.0, MC_COMPLEX, -1.0
    raise ValueError(f"unknown Maurer-Cartan target {target!r}; choose from {MC_TARGETS}")


def run_mc_integral(target: str, quad: QuadratureSpec = QuadratureSpec(), spec: DiffSpec = ANALYTIC,
                    tol: float = 1e-6, seed: int = 0, convergence: bool = True) -> ExperimentReport:
    """Normalized integral of ``tr(mu^3)`` over a group cycle reached from S^3.

    Maurer-Cartan forms always use the analytic channel of the group map.
    """
    t0 = time.perf_counter()
    G, mult, norm, expected = mc_group_map(target)
    chart = hopf_chart()
    mu = lie.maurer_cartan(lie.GroupMapField(chart, G))
    integrand = field_trace(field_wedge(mu, mu, mu))
    cycle = Cycle3(chart, multiplicity=mult)
    checks = []
    raw = _integrate_checked(integrand, cycle, quad, tol, checks, convergence)
    raw = raw * norm
    if checks:
        checks[-1]["value"] = abs(checks[-1]["value"] * norm)
        checks[-1]["pass"] = checks[-1]["value"] <= checks[-1]["tolerance"]
    details = {}
    if isinstance(raw, complex):
        details["imag_part"] = raw.imag
        checks.append(_check("imag_part", abs(raw.imag), tol))
        raw = raw.real
    return _finish(f"mc_{target}", {"target": target}, raw, expected, tol, t0, quad=quad, spec=ANALYTIC, seed=seed,
                   mod_z=reduce_mod_Z(raw), checks=checks, details=details)


def run_algebra_constants(tol: float = 1e-13) -> ExperimentReport:
    """Exact constants: ``tr(ad I ad J ad K) = -8``, ``ijk = -1``, ``R_C(ijk) = -Id``."""
    t0 = time.perf_counter()
    I, J, K = (lie.Quaternion(*row) for row in np.eye(4)[1:])
    adI, adJ, adK = (lie.ad_matrix(v) for v in "IJK")
    t_ijk = float(np.trace(adI @ adJ @ adK))
    t_ikj = float(np.trace(adI @ adK @ adJ))
    ijk = I * J * K
    rc = lie.rep_complex(I) @ lie.rep_complex(J) @ lie.rep_complex(K)
    derived = max(float(np.max(np.abs(lie.ad_from_bracket(v) - m)))
                  for v, m in zip((I, J, K), (adI, adJ, adK)))
    checks = [
        _check("tr_adI_adK_adJ_minus_8", abs(t_ikj - 8.0), tol),
        _check("ijk_plus_1", float(np.max(np.abs(ijk.array() - np.array([-1.0, 0, 0, 0])))), tol),
        _check("rep_complex_product_plus_id", float(np.max(np.abs(rc + np.eye(2)))), tol),
        _check("rep_complex_ijk_plus_id", float(np.max(np.abs(lie.rep_complex(ijk) + np.eye(2)))), tol),
        _check("ad_table_vs_bracket", derived, tol),
    ]
    return _finish("algebra_constants", {}, t_ijk, -8.0, tol, t0, checks=checks,
                   details={"tr_adI_adK_adJ": t_ikj})


# ----------------------------------------------------------------------
# round sphere and lens spaces


def sphere_gauge(kind: str, rng) -> lie.GroupMapField | None:
    chart = hopf_chart()
    if kind == "none":
        return None
    if kind == "constant":
        return lie.GroupMapField(chart, constant_field(_random_rotation(rng, 3), 3))
    if kind == "so2":
        angle = random_ambient_function(rng, n_terms=3, max_freq=1.5, scale=1.5)
        return lie.GroupMapField(chart, field_expm(angle, SO2_GENERATOR))
    raise ValueError(f"unknown gauge kind {kind!r}")


def run_cs_sphere(quad: QuadratureSpec = QuadratureSpec(), spec: DiffSpec = DEFAULT_DIFF, gauge: str = "none",
                  seed: int = 0, tol: float | None = None, convergence: bool = True) -> ExperimentReport:
    """Integral of the Levi-Civita Chern-Simons form of the round S^3.

    ``gauge`` is ``"none"`` (frame (I,J,K)), ``"constant"`` (a random constant
    rotation) or ``"so2"`` (a random smooth rotation fixing I).
    """
    t0 = time.perf_counter()
    tol = (1e-5 if gauge == "so2" else 1e-6) if tol is None else tol
    c = _sphere_connection()
    a = sphere_gauge(gauge, _rng(seed))
    if a is not None:
        c = gauge_transform(c, a, spec)
    checks = []
    raw = _integrate_checked(cs_form(c, spec), sphere_cycle(), quad, tol, checks, convergence)
    name = "cs_sphere" if gauge == "none" else f"cs_sphere_gauge_{gauge}"
    return _finish(name, {"gauge": gauge}, raw, -1.0, tol, t0, quad=quad, spec=spec, seed=seed,
                   mod_z=reduce_mod_Z(raw), checks=checks)


def run_cs_lens(params, quad: QuadratureSpec = QuadratureSpec(), spec: DiffSpec = DEFAULT_DIFF,
                tol: float = 1e-6, seed: int = 0, convergence: bool = True) -> ExperimentReport:
    """Chern-Simons invariant of ``L(p; q1, q2)`` with the frame induced by (I, J, K).

    The deck generator acts on (I, J, K) by a constant rotation fixing I, so
    the form descends; its integral over the fundamental slab is compared
    with ``-1/p`` modulo Z.
    """
    t0 = time.perf_counter()
    if not isinstance(params, LensParams):
        params = LensParams(*params)
    p = params.p
    F = cs_form(_sphere_connection(), spec)
    checks = []
    raw = _integrate_checked(F, lens_cycle(params), quad, tol, checks, convergence)
    mz = reduce_mod_Z(raw)
    expected = -1.0 / p
    err = mz.distance_to(expected)
    # deck invariance of the pointwise form
    x = hopf_chart().sample(_rng(seed), 64)
    deck = float(np.max(np.abs(F(x).top() - F(lens_deck(params, x)).top())))
    checks.append(_check("deck_invariance", deck, 1e-9))
    details = {"expected_reduced": reduce_mod_Z(expected).reduced}
    return _finish(f"cs_lens_{p}_{params.q1}_{params.q2}", {"p": p, "q1": params.q1, "q2": params.q2}, raw,
                   expected, tol, t0, quad=quad, spec=spec, seed=seed, mod_z=mz, abs_error=err, checks=checks,
                   details=details)


# ----------------------------------------------------------------------
# hypersurfaces and conformal changes


def run_hypersurface(axes=(1.0, 1.1, 1.2, 1.3), quad: QuadratureSpec = QuadratureSpec(),
                     spec: DiffSpec = DEFAULT_DIFF, tol: float | None = None, seed: int = 0,
                     conformal: bool = False, convergence: bool = True) -> ExperimentReport:
    """Chern-Simons integral of the connection induced on an ellipsoid in R^4.

    The frame is the Gram-Schmidt orthonormalization of the push-forward of
    (I, J, K).  With ``conformal`` the Levi-Civita connection of a random
    conformal rescaling ``e^{2f} g`` of the induced metric is used instead, in
    the same frame.  The integral must be an integer; for the round sphere it
    must be -1.
    """
    t0 = time.perf_counter()
    axes = tuple(float(a) for a in axes)
    round_ = all(a == 1.0 for a in axes)
    tol = (1e-6 if round_ and not conformal else 1e-4 if not round_ else 1e-5) if tol is None else tol
    frame = ellipsoid_frame(axes)
    if conformal:
        f = random_ambient_function(_rng(seed), frame.chart.embedding)
        omega = levi_civita_form(conformal_metric(round_metric(), f), frame, spec)
    else:
        omega = induced_hypersurface_connection(frame.chart.embedding, frame.ambient, spec)
    checks = []
    raw = _integrate_checked(cs_form(Connection(omega), spec), Cycle3(frame.chart), quad, tol, checks, convergence)
    mz = reduce_mod_Z(raw)
    expected = -1.0 if round_ else float(mz.nearest_int)
    name = "hypersurface_" + "_".join(f"{a:g}" for a in axes) + ("_conformal" if conformal else "")
    return _finish(name, {"axes": list(axes), "conformal": conformal}, raw, expected, tol, t0, quad=quad, spec=spec,
                   seed=seed, mod_z=mz, checks=checks, details={"integer": mz.nearest_int})


def run_conformal_check(seed: int = 0, quad: QuadratureSpec = QuadratureSpec(), spec: DiffSpec = DEFAULT_DIFF,
                        tol: float = 1e-5, n_points: int = 200, t_step: float = 1e-3,
                        convergence: bool = True) -> ExperimentReport:
    """Conformal variation of the round-sphere Chern-Simons form for a random ``f``.

    Sub-checks: the Koszul variation formula against a finite difference in
    ``t`` of the Levi-Civita form of ``e^{2tf} g`` (1e-5), and the pointwise
    vanishing of ``2 tr(omega_dot Omega)`` (1e-6).  The reported value is
    ``int (cs(e^{2f} g) - cs(g))`` in the fixed frame (I, J, K).
    """
    t0 = time.perf_counter()
    rng = _rng(seed)
    f = random_ambient_function(rng)
    frame, g0 = left_invariant_frame(), round_metric()
    x = hopf_chart().sample(rng, n_points)
    wdot = conformal_variation(g0, frame, f)

    def lc(t):
        return levi_civita_form(conformal_metric(g0, f, t), frame, spec)(x).coeffs

    def central(h):
        return (lc(h) - lc(-h)) / (2 * h)

    fd = (4 * central(t_step / 2) - central(t_step)) / 3
    koszul = float(np.max(np.abs(fd - wdot(x).coeffs)))
    c0 = _sphere_connection()
    bianchi = field_scale(2.0, field_trace(field_wedge(wdot, curvature(c0, spec))))
    bianchi_max = bianchi(x).max_abs()
    c1 = Connection(levi_civita_form(conformal_metric(g0, f), frame, spec))
    checks = [_check("koszul_vs_fd_in_t", koszul, 1e-5), _check("bianchi_2tr_wdot_Omega", bianchi_max, 1e-6)]
    F1, F0 = cs_form(c1, spec), cs_form(c0, spec)
    v1 = _integrate_checked(F1, sphere_cycle(), quad, tol, checks, convergence)
    v0 = integrate3(F0, sphere_cycle(), quad)
    raw = v1 - v0
    return _finish("conformal_check", {"factor_seed": seed}, raw, 0.0, tol, t0, quad=quad, spec=spec, seed=seed,
                   checks=checks, details={"cs_g1": v1, "cs_g0": v0})


# ----------------------------------------------------------------------
# identity fuzzing


def _gauge_trial(rng, spec, pts):
    d, n = 3, 3
    omega = random_trig_field(rng, d, 1, (n, n))
    factors = [field_expm(random_trig_field(rng, d, 0, (1, 1)), 0.5 * rng.uniform(-1, 1, size=(n, n)))
               for _ in range(3)]
    a = lie.GroupMapField(None, field_wedge(*factors))
    return gauge_change_defect(Connection(omega), a, spec)(pts).max_abs()


def _block_trial(rng, spec, pts, scalar):
    d = 3
    n1, n2 = (int(k) for k in rng.integers(1, 3, size=2))

    def rnd(shape):
        return random_trig_field(rng, d, 1, shape, scalar=scalar)

    b = BlockConnection(rnd((n1, n1)), rnd((n2, n2)), rnd((n1, n2)), rnd((n2, n1)))
    return block_cs_defect(b, spec)(pts).max_abs()


def _dcs_trial(rng, spec, pts):
    d, n = 4, 2
    c = Connection(random_trig_field(rng, d, 1, (n, n)))
    # omega is input data: its own derivative is analytic, the outer d follows spec
    dcs = exterior_derivative(cs_form(c, ANALYTIC), spec)
    return (dcs(pts) - pontryagin(c, ANALYTIC)(pts)).max_abs()


def _frobenius_trial(rng, spec, pts):
    d = 3
    g = random_trig_field(rng, d, 0, (1, 1))
    h = random_trig_field(rng, d, 0, (1, 1))
    omega = field_scalar_mul(g, exterior_derivative(h, ANALYTIC))
    return cs_form(Connection(omega), ANALYTIC)(pts).max_abs()


def _realification_trial(rng, spec, pts):
    d = 3
    wc = random_trig_field(rng, d, 1, (2, 2), scalar="complex")
    csc = cs_form_complex(Connection(wc), spec)(pts).coeffs.real
    csr = cs_form(Connection(realify(wc)), spec)(pts).coeffs
    wr = random_trig_field(rng, d, 1, (3, 3))
    half = 0.5 * cs_form_complex(complexify(Connection(wr)), spec)(pts).coeffs
    direct = cs_form(Connection(wr), spec)(pts).coeffs
    return max(float(np.max(np.abs(csc - csr))), float(np.max(np.abs(direct - half))))


def _structure_trial(rng, spec, pts):
    target = MC_TARGETS[int(rng.integers(len(MC_TARGETS)))]
    G = mc_group_map(target)[0]
    mu = lie.maurer_cartan(lie.GroupMapField(hopf_chart(), G))
    # mu = g^-1 dg is flat: d mu + mu^2 = 0
    dmu = exterior_derivative(mu, spec)
    return (dmu(pts) + field_wedge(mu, mu)(pts)).max_abs()


def _subgroup_trial(rng, spec, pts):
    gen = rng.uniform(-1, 1, size=(3, 3))
    a = field_expm(random_trig_field(rng, 3, 0, (1, 1)), gen)
    mu = lie.maurer_cartan(lie.GroupMapField(None, a))
    return field_trace(field_wedge(mu, mu, mu))(pts).max_abs()


_FUZZ = {
    # kind: (trial, default tolerance, default backend, points live on the sphere)
    "gauge": (_gauge_trial, 1e-7, DEFAULT_DIFF, False),
    "block": (None, 1e-11, ANALYTIC, False),
    "dcs": (_dcs_trial, 1e-7, DEFAULT_DIFF, False),
    "frobenius": (_frobenius_trial, 1e-13, ANALYTIC, False),
    "realification": (_realification_trial, 1e-9, DEFAULT_DIFF, False),
    "structure": (_structure_trial, 1e-7, DEFAULT_DIFF, True),
    "subgroup": (_subgroup_trial, 1e-12, ANALYTIC, False),
}


def run_identity_fuzz(which: str, seed: int = 0, trials: int | None = None, spec: DiffSpec | None = None,
                      n_points: int = 100, tol: float | None = None) -> ExperimentReport:
    """Maximum residual of an exact identity over seeded random trials.

    ``block`` runs ``trials`` real and ``trials`` complex block connections.
    """
    if which not in _FUZZ:
        raise ValueError(f"unknown identity {which!r}; choose from {FUZZ_KINDS}")
    t0 = time.perf_counter()
    trial, default_tol, default_spec, on_sphere = _FUZZ[which]
    tol = default_tol if tol is None else tol
    spec = default_spec if spec is None else spec
    trials = (50 if which == "block" else 20) if trials is None else trials
    rng = _rng(seed)
    worst = 0.0
    per_trial = []
    for _ in range(trials):
        pts = hopf_chart().sample(rng, n_points) if on_sphere else rng.uniform(0, 2 * np.pi, size=(n_points, 4 if which == "dcs" else 3))
        if which == "block":
            r = max(_block_trial(rng, spec, pts, "real"), _block_trial(rng, spec, pts, "complex"))
        else:
            r = trial(rng, spec, pts)
        per_trial.append(float(r))
        worst = max(worst, float(r))
    params = {"which": which, "trials": trials, "points": n_points}
    details = {"per_trial_max": per_trial}
    if which == "structure":
        details["identity"] = "d mu + mu^2 = 0"
    return _finish(f"fuzz_{which}", params, worst, 0.0, tol, t0, spec=spec, seed=seed, details=details)


def run_vanishing(seed: int = 0, n_points: int = 200) -> ExperimentReport:
    """Trivial and flat rank-1 connections have ``cs = 0`` exactly; ``g dh`` to 1e-13."""
    t0 = time.perf_counter()
    rng = _rng(seed)
    pts = rng.uniform(0, 2 * np.pi, size=(n_points, 3))
    trivial = cs_form(Connection(zero_field(3, 1, (3, 3))), ANALYTIC)(pts).max_abs()
    h = random_trig_field(rng, 3, 0, (1, 1))
    flat = cs_form(Connection(exterior_derivative(h, ANALYTIC)), ANALYTIC)(pts).max_abs()
    frob = run_identity_fuzz("frobenius", seed=seed, trials=20, n_points=n_points)
    checks = [_check("trivial_exact_zero", trivial, 0.0), _check("flat_rank1_exact_zero", flat, 0.0),
              _check("frobenius", frob.raw_value, 1e-13)]
    raw = max(trivial, flat, frob.raw_value)
    return _finish("vanishing", {}, raw, 0.0, 1e-13, t0, spec=ANALYTIC, seed=seed, checks=checks)


def run_stable_extension(quad: QuadratureSpec = QuadratureSpec(), spec: DiffSpec = DEFAULT_DIFF, seed: int = 0,
                         tol: float = 1e-6, convergence: bool = True) -> ExperimentReport:
    """Stable invariant of the round S^3 via extensions by rank 1 and rank 2.

    Each extended frame is changed by an independent random constant gauge;
    the two integrals must agree modulo Z.
    """
    t0 = time.perf_counter()
    rng = _rng(seed)
    c = _sphere_connection()
    values = []
    checks = []
    for k in (1, 2):
        ext = stable_extend(c, k)
        a = lie.GroupMapField(hopf_chart(), constant_field(_random_invertible(rng, 3 + k), 3))
        values.append(_integrate_checked(cs_form(gauge_transform(ext, a, spec), spec), sphere_cycle(), quad, tol,
                                         checks, convergence, f"doubled_order_delta_rank{k}"))
    raw = values[0] - values[1]
    mz = reduce_mod_Z(raw)
    return _finish("stable_extension", {"ranks": [1, 2]}, raw, 0.0, tol, t0, quad=quad, spec=spec, seed=seed,
                   mod_z=mz, abs_error=abs(mz.reduced), checks=checks,
                   details={"rank1": values[0], "rank2": values[1]})


def run_polar_check(seed: int = 0, n: int = 100, size: int = 4, tol: float = 1e-10) -> ExperimentReport:
    """Orthogonality residual of ``Phi_1`` on random matrices."""
    t0 = time.perf_counter()
    rng = _rng(seed)
    worst = 0.0
    for _ in range(n):
        A = rng.normal(size=(size, size))
        U = lie.polar_retract(A, 1.0)
        worst = max(worst, float(np.max(np.abs(U @ U.T - np.eye(size)))))
    return _finish("polar_orthogonality", {"matrices": n, "size": size}, worst, 0.0, tol, t0, seed=seed)


# ----------------------------------------------------------------------


def run_all(seed: int = 0, quad: QuadratureSpec = QuadratureSpec(), spec: DiffSpec = DEFAULT_DIFF,
            tol: float | None = None, conformal_factors: int = 10, progress=None) -> list:
    """Every acceptance experiment once, in a fixed order."""
    jobs = []
    for target in MC_TARGETS:
        jobs.append(lambda t=target: run_mc_integral(t, quad, tol=tol or 1e-6, seed=seed))
    jobs.append(lambda: run_algebra_constants())
    for g in ("none", "constant", "so2"):
        jobs.append(lambda g=g: run_cs_sphere(quad, spec, g, seed, tol))
    for case in LENS_CASES:
        jobs.append(lambda c=case: run_cs_lens(c, quad, spec, tol or 1e-6, seed))
    jobs.append(lambda: run_identity_fuzz("gauge", seed, 20, spec, tol=tol))
    jobs.append(lambda: run_identity_fuzz("block", seed, 50, ANALYTIC, tol=tol))
    jobs.append(lambda: run_identity_fuzz("dcs", seed, 20, spec, tol=tol))
    jobs.append(lambda: run_identity_fuzz("structure", seed, 20, spec, tol=tol))
    jobs.append(lambda: run_identity_fuzz("realification", seed, 20, spec, tol=tol))
    jobs.append(lambda: run_identity_fuzz("subgroup", seed, 20, ANALYTIC, tol=tol))
    jobs.append(lambda: run_vanishing(seed))
    for k in range(conformal_factors):
        jobs.append(lambda k=k: run_conformal_check(seed * 1000 + k, quad, spec, tol or 1e-5))
    jobs.append(lambda: run_hypersurface((1.0, 1.0, 1.0, 1.0), quad, spec, tol, seed))
    jobs.append(lambda: run_hypersurface((1.0, 1.1, 1.2, 1.3), quad, spec, tol, seed))
    jobs.append(lambda: run_hypersurface((1.0, 1.0, 1.0, 1.0), quad, spec, tol, seed, conformal=True))
    jobs.append(lambda: run_stable_extension(quad, spec, seed, tol or 1e-6))
    jobs.append(lambda: run_polar_check(seed))
    reports = []
    for job in jobs:
        r = job()
        if progress is not None:
            progress(r)
        reports.append(r)
    return reports
