"""Verification suites run by the command line tool.

Each suite takes an :class:`ExperimentConfig` and returns a :class:`SuiteResult`
holding named checks (value against tolerance), report extras and plot tables.
"""
from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import displacement as dsp
from . import matrix_nvcs as mx
from . import measures as ms
from . import nvcs_core as core
from . import s3_nvcs as s3
from .deformed_algebra import Canonical, MultiParam, pq_exponential, pq_exponential_product
from .errors import CacheSchemaError, ConfigError, NVCSError
from .ladder import K_action_identity, K_pq, K_simple, pq_recurrence_residuals
from .spectrum import ModelParams, SpectralData, oracle_comparison, reorganized_spectrum

CACHE_SCHEMA = "nvcs-spectrum/1"
SUITES = ("spectrum", "nvcs", "verify-identity", "matrix", "displacement", "s3", "specfun")
LADDER_CLASSES = ("simple", "action-identity", "pq")
FAMILIES = ("s2", "normal", "quaternion", "s3", "dual", "displacement", "t-operator")
SUITE_FAMILIES = {
    "spectrum": FAMILIES,
    "nvcs": ("s2", "dual", "normal", "quaternion", "s3"),
    "verify-identity": ("s2",),
    "matrix": ("normal", "quaternion"),
    "displacement": ("displacement", "t-operator", "s2", "dual"),
    "s3": ("s3",),
    "specfun": FAMILIES,
}

DEFAULT_TOLERANCES = {
    "spectrum.eigenvalues": 1e-10,
    "spectrum.mixing_normalization": 1e-12,
    "spectrum.eigenvectors": 1e-10,
    "spectrum.cache_roundtrip": 1e-15,
    "nvcs.normalization": 1e-12,
    "nvcs.annihilation_recurrence": 1e-12,
    "nvcs.annihilation_matrix": 1e-10,
    "nvcs.evolve_relabel": 1e-12,
    "nvcs.evolve_propagator": 1e-10,
    "nvcs.continuity": 1.0,
    "identity.moments": 1e-8,
    "identity.weights": 1e-12,
    "identity.resolution": 1e-4,
    "identity.audit": 1e-3,
    "matrix.haar": 1e-10,
    "matrix.normalization": 1e-12,
    "matrix.evolve_relabel": 1e-12,
    "matrix.eigen_residual": 1e-10,
    "matrix.resolution": 1e-4,
    "matrix.audit": 1e-3,
    "displacement.commutators": 1e-12,
    "displacement.reconstruction": 1e-8,
    "displacement.dual_reconstruction": 1e-8,
    "displacement.t_operator": 1e-12,
    "displacement.script_t_operator": 1e-12,
    "displacement.derivative_order": 1.0,
    "s3.normalization": 1e-12,
    "s3.evolve_relabel": 1e-12,
    "s3.star_moments": 1e-8,
    "s3.tower_moments": 1e-8,
    "s3.resolution": 1e-4,
    "specfun.recurrences": 1e-10,
    "specfun.ramanujan": 1e-6,
    "specfun.exponential_product": 1e-10,
}

TOP_KEYS = {"suite", "model", "deformation", "ladder", "family", "label", "numeric", "output"}
NUMERIC_KEYS = {"n_max", "n_check", "tolerances", "grid", "t_grid", "r_grid"}


# ---------------------------------------------------------------------------
# configuration

@dataclass(frozen=True)
class ExperimentConfig:
    params: ModelParams
    ladder_class: str
    ladder_options: dict
    family: str
    label: dict
    numeric: dict
    output_dir: str | None
    suite: str | None
    raw: dict = field(default_factory=dict)

    @property
    def n_max(self):
        return self.numeric.get("n_max")

    def ladder(self):
        d = self.params.deformation
        if self.ladder_class == "simple":
            return K_simple(d)
        if self.ladder_class == "action-identity":
            return K_action_identity(self.params.detuning, d, self.params.kappa)
        o = self.ladder_options
        return K_pq(d, float(o.get("mu", 0.0)), float(o.get("nu", 0.0)), float(o.get("l", 1.0)))


def _require_mapping(value, where):
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise ConfigError(f"{where} must be a mapping")
    return value


def parse_config(raw, overrides=None):
    """Validate a configuration mapping; every problem raises ConfigError."""
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a mapping")
    unknown = set(raw) - TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
    model = dict(_require_mapping(raw.get("model"), "model"))
    model["deformation"] = _require_mapping(raw.get("deformation"), "deformation") or {"type": "canonical"}
    try:
        params = ModelParams.from_dict(model)
    except (NVCSError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid model or deformation block: {exc}") from exc
    lad = raw.get("ladder", "simple")
    if isinstance(lad, str):
        lad = {"class": lad}
    lad = dict(_require_mapping(lad, "ladder"))
    cls = lad.pop("class", "simple")
    if cls not in LADDER_CLASSES:
        raise ConfigError(f"ladder class must be one of {LADDER_CLASSES}")
    family = raw.get("family", "s2")
    if family not in FAMILIES:
        raise ConfigError(f"family must be one of {FAMILIES}")
    numeric = dict(_require_mapping(raw.get("numeric"), "numeric"))
    bad = set(numeric) - NUMERIC_KEYS
    if bad:
        raise ConfigError(f"unknown numeric keys: {sorted(bad)}")
    tol = _require_mapping(numeric.get("tolerances"), "numeric.tolerances")
    for k, v in tol.items():
        if k not in DEFAULT_TOLERANCES:
            raise ConfigError(f"unknown tolerance {k!r}")
        if not isinstance(v, (int, float)) or isinstance(v, bool) or not v >= 0:
            raise ConfigError(f"tolerance {k!r} must be a nonnegative number")
    for key in ("n_max", "n_check"):
        if key in numeric and (not isinstance(numeric[key], int) or isinstance(numeric[key], bool)
                               or numeric[key] < 1):
            raise ConfigError(f"numeric.{key} must be a positive integer")
    overrides = overrides or {}
    if overrides.get("n_max") is not None:
        numeric["n_max"] = int(overrides["n_max"])
    scale = overrides.get("tolerance_scale")
    numeric["tolerance_scale"] = 1.0 if scale is None else float(scale)
    if not numeric["tolerance_scale"] > 0:
        raise ConfigError("tolerance scale must be positive")
    label = dict(_require_mapping(raw.get("label"), "label"))
    output = _require_mapping(raw.get("output"), "output")
    suite = raw.get("suite")
    if suite is not None and suite not in SUITES:
        raise ConfigError(f"suite must be one of {SUITES}")
    cfg = ExperimentConfig(params, cls, lad, family, label, numeric, output.get("dir"), suite, raw)
    try:
        cfg.ladder()
    except NVCSError as exc:
        raise ConfigError(f"ladder class {cls!r} is incompatible with the model: {exc}") from exc
    return cfg


def check_compatibility(cfg, suite):
    if cfg.family not in SUITE_FAMILIES[suite]:
        raise ConfigError(f"suite {suite!r} does not accept family {cfg.family!r}")
    if suite == "s3":
        if not (cfg.ladder_class == "action-identity"
                or (cfg.ladder_class == "simple" and isinstance(cfg.params.deformation, Canonical))):
            raise ConfigError("the s3 suite needs the action-identity class or the canonical simple class")


# ---------------------------------------------------------------------------
# results

@dataclass
class Check:
    name: str
    value: float
    tolerance: float
    detail: str = ""

    @property
    def passed(self):
        return bool(np.isfinite(self.value) and self.value <= self.tolerance)

    def to_dict(self):
        return {"name": self.name, "value": float(self.value), "tolerance": float(self.tolerance),
                "passed": self.passed, "detail": self.detail}


@dataclass
class SuiteResult:
    suite: str
    checks: list = field(default_factory=list)
    extras: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def failing(self):
        return [c for c in self.checks if not c.passed]


class _Runner:
    """Collects checks; a library error inside a check marks that check failed."""

    def __init__(self, cfg, suite):
        self.cfg = cfg
        self.result = SuiteResult(suite)
        self.tol = dict(DEFAULT_TOLERANCES)
        self.tol.update(cfg.numeric.get("tolerances") or {})
        self.scale = cfg.numeric.get("tolerance_scale", 1.0)

    def tolerance(self, name):
        return self.tol[name] * self.scale

    def add(self, name, value, detail=""):
        self.result.checks.append(Check(name, float(value), self.tolerance(name), detail))

    def guarded(self, name, fn):
        try:
            fn()
        except CacheSchemaError:
            # an incompatible cache file is a setup problem, not a failed check
            raise
        except NVCSError as exc:
            self.result.checks.append(Check(name, math.inf, self.tolerance(name),
                                            f"{type(exc).__name__}: {exc}"))


def _grid_opts(cfg):
    return dict(cfg.numeric.get("grid") or {})


def _s2_label(cfg):
    lab = cfg.label
    z = lab.get("z", [0.6, 0.3])
    return core.S2Label(complex(z[0], z[1]) if isinstance(z, list) else complex(z),
                        float(lab.get("tau_plus", 0.2)), float(lab.get("tau_minus", -0.3)),
                        float(lab.get("theta", 0.7)), float(lab.get("phi", 0.4)))


def _t_grid(cfg):
    g = cfg.numeric.get("t_grid", {"start": 0.0, "stop": 10.0, "num": 41})
    return np.linspace(float(g["start"]), float(g["stop"]), int(g["num"]))


# ---------------------------------------------------------------------------
# spectrum cache

def cache_key(params, n_max):
    blob = json.dumps({"params": params.to_dict(), "n_max": int(n_max)}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:24]


def cache_spectrum(spectral, directory, oracle=None):
    """Write the spectrum (and optionally the matrix-oracle comparison) and return the path."""
    os.makedirs(directory, exist_ok=True)
    path = os.path.join(directory, f"spectrum-{cache_key(spectral.params, spectral.n_max)}.json")
    doc = {"schema": CACHE_SCHEMA, "spectral": spectral.to_dict(), "oracle": oracle}
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        json.dump(doc, fh, sort_keys=True)
    os.replace(tmp, path)
    return path


def _read_cache(path):
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise CacheSchemaError(f"{path} is not a spectrum cache file") from exc
    found = doc.get("schema") if isinstance(doc, dict) else None
    if found != CACHE_SCHEMA:
        raise CacheSchemaError(f"{path}: expected schema {CACHE_SCHEMA!r}, found {found!r}")
    return doc


def load_spectrum(path):
    return SpectralData.from_dict(_read_cache(path)["spectral"])


def load_oracle(path):
    return _read_cache(path).get("oracle")


def cached_oracle(params, N, n_check, directory=None):
    """(OracleComparison dict, status, path); a cache hit skips the diagonalization."""
    directory = os.environ.get("NVCS_CACHE_DIR") if directory is None else directory
    if directory:
        path = os.path.join(directory, f"spectrum-{cache_key(params, N)}.json")
        if os.path.exists(path):
            oracle = load_oracle(path)
            if oracle is not None and oracle.get("n_check") == n_check:
                return oracle, "hit", path
    oracle = oracle_comparison(params, N, n_check).to_dict()
    if not directory:
        return oracle, "off", None
    return oracle, "miss", cache_spectrum(reorganized_spectrum(params, N), directory, oracle)


def spectral_difference(a, b):
    fields = ("finite", "e_plus", "e_minus", "sin", "cos", "Q")
    return max(float(np.max(np.abs(getattr(a, f) - getattr(b, f)), initial=0.0)) for f in fields)


# ---------------------------------------------------------------------------
# suites

def suite_spectrum(cfg):
    run = _Runner(cfg, "spectrum")
    N = cfg.n_max or 60
    n_check = cfg.numeric.get("n_check", min(40, N - cfg.params.k - 1))

    sp = reorganized_spectrum(cfg.params, N)

    def body():
        o, status, path = cached_oracle(cfg.params, N, n_check)
        run.add("spectrum.eigenvalues", o["eigenvalue_error"], f"N={N}, n<={n_check}")
        run.add("spectrum.mixing_normalization", o["normalization_error"])
        run.add("spectrum.eigenvectors", o["eigenvector_error"], f"residual {o['residual_error']:.3e}")
        run.result.extras["oracle"] = o
        run.result.extras["cache"] = status
        if path is not None:
            run.add("spectrum.cache_roundtrip", spectral_difference(load_spectrum(path), sp))

    run.guarded("spectrum.eigenvalues", body)
    n = np.arange(N + 1)
    pf = np.full(N + 1, np.nan)
    m = N - cfg.params.k + 1
    pf[:m] = core.pair_frequencies(sp, m - 1)
    run.result.tables["spectrum"] = (["n", "e_plus", "e_minus", "pair_frequency"],
                                     np.column_stack([n, sp.e_plus, sp.e_minus, pf]))
    return run.result


def _propagator_error(state, t):
    """Evolve in the Fock basis with the dense Hamiltonian and compare to relabeling."""
    from scipy.linalg import expm
    from .spectrum import build_hamiltonian_matrix
    psi, trunc, _ = core.to_fock(state)
    H = build_hamiltonian_matrix(state.spectral.params, trunc.N)
    lhs = expm(-1j * state.spectral.params.omega0 * t * H) @ psi
    rhs, _, _ = core.to_fock(core.evolve(state, t), trunc.N)
    return float(np.max(np.abs(lhs - rhs)))


def suite_nvcs(cfg):
    fam = cfg.family
    if fam in ("normal", "quaternion"):
        return suite_matrix(cfg, name="nvcs")
    if fam == "s3":
        return suite_s3(cfg, name="nvcs")
    run = _Runner(cfg, "nvcs")
    lad = cfg.ladder()
    n_max = cfg.n_max or 40
    sp = reorganized_spectrum(cfg.params, n_max + cfg.params.k)
    label = _s2_label(cfg)
    t = 0.731
    if fam == "dual":
        def body():
            st = dsp.dual_state(label, lad, sp, n_max)
            run.add("nvcs.normalization", abs(st.norm() - 1.0))
            ev = dsp.evolve_dual(st, t)
            rl = dsp.dual_state(label.shifted(-t), lad, sp, n_max)
            run.add("nvcs.evolve_relabel", float(np.max(np.abs(ev.vector() - rl.vector()))))
        run.guarded("nvcs.normalization", body)
        return run.result

    def body():
        st = core.coefficients(label, lad, sp, n_max)
        run.add("nvcs.normalization", max(abs(st.norm() - 1.0) - st.tail, 0.0), f"tail {st.tail:.3e}")
        run.add("nvcs.annihilation_recurrence", core.annihilation_residual(st))
        run.add("nvcs.annihilation_matrix", core.annihilation_residual_matrix(st))
        ev = core.evolve(st, t)
        rl = core.coefficients(label.shifted(t), lad, sp, n_max)
        run.add("nvcs.evolve_relabel", float(np.max(np.abs(ev.vector() - rl.vector()))))
        run.add("nvcs.evolve_propagator", _propagator_error(st, t))
        # continuity at the origin: distance to the z=0 state scales like |z|
        base = core.coefficients(core.S2Label(0j, label.tau_plus, label.tau_minus, label.theta, label.phi),
                                 lad, sp, n_max).vector()
        ratios = []
        for eps in (1e-3, 1e-6):
            near = core.coefficients(core.S2Label(eps * np.exp(1j * 0.3), label.tau_plus, label.tau_minus,
                                                  label.theta, label.phi), lad, sp, n_max).vector()
            ratios.append(float(np.linalg.norm(near - base)) / eps)
        run.add("nvcs.continuity", abs(ratios[1] - ratios[0]) / max(ratios[0], 1e-300),
                f"|dpsi|/|z| = {ratios}")
        tg = _t_grid(cfg)
        inv, norms = core.atomic_inversion(st, tg)
        cols = [tg, inv, norms]
        names = ["t", "sigma3", "norm"]
        for n in range(min(3, n_max + 1)):
            cols.append(np.array([core.rabi_phase(cfg.params, sp, n, float(x), label) for x in tg]))
            names.append(f"rabi_phase_{n}")
        run.result.tables["rabi"] = (names, np.column_stack(cols))
        run.result.extras["action_variables"] = list(core.action_variables(st))
        run.result.extras["radius"] = list(st.radius)

    run.guarded("nvcs.normalization", body)
    return run.result


def identity_density(cfg):
    d = cfg.params.deformation
    if cfg.ladder_class == "action-identity":
        return ms.density_canonical_action(cfg.params.detuning)
    if cfg.ladder_class == "pq":
        o = cfg.ladder_options
        return ms.density_pq(d, float(o.get("mu", 0.0)), float(o.get("nu", 0.0)), float(o.get("l", 1.0)))
    if isinstance(d, Canonical):
        return ms.density_simple()
    raise ConfigError("the simple class has a closed-form density only for the canonical deformation")


def suite_identity(cfg):
    run = _Runner(cfg, "verify-identity")
    lad = cfg.ladder()
    try:
        dens = identity_density(cfg)
    except NVCSError as exc:
        raise ConfigError(str(exc)) from exc
    n_check = cfg.numeric.get("n_check", 15 if cfg.ladder_class != "pq" else 8)
    rows = []

    def moments():
        worst = 0.0
        for br in ("+", "-"):
            mv = ms.verify_moments(dens, ms.MomentProblem.from_ladder(lad, br), n_check,
                                   run.tolerance("identity.moments"))
            worst = max(worst, mv.max_error)
            rows.extend([(br == "+", r.n, r.target, r.computed, r.rel_error) for r in mv.rows])
        run.add("identity.moments", worst, f"n <= {n_check}")

    run.guarded("identity.moments", moments)
    r_grid = np.linspace(0.0, 4.0, 41)[1:]
    if dens.weights:
        run.guarded("identity.weights", lambda: run.add("identity.weights",
                                                        ms.weight_identity_error(dens, lad, r_grid)))
    g = _grid_opts(cfg)
    n_max = cfg.n_max or 25

    def identity():
        grid = ms.IdentityGrid(float(g.get("r_max", 8.0)), int(g.get("radial_panels", 8)),
                               int(g.get("radial_order", 16)), int(g.get("n_arg", 32)),
                               int(g.get("n_theta", 4)), int(g.get("n_phi", 4)))
        sp = reorganized_spectrum(cfg.params, n_max)
        rep = ms.resolution_of_identity_check(lad, sp, dens, n_max, int(g.get("n_check", 10)), grid)
        run.add("identity.resolution", rep.max_error, f"diag {rep.max_diagonal_error:.3e}, off {rep.max_offdiagonal:.3e}")
        run.add("identity.audit", max(abs(a - 1.0) for a in rep.audit.values()), f"audit {rep.audit}")
        run.result.extras["identity"] = rep.to_dict()
        dev = rep.deviation
        m = dev.shape[0] // 2
        run.result.tables["identity_deviation"] = (
            ["n", "diag_plus", "diag_minus"],
            np.column_stack([np.arange(m), np.real(np.diag(dev))[:m], np.real(np.diag(dev))[m:]]))

    run.guarded("identity.resolution", identity)
    r = np.linspace(0.0, 4.0, 41)
    cols = [r, dens(r ** 2)]
    names = ["r", "density"]
    for br in ("+", "-"):
        try:
            cols.append(dens.weight(br, r, lad))
        except NVCSError:
            cols.append(np.full(len(r), np.nan))
        names.append(f"W_{'plus' if br == '+' else 'minus'}")
    run.result.tables["density"] = (names, np.column_stack(cols))
    if rows:
        run.result.tables["moments"] = (["plus_tower", "n", "target", "computed", "rel_error"],
                                        np.array(rows, dtype=float))
    return run.result


def _matrix_label(cfg):
    lab = cfg.label
    if cfg.family == "quaternion":
        return mx.QuaternionLabel(float(lab.get("r", 0.8)), float(lab.get("xi", 0.4)),
                                  float(lab.get("theta", 0.9)), float(lab.get("phi", 0.3)),
                                  float(lab.get("tau_plus", 0.2)), float(lab.get("tau_minus", -0.1)))
    z = lab.get("z", [0.5, 0.2])
    w = lab.get("w", [-0.3, 0.4])
    V = mx.u2_from_angles(float(lab.get("phi1", 0.3)), float(lab.get("theta", 0.8)),
                          float(lab.get("phi2", 1.1)), float(lab.get("global_phase", 0.0)))
    return mx.NormalMatrixLabel(complex(*z), complex(*w), V, float(lab.get("tau_plus", 0.2)),
                                float(lab.get("tau_minus", -0.1)))


def suite_matrix(cfg, name="matrix"):
    run = _Runner(cfg, name)
    lad = cfg.ladder()
    n_max = cfg.n_max or 40
    sp = reorganized_spectrum(cfg.params, n_max)
    label = _matrix_label(cfg)

    def haar():
        err = max(float(np.max(np.abs(mx.haar_average_projector(basis_index=s) - 0.5 * np.eye(2))))
                  for s in (0, 1))
        run.add("matrix.haar", err)

    run.guarded("matrix.haar", haar)

    def states():
        st = mx.matrix_coefficients(label, lad, sp, n_max)
        run.add("matrix.normalization", abs(st.total_norm() - 1.0))
        t = 0.417
        ev = mx.matrix_evolve(st, t)
        rl = mx.matrix_coefficients(label.shifted(t), lad, sp, n_max)
        run.add("matrix.evolve_relabel", float(np.max(np.abs(ev.M - rl.M))))
        run.add("matrix.eigen_residual", mx.matrix_eigen_residual(st))
        if cfg.family == "quaternion" and cfg.ladder_class == "simple" and isinstance(cfg.params.deformation, Canonical):
            run.result.extras["quaternion_norm_relative"] = abs(
                st.norm ** -2 / (2 * math.exp(label.r ** 2)) - 1.0)

    run.guarded("matrix.normalization", states)
    if cfg.ladder_class == "simple" and isinstance(cfg.params.deformation, Canonical):
        def identity():
            g = _grid_opts(cfg)
            sp_id = reorganized_spectrum(cfg.params, int(g.get("n_max", 25)))
            fn = mx.quaternion_resolution_check if cfg.family == "quaternion" else mx.normal_resolution_check
            rep = fn(lad, sp_id, n_max=int(g.get("n_max", 25)), n_check=int(g.get("n_check", 10)))
            run.add("matrix.resolution", rep.max_error)
            run.add("matrix.audit", abs(rep.audit - 1.0), f"audit {rep.audit}")
            run.result.extras["matrix_identity"] = rep.to_dict()
        run.guarded("matrix.resolution", identity)
    return run.result


def suite_displacement(cfg):
    run = _Runner(cfg, "displacement")
    lad = cfg.ladder()
    n_max = cfg.n_max or 40
    sp = reorganized_spectrum(cfg.params, n_max + dsp.MARGIN + cfg.params.k)
    label = _s2_label(cfg)
    if abs(label.z) > 1:
        raise ConfigError("displacement checks use |z| <= 1")

    def comm():
        c = dsp.commutator_checks(lad, n_max, sp, (label.tau_plus, label.tau_minus))
        run.add("displacement.commutators", max(c.values()), json.dumps(c, sort_keys=True))

    run.guarded("displacement.commutators", comm)

    def recon():
        st = core.coefficients(label, lad, sp, n_max)
        cp, cm = dsp.reconstruct_nvcs(label, lad, sp, n_max)
        run.add("displacement.reconstruction",
                max(float(np.max(np.abs(cp - st.C_plus))), float(np.max(np.abs(cm - st.C_minus)))))

    run.guarded("displacement.reconstruction", recon)

    def recon_dual():
        st = dsp.dual_state(label, lad, sp, n_max)
        cp, cm = dsp.reconstruct_dual(label, lad, sp, n_max)
        run.add("displacement.dual_reconstruction",
                max(float(np.max(np.abs(cp - st.C_plus))), float(np.max(np.abs(cm - st.C_minus)))))

    run.guarded("displacement.dual_reconstruction", recon_dual)

    def t_ops():
        sp_n = reorganized_spectrum(cfg.params, n_max)
        sp0 = dsp.canonical_spectrum(sp_n, n_max)
        T = dsp.t_operator_s2(label, lad, sp_n, n_max)
        st = core.coefficients(label, lad, sp_n, n_max)
        got = T.apply(dsp.canonical_s2_state(label, sp0, n_max))
        run.add("displacement.t_operator",
                float(np.max(np.abs(got - np.stack([st.C_plus, st.C_minus], axis=1)))))
        S = dsp.script_t_operator_s2(label, lad, sp_n, n_max)
        du = dsp.dual_state(label, lad, sp_n, n_max)
        got = S.apply(dsp.canonical_s2_state(label, sp0, n_max, tau_sign=-1))
        run.add("displacement.script_t_operator",
                float(np.max(np.abs(got - np.stack([du.C_plus, du.C_minus], axis=1)))))

        def builder(lb):
            d = dsp.dual_state(lb, lad, sp_n, n_max)
            return np.stack([d.C_plus, d.C_minus], axis=1)

        rep = dsp.proper_time_derivative_check(builder, label, sp_n, n_max, +1)
        run.add("displacement.derivative_order", abs(rep.ratio - 4.0),
                f"sign +, errors {rep.errors}, ratio {rep.ratio:.4f}")

    run.guarded("displacement.t_operator", t_ops)
    return run.result


def _s3_label(cfg):
    lab = cfg.label
    z = lab.get("z", [0.6, 0.3])
    return s3.S3Label(complex(z[0], z[1]), float(lab.get("theta1", 0.7)), float(lab.get("theta2", 1.1)),
                      float(lab.get("phi", 0.4)), float(lab.get("tau_star", 0.3)),
                      float(lab.get("tau_plus", 0.2)), float(lab.get("tau_minus", -0.3)))


def suite_s3(cfg, name="s3"):
    run = _Runner(cfg, name)
    k = cfg.params.k
    detuning = cfg.params.detuning if cfg.ladder_class == "action-identity" else 0.0
    lad = K_action_identity(detuning)
    n_max = cfg.n_max or 60
    sp = reorganized_spectrum(cfg.params, n_max)
    label = _s3_label(cfg)

    def states():
        st = s3.s3_coefficients(label, lad, sp, k, n_max)
        run.add("s3.normalization", max(abs(st.norm() - 1.0) - st.tail, 0.0), f"tail {st.tail:.3e}")
        t = 0.53
        ev = s3.s3_evolve(st, t)
        rl = s3.s3_coefficients(label.shifted(t), lad, sp, k, n_max)
        run.add("s3.evolve_relabel", float(np.max(np.abs(ev.vector() - rl.vector()))))
        run.result.extras["action_variables"] = list(s3.s3_action_variables(st))

    run.guarded("s3.normalization", states)
    dens = s3.s3_densities("canonical-action", k, detuning)

    def moments():
        rep = s3.s3_moment_check(dens, lad, k, int(cfg.numeric.get("n_check", 15)),
                                 run.tolerance("s3.star_moments"))
        star = [r["rel_error"] for r in rep.rows if r["sector"] == "*"]
        tower = [r["rel_error"] for r in rep.rows if r["sector"] != "*"]
        run.add("s3.star_moments", max(star), f"n <= {k - 1}")
        run.add("s3.tower_moments", max(tower))
        run.result.extras["s3_moments"] = rep.to_dict()

    run.guarded("s3.star_moments", moments)

    def identity():
        g = _grid_opts(cfg)
        rep = s3.s3_resolution_check(lad, sp, dens, k, int(g.get("n_max", 25)), int(g.get("n_check", 10)))
        run.add("s3.resolution", rep.max_error, f"audit {rep.audit}")
        run.result.extras["s3_identity"] = rep.to_dict()

    run.guarded("s3.resolution", identity)
    r = np.linspace(0.0, 4.0, 41)
    run.result.tables["s3_weights"] = (["r", "density", "W_star", "W_minus", "W_plus"],
                                       np.column_stack([r, dens.h_plus(r ** 2), dens.W_star(r),
                                                        dens.W_minus(r), dens.W_plus(r)]))
    return run.result


def suite_specfun(cfg):
    run = _Runner(cfg, "specfun")
    d = cfg.params.deformation
    n_check = cfg.numeric.get("n_check", 8)
    if isinstance(d, MultiParam):
        specs = [d]
        p, q = d.p, d.q
    else:
        p, q = 1.1, 0.9
        specs = [MultiParam.with_k0(p, q, 1.0, 1.0, 0.0, 0.0, k0) for k0 in (0, 1)]

    def rec():
        worst = 0.0
        for s in specs:
            e1, e2 = pq_recurrence_residuals(s, 50)
            worst = max(worst, float(np.max(e1)), float(np.max(e2)))
        run.add("specfun.recurrences", worst, "n <= 50")

    run.guarded("specfun.recurrences", rec)
    rows = []

    def ram():
        worst = 0.0
        for n in range(n_check + 1):
            quad, closed, rel = ms.ramanujan_check(p, q, 1.0, n)
            rows.append((n, quad, closed, rel))
            worst = max(worst, rel)
        run.add("specfun.ramanujan", worst, f"n <= {n_check}")

    run.guarded("specfun.ramanujan", ram)

    def expo():
        # positive arguments only: on the negative axis the series cancels
        # catastrophically and the product form is the reference
        xs = np.linspace(0.0, 0.5, 11)
        a = np.array([pq_exponential(p, q, x) for x in xs])
        b = np.array([pq_exponential_product(p, q, x) for x in xs])
        run.add("specfun.exponential_product", float(np.max(np.abs(a - b) / np.abs(b))))

    run.guarded("specfun.exponential_product", expo)
    if rows:
        run.result.tables["ramanujan"] = (["n", "quadrature", "closed_form", "rel_error"],
                                          np.array(rows, dtype=float))
    return run.result


RUNNERS = {
    "spectrum": suite_spectrum,
    "nvcs": suite_nvcs,
    "verify-identity": suite_identity,
    "matrix": suite_matrix,
    "displacement": suite_displacement,
    "s3": suite_s3,
    "specfun": suite_specfun,
}


def run_suite(cfg, suite):
    check_compatibility(cfg, suite)
    return RUNNERS[suite](cfg)
