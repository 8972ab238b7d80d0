"""Single solves and convergence studies."""

import json
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources

import numpy as np

from . import agglomeration, assembly, condensation, errors, fem, geometry, pixelmesh, vemspace
from .exceptions import ConfigError

logger = logging.getLogger(__name__)

METHODS = ("vem_bdt", "fem_nitsche", "fem_bdt")


@dataclass
class SolveResult:
    mesh: object
    dofmap: object
    ops: list
    u: np.ndarray
    record: errors.ErrorRecord
    report: object
    cmap: object = None


def ratio_from_tau(tau_hat):
    m = 1.0 / tau_hat
    if abs(m - round(m)) > 1e-9 or round(m) < 1:
        raise ConfigError(f"1/tau_hat must be a positive integer, got tau_hat={tau_hat}")
    return int(round(m))


def build_mesh(domain, H, tau_hat, rule="contained", graded=None):
    """Pixel grid with h = tau_hat H and its agglomeration.

    ``graded`` = (corner, levels) refines toward ``corner``; H is then the
    coarse block side and the smallest blocks have side H / 2^(levels-1).
    """
    m = ratio_from_tau(tau_hat)
    if graded is None:
        grid = pixelmesh.classify_pixels(domain, tau_hat * H, rule=rule)
        return agglomeration.agglomerate_uniform(grid, m)
    corner, levels = graded
    scale = 2 ** (levels - 1)
    h = tau_hat * H / scale
    grid = pixelmesh.classify_pixels(domain, h, rule=rule)
    return agglomeration.agglomerate_graded(grid, corner, m * scale, levels)


def solve_vem(case, mesh, config, condense=True):
    dofmap = vemspace.build_dof_map(mesh, config.k)
    ops = vemspace.build_all(mesh, dofmap, config.beta)
    system = assembly.assemble_full(mesh, dofmap, ops, case, config)
    if condense:
        cmap = condensation.build_condensation(mesh, dofmap, ops, config.beta)
        _, u, report = condensation.condense_and_solve(system, cmap)
        active = cmap.n_retained
    else:
        from .solver import solve_sparse
        cmap = None
        u, report = solve_sparse(system)
        active = dofmap.N
    e0, e1 = errors.compute_errors(mesh, ops, u, case)
    rec = errors.ErrorRecord(mesh.H_nominal, mesh.h, config.k, mesh.tau_hat, int(active), e0, e1)
    return SolveResult(mesh, dofmap, ops, u, rec, report, cmap)


# --------------------------------------------------------------------------
# configuration

def parse_size(value):
    """Mesh sizes as floats, '1/64' fractions or '2^-6' powers."""
    if isinstance(value, (int, float)):
        return float(value)
    s = str(value).strip()
    try:
        if "^" in s:
            base, exp = s.split("^")
            return float(base) ** float(exp)
        return float(Fraction(s))
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"cannot parse size {value!r}") from exc


def _dyadic(x):
    e = math.log2(x)
    return abs(e - round(e)) < 1e-9


@dataclass
class StudyConfig:
    case: str = "test1a"
    method: str = "vem_bdt"
    k: list = field(default_factory=lambda: [1])
    k_star: int = None
    tau_hat: list = field(default_factory=lambda: [0.25])
    H: list = field(default_factory=list)
    levels: list = field(default_factory=list)
    corner: tuple = (0.0, 0.0)
    gamma: float = None
    beta: float = 1.0
    rule: str = "contained"
    condense: bool = True
    g_star_mode: str = "projected"
    seed: int = 0
    csv: str = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; expected one of {METHODS}")
        self.k = [int(k) for k in np.atleast_1d(self.k)]
        self.tau_hat = [parse_size(t) for t in np.atleast_1d(self.tau_hat)]
        self.H = [parse_size(h) for h in self.H]
        self.levels = [int(v) for v in self.levels]
        if not self.H and not self.levels:
            raise ConfigError("study needs a non-empty H list (or graded levels)")
        if any(k < 1 or k > 6 for k in self.k):
            raise ConfigError("orders must lie in 1..6")
        for H in self.H:
            if H <= 0 or not _dyadic(H):
                raise ConfigError(f"H = {H} is not a dyadic fraction")
        for t in self.tau_hat:
            ratio_from_tau(t)
            if not _dyadic(t):
                raise ConfigError(f"tau_hat = {t} is not a dyadic fraction")
        if self.gamma is not None and self.gamma <= 0:
            raise ConfigError("gamma must be positive")

    @classmethod
    def from_dict(cls, data):
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        data = dict(data)
        if "corner" in data:
            data["corner"] = tuple(float(c) for c in data["corner"])
        return cls(**data)


def preset_names():
    return sorted(p.name[:-5] for p in resources.files("pixvem.presets").iterdir()
                  if p.name.endswith(".json"))


def load_preset(name):
    path = resources.files("pixvem.presets") / f"{name}.json"
    if not path.is_file():
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    return json.loads(path.read_text())


def load_config(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        from .exceptions import ParseError
        raise ParseError(f"cannot read config {path}: {exc}") from exc


# --------------------------------------------------------------------------
# studies

@dataclass
class StudyResult:
    records: list
    slopes: dict  # (method, k, tau_hat) -> {"e0": slope, "e1": slope}
    extra: dict = field(default_factory=dict)


def _slopes(records, method):
    out = {}
    keys = sorted({(r.k, r.tau_hat) for r in records})
    for k, t in keys:
        rs = [r for r in records if r.k == k and r.tau_hat == t]
        if len(rs) >= 2:
            out[(method, k, t)] = {
                "e0": errors.fit_slope([(r.H, r.e0) for r in rs]),
                "e1": errors.fit_slope([(r.H, r.e1) for r in rs])}
    return out


def run_study(config):
    """Uniform study over k x tau_hat x H (or FEM over k x h with h = H)."""
    if not isinstance(config, StudyConfig):
        config = StudyConfig.from_dict(config)
    if config.levels:
        return run_graded_study(config)
    case = geometry.builtin_case(config.case)
    records = []
    for k in config.k:
        if config.method == "vem_bdt":
            cfg = assembly.BdtConfig(k=k, k_star=config.k_star, gamma=config.gamma, beta=config.beta)
            for t in config.tau_hat:
                for H in config.H:
                    mesh = build_mesh(case.domain, H, t, config.rule)
                    res = solve_vem(case, mesh, cfg, config.condense)
                    logger.info("k=%d tau=%g H=%g: e0=%.3e e1=%.3e dofs=%d",
                                k, t, H, res.record.e0, res.record.e1, res.record.active_dofs)
                    records.append(res.record)
        else:
            k_star = 0 if config.method == "fem_nitsche" else (config.k_star or k)
            fcfg = fem.FemConfig(k=k, gamma=config.gamma, k_star=k_star, g_star_mode=config.g_star_mode)
            for H in config.H:
                grid = pixelmesh.classify_pixels(case.domain, H, rule=config.rule)
                _, rec = fem.fem_solve(grid, case, fcfg)
                logger.info("fem k=%d h=%g: e0=%.3e e1=%.3e", k, H, rec.e0, rec.e1)
                records.append(rec)
    result = StudyResult(records, _slopes(records, config.method))
    if config.csv:
        errors.write_csv(records, config.csv)
    return result


def run_graded_study(config):
    """Level l uses order k = l and l grading levels toward ``config.corner``.

    The coarse block side is 1/4 and the recorded H is the smallest block
    side, 1/4 / 2^(l-1).
    """
    if not isinstance(config, StudyConfig):
        config = StudyConfig.from_dict(config)
    case = geometry.builtin_case(config.case)
    records = []
    H0 = 0.25
    for t in config.tau_hat:
        for lev in config.levels:
            cfg = assembly.BdtConfig(k=lev, k_star=config.k_star, gamma=config.gamma, beta=config.beta)
            mesh = build_mesh(case.domain, H0, t, config.rule, graded=(config.corner, lev))
            res = solve_vem(case, mesh, cfg, config.condense)
            logger.info("level %d: e1=%.3e dofs=%d", lev, res.record.e1, res.record.active_dofs)
            records.append(res.record)
    extra = {}
    if len(records) >= 2:
        cbrt = np.cbrt([r.active_dofs for r in records])
        loge = np.log([r.e1 for r in records])
        extra["cbrt_dofs_correlation"] = float(np.corrcoef(cbrt, loge)[0, 1])
        extra["cbrt_dofs_slope"] = float(np.polyfit(cbrt, loge, 1)[0])
    if config.csv:
        errors.write_csv(records, config.csv)
    return StudyResult(records, {}, extra)
