"""Configuration-driven experiments: solve, check, and write artifacts.

A check name is one of

* ``theorem2``, ``corollary1``, ``theorem4``: parameter conditions;
* ``a1~b1``, ``a2~b2+g1``, ``a12~b1+b2``: monotone policy components
  (``a12`` means both) along ``+``-joined state axes;
* ``th1~b2+g2``, ``th2~b1+g1``: nonincreasing threshold surfaces;
* ``game``, ``game_interior``: coordination-game equilibria of the final Q
  (literal scope ``b_i < L_i + 1`` or interior ``1 <= b_i <= L_i``);
* ``qslices``: L-natural convexity of every ``(b_i, a_i)`` slice of Q, with the
  multimodularity of the shifted ``(b_i - a_i, a_i)`` form checked alongside;
* ``dominance``: stochastic dominance of both channel matrices.

Expected verdicts come from ``expect.<check> = pass|fail`` keys. In assert
mode any mismatch gives exit status 1; configuration errors give 2.
"""
from __future__ import annotations

import hashlib
import io
import json
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .channel import ChannelError
from .config import ConfigError, params_from_mapping, read_config, parse_config
from .model import ModelParams, RelayMDP, build_model
from .policy import extract_thresholds, simulate_chain, stationary_metrics
from .solver import ConvergenceError, VIResult, value_iteration
from .structure import (
    CheckReport,
    Clause,
    check_game_equilibria,
    check_lnatural,
    check_monotone_policy,
    check_multimodular,
    check_stochastic_dominance,
    check_theorem_conditions,
    q_slice,
    unimodular_transform,
)

__all__ = [
    "ExperimentSpec",
    "ExperimentResult",
    "SuiteResult",
    "load_spec",
    "spec_from_text",
    "run_experiment",
    "run_suite",
    "bundled_specs_dir",
    "resolve_config",
    "evaluate_check",
    "EXIT_OK",
    "EXIT_FAIL",
    "EXIT_CONFIG",
]

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2
_MONO = re.compile(r"^a(1|2|12)~((?:b1|b2|g1|g2)(?:\+(?:b1|b2|g1|g2))*)$")
_TH = re.compile(r"^th(1|2)~((?:b1|b2|g1|g2)(?:\+(?:b1|b2|g1|g2))*)$")
_FIXED = ("theorem2", "corollary1", "theorem4", "game", "game_interior", "qslices", "dominance")


@dataclass(frozen=True)
class ExperimentSpec:
    name: str
    params: ModelParams
    checks: tuple = ()
    expect: dict = field(default_factory=dict)
    mode: str = "report"
    tolerance: float = 1e-8
    max_iters: int = 100_000
    seed: int = 0
    horizon: int = 0
    replications: int = 0
    initial_state: tuple = (0, 0, 1, 1)
    burn_in: float = 0.1

    @property
    def assert_mode(self) -> bool:
        return self.mode == "assert"


def _validate_check(name: str) -> None:
    if name in _FIXED or _MONO.match(name) or _TH.match(name):
        return
    raise ConfigError(f"unknown check {name!r}")


def _spec_from_raw(raw: dict) -> ExperimentSpec:
    params = params_from_mapping(raw)
    checks = tuple(c for c in re.split(r"[,\s]+", raw.get("checks", "").strip()) if c)
    for c in checks:
        _validate_check(c)
    expect = {}
    for k, v in raw.items():
        if k.startswith("expect."):
            c = k[len("expect."):]
            if c not in checks:
                raise ConfigError(f"expectation for {c!r} which is not in checks")
            if v.strip().lower() not in ("pass", "fail"):
                raise ConfigError(f"{k}: expected 'pass' or 'fail', got {v!r}")
            expect[c] = v.strip().lower() == "pass"
    mode = raw.get("mode", "report").strip().lower()
    if mode not in ("report", "assert"):
        raise ConfigError(f"mode must be 'report' or 'assert', got {mode!r}")
    try:
        tol = float(raw.get("solver.tolerance", 1e-8))
        max_iters = int(raw.get("solver.max_iters", 100_000))
        seed = int(raw.get("seed", 0))
        horizon = int(raw.get("simulate.horizon", 0))
        reps = int(raw.get("simulate.replications", 0))
        init = tuple(int(x) for x in raw.get("simulate.initial_state", "0,0,1,1").split(","))
        burn = float(raw.get("simulate.burn_in", 0.1))
    except ValueError as exc:
        raise ConfigError(f"bad solver/simulation setting: {exc}") from None
    if tol <= 0 or max_iters < 1:
        raise ConfigError("solver.tolerance must be > 0 and solver.max_iters >= 1")
    if len(init) != 4:
        raise ConfigError("simulate.initial_state needs four integers b1,b2,g1,g2")
    return ExperimentSpec(raw.get("name", "experiment"), params, checks, expect, mode,
                          tol, max_iters, seed, horizon, reps, init, burn)


def load_spec(path) -> ExperimentSpec:
    return _spec_from_raw(read_config(resolve_config(path)))


def spec_from_text(text: str, name: str = "experiment") -> ExperimentSpec:
    raw = parse_config(text)
    raw.setdefault("name", name)
    return _spec_from_raw(raw)


def bundled_specs_dir() -> Path:
    return Path(str(resources.files("nctwrc") / "figs"))


def resolve_config(path) -> Path:
    """A path, or the bare name of a bundled spec such as ``fig4``."""
    p = Path(path)
    if p.exists():
        return p
    cand = bundled_specs_dir() / f"{path}.cfg"
    if cand.exists():
        return cand
    raise ConfigError(f"config {path!r} not found")


# --------------------------------------------------------------------------

def _qslice_report(result: VIResult) -> CheckReport:
    qg = result.q_grid()
    space = result.space
    count = 0
    for i in (1, 2):
        B_other = space.L2 + 2 if i == 1 else space.L1 + 2
        for fixed in np.ndindex(B_other, space.K1, space.K2, 2):
            f = q_slice(qg, i, fixed)
            rep = check_lnatural(f)
            shifted = unimodular_transform(f, 2, 2, sign=-1, inverse=False)
            rep_mm = check_multimodular(shifted)
            count += 1
            if rep.passed != rep_mm.passed:
                return CheckReport("qslices", False, note=f"L-natural and shifted multimodular verdicts differ on i={i} slice {fixed}")
            if not rep.passed:
                rep.check = "qslices"
                rep.note = f"(b{i}, a{i}) slice with (b_other, g1, g2, a_other) = {fixed} (0-based g)"
                return rep
    return CheckReport("qslices", True, note=f"{count} slices L-natural; shifted forms multimodular")


def evaluate_check(name: str, model: RelayMDP, result: VIResult, surface=None) -> CheckReport:
    """Run one named check against a solved model."""
    if name in ("theorem2", "corollary1", "theorem4"):
        return check_theorem_conditions(model.params, model.channels, name)
    m = _MONO.match(name)
    if m:
        comps = (1, 2) if m.group(1) == "12" else (int(m.group(1)),)
        rep = check_monotone_policy(result.policy, tuple(m.group(2).split("+")), comps)
        rep.check = name
        return rep
    m = _TH.match(name)
    if m:
        surface = surface or extract_thresholds(result.policy)
        rep = surface.check_nonincreasing(int(m.group(1)), tuple(m.group(2).split("+")))
        rep.check = name
        return rep
    if name in ("game", "game_interior"):
        scope = "literal" if name == "game" else "interior"
        rep = check_game_equilibria(result.q, model.space, scope)
        rep.check = name
        return rep
    if name == "qslices":
        return _qslice_report(result)
    if name == "dominance":
        clauses = []
        for i, ch in enumerate(model.channels, start=1):
            r = check_stochastic_dominance(ch.transition)
            clauses.append(Clause(f"channel {i}", r.passed, detail="" if r.passed else f"witness (g,m)={r.witness}"))
        return CheckReport("dominance", all(c.passed for c in clauses), clauses=clauses)
    raise ConfigError(f"unknown check {name!r}")


@dataclass
class ExperimentResult:
    name: str
    exit_code: int
    verdicts: list = field(default_factory=list)  # (check, passed, expected or None)
    reports: list = field(default_factory=list)
    iterations: int = 0
    out_dir: Path | None = None
    error: str = ""

    @property
    def mismatches(self) -> list:
        return [c for c, p, e in self.verdicts if e is not None and p != e]


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _params_echo(p: ModelParams) -> dict:
    d = asdict(p)
    for k in ("channel1", "channel2"):
        c = getattr(p, k)
        d[k] = {"K": c.K, "mean_snr": c.mean_snr, "mean_snr_db": c.mean_snr_db,
                "doppler_symbol_product": c.doppler_symbol_product, "modulation": c.modulation}
    return d


def run_experiment(spec, out_dir=None, assert_mode: bool | None = None, seed: int | None = None,
                   threads: int = 1, log=None) -> ExperimentResult:
    """Solve ``spec``, run its checks, and write artifacts to ``out_dir``.

    ``spec`` may be an :class:`ExperimentSpec` or a path / bundled name.
    Outputs: ``policy.csv`` (with ``V``), ``value.csv``, ``thresholds.csv``,
    ``residuals.txt``, ``checks.txt``, optional ``simulation.csv`` and
    ``stationary.csv``, and ``manifest.json`` listing every file with its
    SHA-256. Output is byte-identical for identical inputs.
    """
    name = getattr(spec, "name", str(spec))
    try:
        if not isinstance(spec, ExperimentSpec):
            spec = load_spec(spec)
        name = spec.name
        model = build_model(spec.params)
    except (ConfigError, ChannelError, ValueError) as exc:
        return ExperimentResult(name, EXIT_CONFIG, error=str(exc))
    if assert_mode is None:
        assert_mode = spec.assert_mode
    seed = spec.seed if seed is None else seed

    residual_log = io.StringIO()
    try:
        result = value_iteration(model, spec.tolerance, spec.max_iters, log=residual_log)
    except ConvergenceError as exc:
        return ExperimentResult(name, EXIT_FAIL, error=str(exc))
    surface = extract_thresholds(result.policy)

    reports = []
    verdicts = []
    for c in spec.checks:
        rep = evaluate_check(c, model, result, surface)
        reports.append(rep)
        verdicts.append((c, rep.passed, spec.expect.get(c)))

    lines = [f"experiment {name}", f"iterations {result.iterations}",
             f"final residual {result.residuals[-1]!r}", ""]
    for (c, passed, exp), rep in zip(verdicts, reports):
        tag = "" if exp is None else ("  [as expected]" if passed == exp else
                                      f"  [UNEXPECTED: expected {'pass' if exp else 'fail'}]")
        lines.append(rep.to_text() + tag)
        lines.append("")
    report_text = "\n".join(lines)

    mismatches = [c for c, p, e in verdicts if e is not None and p != e]
    exit_code = EXIT_FAIL if (assert_mode and mismatches) else EXIT_OK

    out = None
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        files = {}

        def put(fname, writer):
            path = out / fname
            with open(path, "w", newline="") as fh:
                writer(fh)
            files[fname] = _sha256(path)

        put("policy.csv", lambda fh: result.policy.to_csv(fh, result.values))
        put("value.csv", lambda fh: _value_csv(fh, model, result.values))
        put("thresholds.csv", surface.to_csv)
        put("residuals.txt", lambda fh: fh.write(residual_log.getvalue()))
        put("checks.txt", lambda fh: fh.write(report_text))
        if spec.horizon > 0 and spec.replications > 0:
            sim = simulate_chain(model, result.policy, spec.horizon, spec.replications, seed,
                                 spec.initial_state, spec.burn_in, threads)
            put("simulation.csv", sim.to_csv)
            put("stationary.csv", stationary_metrics(model, result.policy, spec.initial_state).to_csv)
        manifest = {
            "name": name,
            "params": _params_echo(spec.params),
            "solver": {"tolerance": spec.tolerance, "max_iters": spec.max_iters,
                       "iterations": result.iterations, "final_residual": result.residuals[-1]},
            "seed": seed,
            "mode": "assert" if assert_mode else "report",
            "checks": [{"check": c, "passed": bool(p), "expected": None if e is None else bool(e)}
                       for c, p, e in verdicts],
            "exit_code": exit_code,
            "files": files,
        }
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    if log is not None:
        log.write(report_text + "\n")
    return ExperimentResult(name, exit_code, verdicts, reports, result.iterations, out)


def _value_csv(fh, model, values):
    fh.write("b1,b2,g1,g2,V\n")
    for i, s in enumerate(model.space):
        fh.write(f"{s.b1},{s.b2},{s.g1},{s.g2},{float(values[i])!r}\n")


@dataclass
class SuiteResult:
    results: list
    exit_code: int

    def table(self) -> str:
        if not self.results:
            return "no experiments\n"
        rows = [f"{'experiment':<14} {'exit':>4}  checks"]
        for r in self.results:
            if r.error:
                rows.append(f"{r.name:<14} {r.exit_code:>4}  ERROR: {r.error}")
                continue
            parts = []
            for c, p, e in r.verdicts:
                mark = "" if e is None else ("=" if p == e else "!")
                parts.append(f"{c}:{'pass' if p else 'fail'}{mark}")
            rows.append(f"{r.name:<14} {r.exit_code:>4}  {' '.join(parts)}")
        n_ok = sum(1 for r in self.results if not r.error and not r.mismatches)
        rows.append(f"{n_ok}/{len(self.results)} experiments matched their expected outcomes")
        return "\n".join(rows) + "\n"


def run_suite(directory=None, out_root=None, assert_mode: bool | None = None, threads: int = 1) -> SuiteResult:
    """Run every ``*.cfg`` in ``directory`` (bundled figure specs by default).

    A malformed spec does not stop the others. Exit status is the worst of the
    individual ones.
    """
    directory = bundled_specs_dir() if directory is None else Path(directory)
    paths = sorted(directory.glob("*.cfg"))

    def one(path):
        sub = None if out_root is None else Path(out_root) / path.stem
        return run_experiment(path, sub, assert_mode=assert_mode)

    if threads > 1 and len(paths) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, paths))
    else:
        results = [one(p) for p in paths]
    code = max((r.exit_code for r in results), default=EXIT_OK)
    suite = SuiteResult(results, code)
    if out_root is not None:
        Path(out_root).mkdir(parents=True, exist_ok=True)
        (Path(out_root) / "suite.txt").write_text(suite.table())
    return suite
