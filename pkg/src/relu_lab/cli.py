"""``relu-lab``: verification and experiment subcommands.

Every subcommand runs once per seed and emits one :class:`RunRecord` per
trial, appended as a JSON line to ``<results-dir>/<subcommand>.jsonl``, plus a
CSV summary with one row per trial. Parameters come from built-in defaults,
then an optional TOML file, then command-line flags (flags win)::

    seeds = [0, 1, 2]
    workers = 2

    [run-reduction]
    d = 20
    eta = 0.1

Unknown keys and ill-typed values are rejected with exit status 2. The exit
status is 0 when every verdict of every trial holds, 1 otherwise.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import logging
import math
import os
import re
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np
import tomli

from relu_lab import __version__
from relu_lab._rng import derive_seed, substream
from relu_lab.approx_relu import ApproxConfig, default_alpha_grid, select_alpha
from relu_lab.datagen import (CorruptionModel, SlpnInstance, drop_coordinate, gaussian_lift,
                              lifted_parity_dataset, make_agnostic_relu_dataset, parity_relu_weight,
                              remap_dataset, sample_slpn)
from relu_lab.datasets import LabeledDataset, load_dataset
from relu_lab.gaussian_stats import (OPT_THRESHOLD, OPTIMAL_NORM, SQRT_2PI, angle_disagreement,
                                     random_label_loss)
from relu_lab.hermite import (correlation_lower_bound, correlation_series, correlation_term,
                              hermite_eval, normalized_hermite, relu_coefficient, sign_coefficient)
from relu_lab.learners import (HalfspaceLearnerSpec, ReluLearnerSpec, relu_predict,
                               scan_candidate_count, square_loss)
from relu_lab.numeric_oracle import (correlation_2d_quadrature, gauss_hermite_rule, half_normal_rule,
                                     mc_expectation, quad_expectation)
from relu_lab.slpn_reduction import ReductionConfig, auto_epsilon, recover_parity
from relu_lab.sq_sim import EmpiricalDistribution, SqOracle, gd_via_sq, parity_sq_dimension, sq_query_lower_bound

log = logging.getLogger("relu_lab")

SUBCOMMANDS = ("verify-hermite", "verify-gap", "run-reduction", "run-approx", "sq-demo")


def version_string() -> str:
    c2 = correlation_series(2, 42).inner_product
    return f"relu-lab {__version__} (opt_threshold={OPT_THRESHOLD!r}, c2={c2!r})"


# ---------------------------------------------------------------- parameters

@dataclass(frozen=True)
class Param:
    name: str
    kind: type
    default: Any
    help: str
    choices: tuple | None = None
    check: Callable[[Any], bool] | None = None
    check_msg: str = ""
    optional: bool = False

    @property
    def flag(self) -> str:
        return "--" + self.name.replace("_", "-")


def _pos(v) -> bool:
    return v > 0


def _prob(v) -> bool:
    return 0.0 <= v < 0.5


def _p(name, kind, default, help, **kw) -> Param:
    return Param(name, kind, default, help, **kw)


COMMON = (
    _p("seeds", list, [0], "seeds, e.g. 0,1,2 or 0:10"),
    _p("workers", int, 1, "trials run in parallel (capped by RELU_LAB_THREADS)", check=_pos, check_msg="must be positive"),
    _p("results_dir", str, "results", "directory for the JSONL records and CSV summary"),
)

PARAMS: dict[str, tuple[Param, ...]] = {
    "verify-hermite": (
        _p("max_degree", int, 20, "highest coefficient degree checked", check=lambda v: v >= 0, check_msg="must be >= 0"),
        _p("nodes", int, 128, "quadrature nodes per half-line", check=lambda v: v >= 8, check_msg="must be >= 8"),
        _p("tol", float, 1e-8, "tolerance for coefficients and orthonormality", check=_pos, check_msg="must be positive"),
        _p("parseval_cutoff", int, 40, "degree cutoff of the Parseval check", check=_pos, check_msg="must be positive"),
    ),
    "verify-gap": (
        _p("k", int, 2, "parity size (4l + 2)", check=lambda v: v >= 2 and v % 4 == 2, check_msg="must be of the form 4l + 2"),
        _p("eta", float, 0.1, "label noise rate", check=_prob, check_msg="must lie in [0, 1/2)"),
        _p("n_max", int, 42, "last degree of the series"),
        _p("nodes", int, 96, "2-D quadrature nodes per axis (k = 2 only)", check=lambda v: v >= 32, check_msg="must be >= 32"),
        _p("tol", float, 1e-6, "series-vs-quadrature tolerance", check=_pos, check_msg="must be positive"),
        _p("mc_samples", int, 10_000_000, "Monte Carlo draws for the correlation", check=lambda v: v >= 2, check_msg="must be >= 2"),
        _p("d", int, 4, "dimension of the lifted-parity loss check"),
        _p("gap_samples", int, 1_000_000, "samples for the loss check", check=lambda v: v >= 2, check_msg="must be >= 2"),
    ),
    "run-reduction": (
        _p("d", int, 20, "dimension", check=lambda v: v >= 2, check_msg="must be >= 2"),
        _p("k", int, 2, "parity size", check=_pos, check_msg="must be positive"),
        _p("eta", float, 0.1, "label noise rate", check=_prob, check_msg="must lie in [0, 1/2)"),
        _p("m1", int, 100_000, "training samples per coordinate", check=_pos, check_msg="must be positive"),
        _p("m2", int, 100_000, "validation samples", check=_pos, check_msg="must be positive", optional=True),
        _p("epsilon", float, None, "gap parameter (default: 0.8 x predicted gap)", check=_pos, check_msg="must be positive",
           optional=True),
        _p("learner", str, "subset-scan", "ReLU learner", choices=("subset-scan", "gradient-descent")),
        _p("k_max", int, None, "largest support for subset-scan (default: k)", check=_pos, check_msg="must be positive",
           optional=True),
        _p("repetitions", int, 1, "majority-vote repetitions", check=_pos, check_msg="must be positive"),
        _p("out", str, None, "report JSON path", optional=True),
    ),
    "run-approx": (
        _p("d", int, 10, "dimension", check=_pos, check_msg="must be positive"),
        _p("m", int, 100_000, "samples", check=lambda v: v >= 10, check_msg="must be >= 10"),
        _p("wstar_norm", float, 1.0, "norm of the generating weight", check=lambda v: 0 < v <= 1, check_msg="must lie in (0, 1]"),
        _p("corruption", str, "none", "kind:magnitude, e.g. flip-fraction:0.01"),
        _p("alpha_grid", list, None, "threshold levels, e.g. 0.05,0.1,0.2 (default: 8 log-spaced in [0.01, 0.5])",
           optional=True),
        _p("learner", str, "averaging", "halfspace learner", choices=("averaging", "band-localized")),
        _p("c_bound", float, 10.0, "constant C in the loss bound C opt^(2/3) + slack", check=_pos, check_msg="must be positive"),
        _p("slack", float, 0.02, "additive slack of the loss bound", check=lambda v: v >= 0, check_msg="must be >= 0"),
        _p("eval_samples", int, 1_000_000, "fresh samples for the population loss", check=lambda v: v >= 2,
           check_msg="must be >= 2"),
        _p("out", str, None, "report JSON path", optional=True),
    ),
    "sq-demo": (
        _p("mode", str, "sampling", "oracle mode", choices=("sampling", "adversarial")),
        _p("rule", str, "null", "adversary rule", choices=("plus", "minus", "flip", "null", "random")),
        _p("tau", float, 1e-3, "query tolerance", check=_pos, check_msg="must be positive"),
        _p("steps", int, 50, "gradient steps", check=_pos, check_msg="must be positive"),
        _p("lr", float, 0.5, "learning rate", check=lambda v: v >= 0, check_msg="must be >= 0"),
        _p("dataset", str, None, "CSV or .rlds dataset (default: lifted k-parity data)", optional=True),
        _p("d", int, 6, "dimension of generated data", check=lambda v: v >= 2, check_msg="must be >= 2"),
        _p("k", int, 2, "parity size of generated data (4l + 2)", check=lambda v: v >= 2 and v % 4 == 2,
           check_msg="must be of the form 4l + 2"),
        _p("eta", float, 0.0, "label noise of generated data", check=_prob, check_msg="must lie in [0, 1/2)"),
        _p("m", int, 100_000, "samples of generated data", check=lambda v: v >= 2, check_msg="must be >= 2"),
        _p("out", str, None, "trace CSV path (seed, step, loss, queries)", optional=True),
    ),
}


class ConfigError(ValueError):
    """Invalid configuration; reported with exit status 2."""


def _parse_seeds(text: str) -> list[int]:
    seeds: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if ":" in part:
            lo, hi = part.split(":")
            seeds.extend(range(int(lo), int(hi)))
        elif part:
            seeds.append(int(part))
    if not seeds:
        raise ValueError("no seeds given")
    return seeds


def _parse_floats(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t.strip()]


def _flag_type(p: Param):
    if p.name == "seeds":
        return _parse_seeds
    if p.kind is list:
        return _parse_floats
    return p.kind


def _coerce(p: Param, value, where: str):
    """Type-check a config value (TOML or flag) against ``p``."""
    if value is None:
        if p.optional:
            return None
        raise ConfigError(f"{where}: {p.name} may not be empty")
    if p.kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if p.kind is list and isinstance(value, str):
        try:
            value = _flag_type(p)(value)
        except ValueError as exc:
            raise ConfigError(f"{where}: {p.name}: {exc}") from exc
    if p.kind is list:
        if not isinstance(value, list) or not value:
            raise ConfigError(f"{where}: {p.name} must be a non-empty list")
        want = int if p.name == "seeds" else (int, float)
        if any(isinstance(v, bool) or not isinstance(v, want) for v in value):
            raise ConfigError(f"{where}: {p.name} has an entry of the wrong type")
        if p.name != "seeds":
            value = [float(v) for v in value]
    elif isinstance(value, bool) or not isinstance(value, p.kind):
        raise ConfigError(f"{where}: {p.name} must be of type {p.kind.__name__}, got {type(value).__name__}")
    if p.choices and value not in p.choices:
        raise ConfigError(f"{where}: {p.name} must be one of {', '.join(p.choices)}, got {value!r}")
    if p.check and not p.check(value):
        raise ConfigError(f"{where}: {p.name} {p.check_msg}, got {value!r}")
    return value


def _locate(text: str, table: str | None, key: str) -> int | None:
    """1-based line of ``key`` inside ``[table]`` (or the top level)."""
    current = None
    for i, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        head = re.match(r"^\[\s*([^\]]+?)\s*\]$", s)
        if head:
            current = head.group(1).strip('"')
            if table is not None and current == table and key is None:
                return i
            continue
        if current == table and re.match(rf'^"?{re.escape(key)}"?\s*=', s):
            return i
    return None


def load_config(path: str | Path) -> dict:
    """Read and validate a TOML config; returns ``{"common": {...}, <subcommand>: {...}}``."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from exc
    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    out: dict[str, dict] = {"common": {}}
    common = {p.name: p for p in COMMON}
    for key, value in raw.items():
        if key in SUBCOMMANDS:
            if not isinstance(value, dict):
                raise ConfigError(f"{path}:{_locate(text, None, key)}: [{key}] must be a table")
            known = {p.name: p for p in PARAMS[key]}
            block = {}
            for sub, v in value.items():
                name = sub.replace("-", "_")
                where = f"{path}:{_locate(text, key, sub) or '?'}: [{key}]"
                if name not in known:
                    raise ConfigError(f"{where}: unknown key {sub!r}")
                block[name] = _coerce(known[name], v, where)
            out[key] = block
            continue
        name = key.replace("-", "_")
        where = f"{path}:{_locate(text, None, key) or '?'}"
        if name not in common:
            raise ConfigError(f"{where}: unknown key {key!r}")
        out["common"][name] = _coerce(common[name], value, where)
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="relu-lab", description="ReLU regression hardness and approximation experiments.")
    parser.add_argument("--version", action="version", version=version_string())
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="TOML config file")
        sp.add_argument("-v", "--verbose", action="store_true")
        for p in COMMON + PARAMS[name]:
            kw = {"dest": p.name, "default": None, "help": f"{p.help} (default: {p.default})"}
            if p.choices:
                kw["choices"] = p.choices
            sp.add_argument(p.flag, type=_flag_type(p), **kw)
    return parser


def resolve(args: argparse.Namespace) -> tuple[dict, dict]:
    """``(common, params)`` from defaults, config, and flags."""
    cfg = load_config(args.config) if args.config else {"common": {}}
    resolved = []
    for group, block in ((COMMON, cfg["common"]), (PARAMS[args.subcommand], cfg.get(args.subcommand, {}))):
        values = {p.name: p.default for p in group}
        values.update(block)
        for p in group:
            flag_value = getattr(args, p.name)
            if flag_value is not None:
                values[p.name] = _coerce(p, flag_value, p.flag)
        resolved.append(values)
    _cross_check(args.subcommand, resolved[1])
    return resolved[0], resolved[1]


def _cross_check(subcommand: str, params: dict) -> None:
    """Validation that spans fields or needs the library's own parsers."""
    try:
        if subcommand == "run-approx":
            CorruptionModel.parse(params["corruption"])
            if params["alpha_grid"]:
                ApproxConfig(tuple(params["alpha_grid"]))
        if subcommand == "run-reduction" and params["k"] > params["d"]:
            raise ValueError("k may not exceed d")
    except ValueError as exc:
        raise ConfigError(f"[{subcommand}]: {exc}") from exc


def config_hash(subcommand: str, params: dict) -> str:
    """sha256 of the canonical JSON of the parameter block (output paths excluded)."""
    body = {k: v for k, v in params.items() if k != "out"}
    text = json.dumps({"subcommand": subcommand, "params": body}, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


# ---------------------------------------------------------------- records

@dataclass
class RunRecord:
    subcommand: str
    config_hash: str
    seed: int
    measured: dict[str, float] = field(default_factory=dict)
    verdicts: dict[str, bool] = field(default_factory=dict)
    wall_clock: float = 0.0
    version: str = ""
    error: str | None = None

    @property
    def passed(self) -> bool:
        return self.error is None and all(self.verdicts.values())

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> RunRecord:
        return cls(**json.loads(line))


def write_summary(records: list[RunRecord], path: Path) -> None:
    measured = sorted({k for r in records for k in r.measured})
    verdicts = sorted({k for r in records for k in r.verdicts})
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["subcommand", "seed", "config_hash", "passed", "wall_clock", *measured,
                    *(f"verdict:{v}" for v in verdicts), "error"])
        for r in records:
            w.writerow([r.subcommand, r.seed, r.config_hash, r.passed, repr(r.wall_clock),
                        *(repr(r.measured[k]) if k in r.measured else "" for k in measured),
                        *(r.verdicts.get(v, "") for v in verdicts), r.error or ""])


# ---------------------------------------------------------------- trials

@dataclass
class TrialResult:
    measured: dict[str, float]
    verdicts: dict[str, bool]
    extra: Any = None


def trial_verify_hermite(p: dict, seed: int) -> TrialResult:
    rule = half_normal_rule(p["nodes"])
    full = gauss_hermite_rule(p["nodes"])
    n = p["max_degree"]
    relu_err = max(abs(relu_coefficient(i) - quad_expectation(lambda x: np.maximum(x, 0) * normalized_hermite(i, x), rule))
                   for i in range(n + 1))
    sign_err = max(abs(sign_coefficient(i) - quad_expectation(lambda x: np.where(x >= 0, 1.0, -1.0)
                                                              * normalized_hermite(i, x), rule))
                   for i in range(n + 1))
    table = np.array([normalized_hermite(i, full.nodes) for i in range(n + 1)])
    gram = (table * full.weights) @ table.T
    ortho_err = float(np.max(np.abs(gram - np.eye(n + 1))))
    xs = np.linspace(-5.0, 5.0, 101)
    rec_err = 0.0
    for deg in range(1, 50):
        lhs = hermite_eval(deg + 1, xs)
        h, h_prev = hermite_eval(deg, xs), hermite_eval(deg - 1, xs)
        scale = np.maximum.reduce([np.abs(lhs), np.abs(xs * h), deg * np.abs(h_prev), np.ones_like(xs)])
        rec_err = max(rec_err, float(np.max(np.abs(lhs - (xs * h - deg * h_prev)) / scale)))
    energy = math.fsum(relu_coefficient(i) ** 2 for i in range(p["parseval_cutoff"] + 1))
    positive = all(correlation_term(k, m) > 0 if m % 2 == 0 else correlation_term(k, m) == 0
                   for k in (2, 6) for m in range(k, k + 13))
    return TrialResult(
        {"relu_coefficient_error": relu_err, "sign_coefficient_error": sign_err,
         "orthonormality_error": ortho_err, "recurrence_error": rec_err, "parseval_energy": energy,
         "parseval_tail": 0.5 - energy},
        {"relu_coefficients": relu_err <= p["tol"], "sign_coefficients": sign_err <= p["tol"],
         "orthonormality": ortho_err <= p["tol"], "recurrence": rec_err <= 1e-12,
         "bessel_inequality": energy <= 0.5, "series_positivity": positive})


def correlation_integrand(k: int):
    """``z -> ReLU(sum z / sqrt k) * prod sign(z)`` over batches of shape ``(n, k)``."""
    def f(z):
        return np.maximum(z.sum(axis=1), 0.0) / math.sqrt(k) * np.prod(np.where(z >= 0, 1.0, -1.0), axis=1)
    return f


def parity_losses(k: int, d: int, eta: float, m: int, seed: int) -> dict[str, float]:
    """MC losses (mean, stderr) on lifted k-parity data: ``ReLU_{w_S}`` with all
    coordinates kept, and a norm-``1/sqrt(2 pi)`` ReLU after dropping a relevant one."""
    if d < k:
        raise ValueError("need d >= k")
    inst = SlpnInstance(d, tuple(range(k)), eta)
    ds = lifted_parity_dataset(inst, m, seed)
    kept = (relu_predict(ds.X, parity_relu_weight(d, inst.S)) - ds.y) ** 2
    dropped = drop_coordinate(ds, inst.S[0])
    w = np.zeros(d - 1)
    w[[s - 1 for s in inst.S[1:]]] = OPTIMAL_NORM / math.sqrt(k - 1)
    lost = (relu_predict(dropped.X, w) - dropped.y) ** 2
    return {"kept_loss": float(kept.mean()), "kept_stderr": float(kept.std(ddof=1) / math.sqrt(m)),
            "dropped_loss": float(lost.mean()), "dropped_stderr": float(lost.std(ddof=1) / math.sqrt(m))}


def trial_verify_gap(p: dict, seed: int) -> TrialResult:
    k, eta = p["k"], p["eta"]
    series = correlation_series(k, p["n_max"])
    ip = series.inner_product
    lower = correlation_lower_bound(k) / SQRT_2PI
    mc = mc_expectation(correlation_integrand(k), k, p["mc_samples"], derive_seed(seed, "verify-gap", "mc"))
    mc_ip, mc_se = mc.mean / SQRT_2PI, mc.stderr / SQRT_2PI
    measured = {"series": ip, "series_last_term": series.last_term / SQRT_2PI, "lower_bound": lower,
                "mc": mc_ip, "mc_stderr": mc_se}
    verdicts = {"mc_vs_series": abs(mc_ip - ip) <= 3 * mc_se}
    values = [ip, mc_ip]
    if k == 2:
        quad = correlation_2d_quadrature(p["nodes"]) / SQRT_2PI
        measured["quadrature"] = quad
        verdicts["series_vs_quadrature"] = abs(ip - quad) <= p["tol"]
        verdicts["mc_vs_quadrature"] = abs(mc_ip - quad) <= 3 * mc_se
        values.append(quad)
    verdicts["above_lower_bound"] = all(v >= lower for v in values)
    losses = parity_losses(k, max(p["d"], k), eta, p["gap_samples"], derive_seed(seed, "verify-gap", "losses"))
    measured.update(losses)
    measured["predicted_kept_loss"] = random_label_loss(OPTIMAL_NORM) - (1 - 2 * eta) * ip
    measured["predicted_dropped_loss"] = random_label_loss(OPTIMAL_NORM)
    verdicts["gap_kept"] = OPT_THRESHOLD - losses["kept_loss"] >= 0.5 * (1 - 2 * eta) * ip
    verdicts["dropped_matches_closed_form"] = (
        abs(losses["dropped_loss"] - random_label_loss(OPTIMAL_NORM)) <= 3 * losses["dropped_stderr"])
    return TrialResult(measured, verdicts)


def trial_run_reduction(p: dict, seed: int) -> TrialResult:
    k = p["k"]
    inst = SlpnInstance.random(p["d"], k, p["eta"], seed)
    try:
        eps_auto, gap = auto_epsilon(k, p["eta"])
    except ValueError:
        eps_auto, gap = None, None
    eps = p["epsilon"] if p["epsilon"] is not None else eps_auto
    if eps is None:
        raise ConfigError(f"k={k} is not of the form 4l + 2; pass --epsilon explicitly")
    k_max = p["k_max"] or k
    learner = ReluLearnerSpec(kind=p["learner"], k_max=k_max)
    cfg = ReductionConfig(p["m1"], p["m2"], eps, learner, p["repetitions"], expected_gap=gap)
    raw = sample_slpn(inst, cfg.repetitions * cfg.samples_per_repetition, seed)
    report = recover_parity(raw, cfg, seed)
    errs = np.asarray(report.errors, dtype=np.float64)
    rel = [j for j in range(p["d"]) if j in inst.S]
    irr = [j for j in range(p["d"]) if j not in inst.S]
    measured = {"epsilon": eps, "threshold": report.threshold, "n_recovered": float(len(report.recovered)),
                "mean_error_relevant": float(np.nanmean(errs[:, rel])), "mean_error_irrelevant": float(np.nanmean(errs[:, irr])),
                "lift_seconds": report.timings["lift"], "learn_seconds": report.timings["learn"]}
    if gap is not None:
        measured["expected_gap"] = gap
    if p["learner"] == "subset-scan":
        measured["candidates_per_coordinate"] = float(scan_candidate_count(p["d"] - 1, k_max, len(learner.norm_grid)))
    verdicts = {"recovered_equals_truth": bool(report.correct), "no_failures": not report.failures}
    if report.distinguishable is not None:
        verdicts["distinguishable"] = report.distinguishable
    extra = {"seed": seed, **report.to_dict()}
    return TrialResult(measured, verdicts, extra)


def approx_trial(d: int, m: int, wstar_norm: float, corruption: CorruptionModel, cfg: ApproxConfig,
                 eval_samples: int, seed: int) -> dict[str, float]:
    """Fit by alpha selection and measure the population loss of the result.

    The population loss of ``ReLU_w_hat`` is ``opt`` (exact for ``w*``) plus a
    paired Monte Carlo estimate of the loss difference on fresh samples.
    """
    w_star = substream(seed, "approx-wstar").standard_normal(d)
    w_star *= wstar_norm / np.linalg.norm(w_star)
    ds, rep = make_agnostic_relu_dataset(w_star, corruption, m, seed)
    sel = select_alpha(ds, cfg, seed, diagnostic=True)
    fresh, _ = make_agnostic_relu_dataset(w_star, corruption, eval_samples, derive_seed(seed, "approx-eval"))
    diff = (relu_predict(fresh.X, sel.w) - fresh.y) ** 2 - (relu_predict(fresh.X, w_star) - fresh.y) ** 2
    achieved = rep.opt + float(diff.mean())
    angle, _ = angle_disagreement(sel.w, w_star)
    return {"opt": rep.opt, "clamp_loss": rep.clamp_loss, "excess_opt": rep.excess_opt, "alpha": sel.alpha,
            "holdout_loss": sel.loss, "achieved_loss": achieved, "achieved_stderr": float(diff.std(ddof=1) / math.sqrt(eval_samples)),
            "excess_achieved": achieved - rep.clamp_loss, "angle": angle,
            "w_star_distance": float(np.linalg.norm(sel.w - w_star)), "best_rescaling": sel.best_rescaling}


def trial_run_approx(p: dict, seed: int) -> TrialResult:
    corruption = CorruptionModel.parse(p["corruption"])
    alphas = tuple(p["alpha_grid"]) if p["alpha_grid"] else default_alpha_grid()
    cfg = ApproxConfig(alphas, HalfspaceLearnerSpec(kind=p["learner"]))
    measured = approx_trial(p["d"], p["m"], p["wstar_norm"], corruption, cfg, p["eval_samples"], seed)
    bound = p["c_bound"] * max(measured["excess_opt"], 0.0) ** (2 / 3) + p["slack"]
    measured["loss_bound"] = bound
    return TrialResult(measured, {"within_bound": measured["excess_achieved"] <= bound}, {"seed": seed, **measured})


def _sq_dataset(p: dict, seed: int) -> LabeledDataset:
    if p["dataset"] is None:
        return lifted_parity_dataset(SlpnInstance.random(p["d"], p["k"], p["eta"], seed), p["m"], seed)
    ds = load_dataset(p["dataset"])
    if ds.label_kind == "boolean":
        if ds.marginal == "boolean-cube":
            ds = gaussian_lift(ds, seed)
        ds = remap_dataset(ds)
    return ds


def trial_sq_demo(p: dict, seed: int) -> TrialResult:
    ds = _sq_dataset(p, seed)
    dist = EmpiricalDistribution(ds.X, ds.y)
    oracle = SqOracle(p["mode"], p["rule"], seed=seed, keep_log=False)
    w0 = substream(seed, "sq-w0").standard_normal(ds.d)
    w0 *= 0.1 / np.linalg.norm(w0)
    trace: list[dict] = []

    def record(step, w, queries):
        trace.append({"seed": seed, "step": step, "loss": square_loss(w, ds.X, ds.y), "queries": queries})

    gd_via_sq(w0, p["steps"], p["lr"], oracle, dist, p["tau"], callback=record)
    queries = trace[-1]["queries"]
    measured = {"initial_loss": trace[0]["loss"], "final_loss": trace[-1]["loss"],
                "min_loss": min(t["loss"] for t in trace), "queries": float(queries),
                "expected_queries": float(2 * ds.d * p["steps"])}
    verdicts = {"query_count_exact": queries == 2 * ds.d * p["steps"]}
    S = ds.meta.get("S")
    if S is not None and len(S) % 4 == 2:
        eps, gap = auto_epsilon(len(S), float(ds.meta.get("eta", 0.0)))
        measured["expected_gap"] = gap
        measured["sq_lower_bound_reference"] = sq_query_lower_bound(parity_sq_dimension(ds.d, len(S)), p["tau"])
        if p["mode"] == "adversarial" and p["tau"] >= gap:
            verdicts["stuck_near_random_label_loss"] = trace[-1]["loss"] >= OPT_THRESHOLD - eps
    return TrialResult(measured, verdicts, trace)


TRIALS = {
    "verify-hermite": trial_verify_hermite,
    "verify-gap": trial_verify_gap,
    "run-reduction": trial_run_reduction,
    "run-approx": trial_run_approx,
    "sq-demo": trial_sq_demo,
}


# ---------------------------------------------------------------- driver

def thread_cap(requested: int) -> int:
    env = os.environ.get("RELU_LAB_THREADS")
    if env:
        try:
            cap = int(env)
        except ValueError as exc:
            raise ConfigError(f"RELU_LAB_THREADS must be an integer, got {env!r}") from exc
        if cap < 1:
            raise ConfigError("RELU_LAB_THREADS must be positive")
        return max(1, min(requested, cap))
    return max(1, requested)


def _write_out(subcommand: str, path: str, results: list[TrialResult | None]) -> None:
    extras = [r.extra for r in results if r is not None and r.extra is not None]
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    if subcommand == "sq-demo":
        with open(out, "w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=["seed", "step", "loss", "queries"])
            w.writeheader()
            for trace in extras:
                w.writerows(trace)
    else:
        out.write_text(json.dumps({"trials": extras}, indent=2, default=float), encoding="utf-8")


def run(subcommand: str, common: dict, params: dict, stream=sys.stdout) -> tuple[int, list[RunRecord]]:
    """Run every seed; write records and summary; return ``(exit_status, records)``."""
    trial = TRIALS[subcommand]
    chash = config_hash(subcommand, params)
    version = version_string()
    seeds = list(common["seeds"])

    def one(seed):
        t0 = time.perf_counter()
        try:
            res = trial(params, seed)
        except ConfigError:
            raise
        except Exception as exc:  # recorded, reported with exit status 1
            log.exception("trial seed=%d failed", seed)
            return None, RunRecord(subcommand, chash, seed, wall_clock=time.perf_counter() - t0, version=version,
                                   error=f"{type(exc).__name__}: {exc}")
        rec = RunRecord(subcommand, chash, seed, {k: float(v) for k, v in res.measured.items() if v is not None},
                        {k: bool(v) for k, v in res.verdicts.items()}, time.perf_counter() - t0, version)
        return res, rec

    with ThreadPoolExecutor(max_workers=thread_cap(common["workers"])) as pool:
        outcomes = list(pool.map(one, seeds))
    results = [o[0] for o in outcomes]
    records = [o[1] for o in outcomes]

    outdir = Path(common["results_dir"])
    outdir.mkdir(parents=True, exist_ok=True)
    with open(outdir / f"{subcommand}.jsonl", "a", encoding="utf-8") as fh:
        for rec in records:
            fh.write(rec.to_json() + "\n")
    write_summary(records, outdir / f"{subcommand}-summary.csv")
    if params.get("out"):
        _write_out(subcommand, params["out"], results)

    for rec in records:
        status = "PASS" if rec.passed else "FAIL"
        failed = [k for k, v in rec.verdicts.items() if not v]
        detail = rec.error or (f"failed: {', '.join(failed)}" if failed else "all verdicts hold")
        print(f"{subcommand} seed={rec.seed} {status} ({rec.wall_clock:.2f}s) {detail}", file=stream)
    return (0 if all(r.passed for r in records) else 1), records


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    try:
        common, params = resolve(args)
        status, _ = run(args.subcommand, common, params)
    except ConfigError as exc:
        print(f"relu-lab: config error: {exc}", file=sys.stderr)
        return 2
    return status


if __name__ == "__main__":
    sys.exit(main())
