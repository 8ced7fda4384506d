"""Instance generation, experiment orchestration and file output."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import shlex
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import generators as gen
from . import prophet, secretary
from .errors import CapacityError, DomainError, ProphetLabError
from .gaps import LEMMAS, run_suite
from .setfn import (
    MAX_ENUM,
    SetFunction,
    is_monotone,
    is_subadditive,
    is_submodular,
    setfn_from_json,
)

MAX_PROPHET_ELEMENTS = MAX_ENUM
MAX_PROPHET_DAYS = 8
MAX_SECRETARY_ITEMS = 64
MAX_SETFN_ITEMS = MAX_ENUM
CSV_COLUMNS = ("seed", "order_id", "value", "opt_value", "|W|")


class GeneratorError(ProphetLabError, RuntimeError):
    """A generator produced an instance that fails its own load-time checks."""


def parse_spec(spec) -> tuple[str, dict]:
    """Turn ``"coverage n=8 sets=5"`` (or a dict with a ``family`` key) into (family, params)."""
    if isinstance(spec, dict):
        params = dict(spec)
        return params.pop("family"), params
    tokens = shlex.split(spec)
    if not tokens:
        raise DomainError("empty generator spec")
    params = {}
    for tok in tokens[1:]:
        if "=" not in tok:
            raise DomainError(f"bad generator parameter {tok!r}; expected key=value")
        key, raw = tok.split("=", 1)
        try:
            params[key.replace("-", "_")] = json.loads(raw)
        except json.JSONDecodeError:
            params[key.replace("-", "_")] = raw
    return tokens[0], params


def _cap(name: str, value: int, cap: int) -> int:
    value = int(value)
    if value > cap:
        raise CapacityError(f"{name}={value} exceeds the desk-scale cap {cap}")
    if value < 1:
        raise DomainError(f"{name} must be positive")
    return value


SUBMODULAR_FAMILIES = ("cut-digraph", "coverage", "mixture", "budget-additive")
SUBADDITIVE_FAMILIES = ("unit-subadditive", "xos", "additive", "steps")


def generate_instance(spec, seed: int = 0):
    """Build a set function, prophet instance or secretary instance from a spec."""
    family, p = parse_spec(spec)
    rng = np.random.default_rng(seed)
    if family in SUBMODULAR_FAMILIES or family in SUBADDITIVE_FAMILIES:
        n = _cap("n", p.get("n", 6), MAX_SETFN_ITEMS)
        if family == "cut-digraph":
            f = gen.random_cut(n, rng, float(p.get("density", 0.4)))
        elif family == "coverage":
            f = gen.random_coverage(n, rng, universe=int(p.get("sets", n)))
        elif family == "mixture":
            f = gen.random_mixture(n, rng, float(p.get("density", 0.4)))
        elif family == "budget-additive":
            f = gen.random_budget_additive(n, rng)
        elif family == "unit-subadditive":
            f = gen.unit_subadditive(n)
        elif family == "xos":
            f = gen.random_xos(n, rng, int(p.get("clauses", 3)))
        elif family == "additive":
            f = gen.BudgetAdditive(n, tuple(float(w) for w in rng.uniform(0.1, 1.0, n)))
        else:
            f = gen.cardinality_steps(n, int(p.get("k", 2)))
        _verify_setfn(family, f)
        return f
    if family == "prophet":
        days = _cap("days", p.get("days", 4), MAX_PROPHET_DAYS)
        per_day = int(p.get("per_day", 2))
        if days * per_day > MAX_PROPHET_ELEMENTS:
            raise CapacityError(f"days * per_day must stay <= {MAX_PROPHET_ELEMENTS}")
        return gen.random_prophet_instance(days, per_day, rng, p.get("matroid"),
                                           p.get("objective", "mixture"), bool(p.get("point_mass", False)))
    if family == "secretary":
        n = _cap("n", p.get("n", 16), MAX_SECRETARY_ITEMS)
        return gen.random_secretary_instance(n, rng, int(p.get("sets", 8)), int(p.get("max_size", 6)),
                                             p.get("valuation"))
    raise DomainError(f"unknown generator family {family!r}")


def _verify_setfn(family: str, f: SetFunction) -> None:
    if family in SUBMODULAR_FAMILIES and not is_submodular(f):
        raise GeneratorError(f"{family} produced a non-submodular function")
    if family in ("coverage", "budget-additive") or family in SUBADDITIVE_FAMILIES:
        if not is_monotone(f) or (f.n <= 10 and not is_subadditive(f)):
            raise GeneratorError(f"{family} produced a non-monotone or non-subadditive function")


def instance_to_json(obj) -> dict:
    if isinstance(obj, prophet.ProphetInstance):
        return {"type": "prophet", **obj.to_json()}
    if isinstance(obj, secretary.SecretaryInstance):
        return {"type": "secretary", **obj.to_json()}
    return {"type": "setfn", **obj.to_json()}


def instance_from_json(doc: dict):
    kind = doc.get("type")
    if kind == "prophet" or (kind is None and "universes" in doc):
        return prophet.ProphetInstance.from_json(doc)
    if kind == "secretary" or (kind is None and "maximal_sets" in doc):
        return secretary.SecretaryInstance.from_json(doc)
    return setfn_from_json(doc)


def load_instance(path) -> object:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise OSError(f"cannot read instance file {path}: {exc}") from exc
    return instance_from_json(doc)


def trial_seed(master: int, index: int) -> int:
    """Per-trial seed derived from (master seed, trial index)."""
    return int(np.random.SeedSequence([int(master), int(index)]).generate_state(1, np.uint64)[0] >> 1)


@dataclass
class ExperimentConfig:
    mode: str
    instance: str | None = None
    generator: str | None = None
    trials: int = 1000
    seed: int = 0
    order: str | list = "identity"
    out_dir: str | None = None
    alpha_override: float | None = None
    baseline: str = "sample-greedy"
    lemmas: list = field(default_factory=lambda: list(LEMMAS))
    n: int = 8
    instances: int = 1000

    def __post_init__(self):
        if self.mode not in ("prophet", "secretary", "gaps"):
            raise DomainError(f"unknown mode {self.mode!r}")
        if self.mode != "gaps" and (self.instance is None) == (self.generator is None):
            raise DomainError("give exactly one of an instance file or a generator spec")
        if self.trials < 0:
            raise DomainError("trials must be non-negative")
        if self.baseline not in secretary.BASELINES:
            raise DomainError(f"unknown baseline {self.baseline!r}")
        if self.mode == "gaps" and self.n > 10:
            raise CapacityError("gap verification is capped at n <= 10")

    def canonical(self) -> dict:
        doc = asdict(self)
        doc.pop("out_dir")
        return doc

    @property
    def config_hash(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class RunSummary:
    values: list
    opt: float
    trials: int
    config_hash: str = ""
    csv_path: str | None = None
    json_path: str | None = None
    extra: dict = field(default_factory=dict)

    @property
    def mean_value(self) -> float:
        return float(np.mean(self.values)) if self.values else math.nan

    @property
    def ci95(self) -> float:
        if len(self.values) < 2:
            return math.nan
        return 1.96 * float(np.std(self.values, ddof=1)) / math.sqrt(len(self.values))

    @property
    def ratio(self) -> float:
        """Empirical competitive ratio E[OPT] / E[ALG]."""
        if not self.values:
            return math.nan
        mean = self.mean_value
        return self.opt / mean if mean > 0 else math.inf

    @property
    def ratio_ci95(self) -> float:
        mean = self.mean_value
        if not self.values or mean <= 0:
            return math.nan
        return self.ratio * self.ci95 / mean

    def to_json(self) -> dict:
        def clean(v):
            return None if isinstance(v, float) and not math.isfinite(v) else v

        return {
            "config_hash": self.config_hash,
            "trials": self.trials,
            "opt": clean(self.opt),
            "mean_value": clean(self.mean_value),
            "ci95": clean(self.ci95),
            "ratio": clean(self.ratio),
            "ratio_ci95": clean(self.ratio_ci95),
            **self.extra,
        }


def _order_for(policy, days: int, rng) -> list[int]:
    if policy == "identity":
        return list(range(days))
    if policy == "random":
        return [int(i) for i in rng.permutation(days)]
    if isinstance(policy, str):
        policy = [int(t) for t in policy.split(",")]
    return [int(i) for i in policy]


def _prophet_trial(args):
    sim, policy, seed = args
    rng = np.random.default_rng(seed)
    order = _order_for(policy, sim.instance.days, rng)
    run = sim.run(order, rng)
    return seed, "-".join(map(str, order)), run.value, bin(run.W).count("1")


def _secretary_trial(args):
    inst, alpha, baseline, seed = args
    run = secretary.run_subadditive_secretary(inst, seed, alpha, baseline)
    return seed, "-".join(map(str, run.order)), run.value, bin(run.W).count("1")


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("PROPHETLAB_THREADS", "1")))
    except ValueError:
        return 1


def _map(fn, jobs: list) -> list:
    workers = _workers()
    if workers == 1 or len(jobs) < 2:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs, chunksize=max(1, len(jobs) // (4 * workers))))


def _float(v: float) -> str:
    return repr(float(v))


def _write_outputs(config: ExperimentConfig, rows: list, summary: RunSummary) -> None:
    if config.out_dir is None:
        return
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{config.mode}_trials.csv"
    json_path = out / f"{config.mode}_summary.json"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("config_hash", *CSV_COLUMNS))
    for seed, order_id, val, opt, size in rows:
        writer.writerow((summary.config_hash, seed, order_id, _float(val), _float(opt), size))
    try:
        csv_path.write_text(buf.getvalue())
        summary.csv_path, summary.json_path = str(csv_path), str(json_path)
        doc = {"config": config.canonical(), **summary.to_json()}
        json_path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write experiment output under {out}: {exc}") from exc


def _load(config: ExperimentConfig):
    if config.instance is not None:
        return load_instance(config.instance)
    return generate_instance(config.generator, config.seed)


def run_experiment(config: ExperimentConfig) -> RunSummary:
    if config.mode == "gaps":
        return _run_gaps(config)
    inst = _load(config)
    seeds = [trial_seed(config.seed, t) for t in range(config.trials)]
    if config.mode == "prophet":
        if not isinstance(inst, prophet.ProphetInstance):
            raise DomainError("prophet mode needs a prophet instance")
        opt = prophet.offline_opt(inst)
        sim = prophet.ProphetSimulator(inst)
        results = _map(_prophet_trial, [(sim, config.order, s) for s in seeds])
        extra = {"feasible_scale": prophet.feasible_scale(inst)}
    else:
        if not isinstance(inst, secretary.SecretaryInstance):
            raise DomainError("secretary mode needs a secretary instance")
        opt = secretary.offline_opt(inst)[1]
        results = _map(_secretary_trial, [(inst, config.alpha_override, config.baseline, s) for s in seeds])
        extra = {}
    rows = [(s, oid, val, opt, size) for s, oid, val, size in results]
    summary = RunSummary([r[2] for r in rows], float(opt), config.trials, config.config_hash, extra=extra)
    _write_outputs(config, rows, summary)
    return summary


def _run_gaps(config: ExperimentConfig) -> RunSummary:
    verdicts = [run_suite(lemma, config.n, config.instances, config.seed) for lemma in config.lemmas]
    summary = RunSummary([], math.nan, 0, config.config_hash,
                         extra={"verdicts": [v.to_json() for v in verdicts],
                                "passed": all(v.passed for v in verdicts)})
    if config.out_dir is not None:
        out = Path(config.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        path = out / "gaps_verdicts.json"
        path.write_text(json.dumps([v.to_json() for v in verdicts], sort_keys=True, indent=2) + "\n")
        summary.json_path = str(path)
        for v in verdicts:
            if v.witness is not None:
                (out / f"witness_{v.lemma}.json").write_text(json.dumps(v.witness, sort_keys=True, indent=2) + "\n")
    return summary


def read_trials_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
