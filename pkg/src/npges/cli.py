"""Command-line entry point: ``npges simulate|learn|eval|epsilon``.

Every command reads a JSON config (``--config``); flags override the
matching config keys.  Relative paths are taken from the working
directory.

Exit codes: 0 success, 2 bad input, 3 degenerate data, 4 solver failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from npges.bayes import (
    ConvergenceError,
    DegenerateDataError,
    EvidenceCache,
    LeCamConfig,
    ModelPriorConfig,
    OddsTest,
    log_model_prior,
    make_backend,
    solve_epsilon,
)
from npges.graphs import Cpdag, Dag, GraphError, cpdag_of, format_dag, parse_dag
from npges.oracle import DsepOracle, PopulationTest
from npges.search import ges
from npges.simkit.data import DataError, read_csv, write_csv
from npges.simkit.metrics import mec_equal, shd_cpdag
from npges.simkit.sem import (
    AdditiveNonlinear,
    SemError,
    SemSpec,
    random_dag,
    random_linear_sem,
    sample,
    save_sem,
)

EXIT_OK, EXIT_INPUT, EXIT_DEGENERATE, EXIT_CONVERGENCE = 0, 2, 3, 4

# substream labels for the root seed
_SAMPLE, _BACKEND, _RANDOM_SEM = 0, 1, 2


class InputError(Exception):
    """Bad config, flags or input files."""


def _subseed(root: int, label: int) -> int:
    return int(np.random.SeedSequence(root, spawn_key=(label,)).generate_state(1, np.uint64)[0])


def _load_config(args) -> dict:
    cfg: dict = {}
    if args.config:
        try:
            cfg = json.loads(Path(args.config).read_text())
        except FileNotFoundError:
            raise InputError(f"config file not found: {args.config}") from None
        except json.JSONDecodeError as exc:
            raise InputError(f"{args.config}: invalid JSON ({exc})") from None
        if not isinstance(cfg, dict):
            raise InputError(f"{args.config}: top level must be an object")
    cfg.setdefault("bayes", {})
    for flag, key in (("seed", "seed"), ("out", "out"), ("test", "test")):
        if getattr(args, flag) is not None:
            cfg[key] = getattr(args, flag)
    if args.backend is not None:
        cfg["bayes"]["backend"] = args.backend
    if args.lam is not None:
        cfg["bayes"]["lambda"] = args.lam
    seed = cfg.get("seed", 0)
    if not isinstance(seed, int) or not 0 <= seed < 2 ** 64:
        raise InputError(f"seed must be an unsigned 64-bit integer, got {seed!r}")
    cfg["seed"] = seed
    return cfg


def _out_dir(cfg: dict) -> Path:
    out = Path(cfg.get("out", "."))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _read_text(path: str, what: str) -> str:
    try:
        return Path(path).read_text()
    except FileNotFoundError:
        raise InputError(f"{what} not found: {path}") from None


def _dag_from(value: str) -> Dag:
    """Inline DAG notation, or a path to a file holding it."""
    text = value if value.lstrip().startswith("[") else _read_text(value, "DAG file")
    return parse_dag(text.strip())


def _sem_from(cfg: dict) -> SemSpec:
    sem = cfg.get("sem")
    if sem is None:
        raise InputError("config needs a 'sem' entry (path, inline spec, or {'random': ...})")
    if isinstance(sem, str):
        try:
            sem = json.loads(_read_text(sem, "SEM spec"))
        except json.JSONDecodeError as exc:
            raise InputError(f"SEM spec: invalid JSON ({exc})") from None
    if "random" not in sem:
        return SemSpec.from_json(sem)
    r = sem["random"]
    seed = _subseed(cfg["seed"], _RANDOM_SEM)
    dag = random_dag(int(r["d"]), float(r.get("edge_prob", 0.5)), seed)
    kind = r.get("mechanism", "linear_gaussian")
    coef_range = tuple(r.get("coef_range", (0.5, 1.5)))
    noise_var = float(r.get("noise_var", 1.0))
    if kind == "linear_gaussian":
        return random_linear_sem(dag, seed, coef_range, noise_var)
    if kind == "additive_nonlinear":
        lin = random_linear_sem(dag, seed, coef_range, noise_var)
        mechs = tuple(AdditiveNonlinear(r.get("func", "tanh"), dict(m.coefficients), noise_var)
                      for m in lin.mechanisms)
        return SemSpec(dag, mechs)
    raise InputError(f"random SEMs support linear_gaussian or additive_nonlinear, not {kind!r}")


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, ensure_ascii=False) + "\n")


def cmd_simulate(cfg: dict) -> int:
    spec = _sem_from(cfg)
    n = cfg.get("n")
    if not isinstance(n, int) or n < 1:
        raise InputError(f"'n' must be a positive integer, got {n!r}")
    data = sample(spec, n, _subseed(cfg["seed"], _SAMPLE))
    out = _out_dir(cfg)
    write_csv(data, out / "data.csv")
    (out / "truth_dag.txt").write_text(format_dag(spec.dag) + "\n")
    (out / "truth_cpdag.json").write_text(cpdag_of(spec.dag).dumps() + "\n")
    save_sem(spec, out / "sem.json")
    print(f"wrote {n} x {spec.d} sample and truth files to {out}")
    return EXIT_OK


def _odds_test(cfg: dict, d: int, n: int) -> OddsTest:
    b = dict(cfg["bayes"])
    name = b.pop("backend", "conjugate")
    lam = b.pop("lambda", 1.0)
    prior = ModelPriorConfig(gamma_G=b.pop("gamma_G", 1.0), Gamma=b.pop("Gamma", 1.0),
                             form=b.pop("prior_form", "nodewise"))
    lecam = LeCamConfig(n=n, d=d, gamma=b.pop("gamma", 1.0))
    b.pop("cache", None)
    if name == "dpm":
        b.setdefault("seed", _subseed(cfg["seed"], _BACKEND) % 2 ** 32)
    try:
        backend = make_backend(name, **b)
    except TypeError as exc:
        raise InputError(f"backend {name!r}: {exc}") from None
    return OddsTest(backend, prior, lecam, lam)


def cmd_learn(cfg: dict) -> int:
    out = _out_dir(cfg)
    test_kind = cfg.get("test", "odds")
    best = bool(cfg.get("search", {}).get("best_improvement", False))
    cache = None
    if test_kind == "oracle":
        truth = _dag_from(cfg.get("truth_dag", str(out / "truth_dag.txt")))
        test = PopulationTest(DsepOracle(truth))
        if best:
            raise InputError("best-improvement search needs the odds test")
    elif test_kind == "odds":
        data_path = cfg.get("data", str(out / "data.csv"))
        if not Path(data_path).exists():
            raise InputError(f"data file not found: {data_path}")
        data = read_csv(data_path)
        odds = _odds_test(cfg, data.d, data.n)
        cache = EvidenceCache(odds.backend, data)
        cache_path = cfg["bayes"].get("cache")
        if cache_path and Path(cache_path).exists():
            cache.load_jsonl(cache_path)
        test = odds.bind(data, cache)
    else:
        raise InputError(f"unknown test {test_kind!r}; use 'oracle' or 'odds'")
    cpdag, trace = ges(test, best_improvement=best)
    (out / "learned_cpdag.json").write_text(cpdag.dumps() + "\n")
    (out / "trace.jsonl").write_text(trace.to_jsonl())
    if cache is not None and cfg["bayes"].get("cache"):
        cache.dump_jsonl(cfg["bayes"]["cache"])
    print(f"learned {cpdag!r} in {trace.r} moves")
    return EXIT_OK


def _read_cpdag(path: str) -> Cpdag:
    try:
        return Cpdag.from_json(json.loads(_read_text(path, "CPDAG file")))
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from None


def cmd_eval(cfg: dict) -> int:
    out = _out_dir(cfg)
    learned = _read_cpdag(cfg.get("learned", str(out / "learned_cpdag.json")))
    truth = _read_cpdag(cfg.get("truth", str(out / "truth_cpdag.json")))
    if learned.d != truth.d:
        raise InputError(f"vertex counts differ: learned {learned.d}, truth {truth.d}")
    report = {"shd": shd_cpdag(learned, truth), "mec_equal": mec_equal(learned, truth)}
    _write_json(out / "report.json", report)
    print(json.dumps(report))
    return EXIT_OK


def cmd_epsilon(cfg: dict) -> int:
    if "dag" not in cfg:
        raise InputError("config needs 'dag' (inline notation or file path)")
    dag = _dag_from(cfg["dag"])
    grid = cfg.get("n_grid", [10 ** k for k in range(2, 7)])
    b = cfg["bayes"]
    prior = ModelPriorConfig(gamma_G=b.get("gamma_G", 1.0), Gamma=b.get("Gamma", 1.0),
                             form=b.get("prior_form", "nodewise"))
    for n in grid:
        if not isinstance(n, int) or n < 1:
            raise InputError(f"n_grid entries must be positive integers, got {n!r}")
        lc = LeCamConfig(n=n, d=dag.d, gamma=b.get("gamma", 1.0))
        eps = solve_epsilon(lc, dag.sparsity)
        print(json.dumps({"n": n, "epsilon": eps, "n_eps2": n * eps * eps,
                          "log_prior": log_model_prior(dag, prior, lc)}))
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "learn": cmd_learn, "eval": cmd_eval, "epsilon": cmd_epsilon}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="npges", description="Structure learning by greedy equivalence search.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="JSON run config")
    p.add_argument("--seed", type=int, help="root seed (unsigned 64-bit)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--test", choices=["oracle", "odds"])
    p.add_argument("--backend", choices=["conjugate", "bic", "dpm"])
    p.add_argument("--lambda", dest="lam", type=float, help="posterior-odds threshold")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load_config(args)
        return COMMANDS[args.command](cfg)
    except DegenerateDataError as exc:
        print(f"error: degenerate data: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except (InputError, DataError, GraphError, SemError, KeyError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
