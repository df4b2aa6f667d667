"""Experiment orchestration: pretrain -> unlearn -> evaluate, sweeps and reports.

One JSON config document describes a whole experiment. Missing keys fall
back to :data:`DEFAULT_CONFIG`; every output embeds the resolved config.
"""

from __future__ import annotations

import copy
import csv
import hashlib
import io
import itertools
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .attacks import AttackConfig
from .data import (
    DataError,
    LabeledDataset,
    SplitSpec,
    SynthSpec,
    load_csv,
    select_forget,
    split_by_group,
    synth_generate,
)
from .metrics import evaluate, one_tailed_z_test
from .model import Adam, Classifier
from .unlearning import STRATEGIES, ConfigError, LossWeights, UnlearnConfig, unlearn

log = logging.getLogger(__name__)

MODEL_FORMAT = "advunlearn.model"
MODEL_VERSION = 1

DEFAULT_CONFIG = {
    "seed": 0,
    "setting": "i",
    "synth": {
        "class_count": 7,
        "n_groups": 30,
        "samples_per_group_per_class": 4,
        "feature_dim": 64,
        "separation": 3.0,
        "within_std": 0.4,
        "group_std": 0.2,
    },
    "data": None,
    "split": {"train_fraction": 1 / 3, "val_fraction": 1 / 3, "test_fraction": 1 / 3},
    "model": {"hidden": [64, 64], "activation": "tanh"},
    "pretrain": {"epochs": 20, "lr": 1e-3, "batch_size": 16},
    "unlearn": {
        "strategy": "adv_ela",
        "forget_count": 10,
        "epochs": 15,
        "batch_size": 16,
        "lr": 4e-3,
        "weights": {"mis": 0.1, "adv": 1.0, "ewc": 1.0},
        "attack": {
            "tau": 0.5,
            "sigma": None,
            "steps": 50,
            "per_sample": 20,
            "clip_every_step": True,
            "ascent": False,
        },
    },
    "sweep": {
        "taus": [0.1, 0.3, 0.5, 0.7],
        "forget_counts": [10, 30, 50, 100],
        "strategies": ["remain_involved", "random_label", "adv", "adv_ela"],
        "seeds": [0, 1, 2, 3, 4],
        "workers": 1,
    },
}

SEED_NAMES = ("data", "split", "init", "shuffle", "forget", "unlearn", "attack")

RESULT_COLUMNS = [
    "strategy", "tau", "N", "seed", "uar_forget", "uar_eval", "uar_eval_pre", "n_forget", "n_eval",
]


# -- config -----------------------------------------------------------------

def _merge(base, override):
    out = copy.deepcopy(base)
    for key, val in (override or {}).items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def resolve_config(raw: dict | None = None, *, seed=None, setting=None) -> dict:
    cfg = _merge(DEFAULT_CONFIG, raw or {})
    if seed is not None:
        cfg["seed"] = int(seed)
    if setting is not None:
        cfg["setting"] = setting
    if cfg["setting"] not in ("i", "ii"):
        raise ConfigError(f"setting must be 'i' or 'ii', got {cfg['setting']!r}")
    return cfg


def load_config(path, **overrides) -> dict:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    return resolve_config(raw, **overrides)


def derive_seeds(master: int) -> dict[str, int]:
    """Fan a master seed out to named, independent sub-seeds."""
    out = {}
    for name in SEED_NAMES:
        tag = int.from_bytes(hashlib.sha256(name.encode()).digest()[:4], "little")
        out[name] = int(np.random.SeedSequence([int(master), tag]).generate_state(1)[0])
    return out


def unlearn_config(cfg: dict, seeds: dict, **overrides) -> UnlearnConfig:
    u = _merge(cfg["unlearn"], overrides)
    attack = AttackConfig(seed=seeds["attack"], **u.pop("attack"))
    weights = LossWeights(**u.pop("weights"))
    return UnlearnConfig(weights=weights, attack=attack, seed=seeds["unlearn"], **u)


# -- data and models --------------------------------------------------------

def load_splits(cfg: dict, seeds: dict):
    """(train, eval, eval_name) for the configured setting."""
    if cfg.get("data"):
        d = cfg["data"]
        ds = load_csv(d["csv"], d.get("class_count", 7))
    else:
        ds = synth_generate(SynthSpec(seed=seeds["data"], **cfg["synth"]))
    train, val, test = split_by_group(ds, SplitSpec(seed=seeds["split"], **cfg["split"]))
    if cfg["setting"] == "i":
        return train, val, "val"
    return train.concat(val), test, "test"


def train_classifier(model: Classifier, ds: LabeledDataset, epochs: int, lr: float,
                     batch_size: int, seed) -> Classifier:
    """Mini-batch Adam on mean cross-entropy, reshuffled every epoch."""
    rng = np.random.default_rng(seed)
    opt = Adam(lr=lr)
    for _ in range(epochs):
        order = rng.permutation(len(ds))
        for start in range(0, len(order), batch_size):
            idx = order[start:start + batch_size]
            opt.step(model, model.grad_params(ds.X[idx], ds.y[idx]))
    return model


def pretrain(cfg: dict):
    """Train the classifier for ``cfg``; returns (model, train, eval_ds, eval_name)."""
    seeds = derive_seeds(cfg["seed"])
    train, eval_ds, eval_name = load_splits(cfg, seeds)
    m = cfg["model"]
    model = Classifier.initialize(
        train.feature_dim, hidden=tuple(m["hidden"]), class_count=train.class_count,
        activation=m["activation"], rng=seeds["init"],
    )
    p = cfg["pretrain"]
    train_classifier(model, train, p["epochs"], p["lr"], p["batch_size"], seeds["shuffle"])
    return model, train, eval_ds, eval_name


def model_to_dict(model: Classifier, cfg: dict | None = None) -> dict:
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "layer_sizes": model.layer_sizes,
        "activation": model.activation,
        "params": model.get_params().tolist(),
        "seeds": derive_seeds(cfg["seed"]) if cfg else None,
        "config": cfg,
    }


def model_from_dict(doc: dict) -> Classifier:
    if doc.get("format") != MODEL_FORMAT:
        raise ConfigError("not a model artifact")
    if doc.get("version") != MODEL_VERSION:
        raise ConfigError(f"unsupported model artifact version {doc.get('version')}")
    sizes = doc["layer_sizes"]
    model = Classifier.zeros(sizes[0], tuple(sizes[1:-1]), sizes[-1], doc["activation"])
    model.set_params(np.array(doc["params"], dtype=float))
    return model


def save_model(model: Classifier, path, cfg: dict | None = None) -> str:
    """Write a model artifact; returns its sha256."""
    text = json.dumps(model_to_dict(model, cfg), indent=1)
    Path(path).write_text(text)
    return hashlib.sha256(text.encode()).hexdigest()


def load_model(path):
    """Returns ``(model, config_or_None)``."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot load model artifact {path}: {exc}") from exc
    return model_from_dict(doc), doc.get("config")


def file_sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_json(path, doc):
    Path(path).write_text(json.dumps(doc, indent=1, default=_json_default))


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialise {type(o).__name__}")


# -- commands ---------------------------------------------------------------

def cmd_pretrain(cfg: dict, out_dir) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    model, train, eval_ds, eval_name = pretrain(cfg)
    checksum = save_model(model, out / "model.json", cfg)
    doc = {
        "config": cfg,
        "model_sha256": checksum,
        "n_train": len(train),
        "eval": evaluate(model, eval_ds, eval_name).to_dict(),
    }
    _write_json(out / "pretrain_report.json", doc)
    log.info("pretrained: %s UAR %.3f", eval_name, doc["eval"]["uar"])
    return doc


def run_unlearning(model: Classifier, cfg: dict, train: LabeledDataset, eval_ds: LabeledDataset,
                   eval_name: str = "eval", **overrides):
    """Forget ``N`` training samples with one strategy and evaluate.

    The forget set is evaluated against its true labels, so successful
    forgetting shows up as a low UAR.
    """
    seeds = derive_seeds(cfg["seed"])
    ucfg = unlearn_config(cfg, seeds, **overrides)
    forget, remain = select_forget(train, ucfg.forget_count, seeds["forget"])
    new, report = unlearn(model, forget, ucfg, remain if ucfg.strategy == "remain_involved" else None)
    evals = {
        "forget": evaluate(new, forget, "forget").to_dict(),
        eval_name: evaluate(new, eval_ds, eval_name).to_dict(),
        "forget_pre": evaluate(model, forget, "forget").to_dict(),
        f"{eval_name}_pre": evaluate(model, eval_ds, eval_name).to_dict(),
    }
    return new, report, evals


def cmd_unlearn(cfg: dict, model_path, out_dir) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    model, _ = load_model(model_path)
    seeds = derive_seeds(cfg["seed"])
    train, eval_ds, eval_name = load_splits(cfg, seeds)
    if train.feature_dim != model.input_dim or train.class_count != model.class_count:
        raise ConfigError("model artifact does not match the configured data")
    new, report, evals = run_unlearning(model, cfg, train, eval_ds, eval_name)
    checksum = save_model(new, out / "unlearned_model.json", cfg)
    doc = {
        "config": cfg,
        "seeds": seeds,
        "source_model_sha256": file_sha256(model_path),
        "model_sha256": checksum,
        "report": report.to_dict(),
        "eval": evals,
    }
    _write_json(out / "unlearn_report.json", doc)
    return doc


def _sweep_grid(cfg):
    sw = cfg["sweep"]
    taus, ns, strategies, seeds = sw["taus"], sw["forget_counts"], sw["strategies"], sw["seeds"]
    if not (taus and ns and strategies and seeds):
        raise ConfigError("sweep grid is empty")
    bad = [s for s in strategies if s not in STRATEGIES]
    if bad:
        raise ConfigError(f"unknown strategies in sweep: {bad}")
    return taus, ns, strategies, seeds


def _sweep_seed(args):
    """All runs for one master seed; the pretrained model is shared."""
    cfg, taus, ns, strategies = args
    model, train, eval_ds, eval_name = pretrain(cfg)
    pre = evaluate(model, eval_ds, eval_name).uar
    rows, runs = [], {}
    for n in ns:
        for strategy in strategies:
            # tau only matters for the adversarial strategies
            for tau in taus if strategy.startswith("adv") else [None]:
                over = {"strategy": strategy, "forget_count": n}
                if tau is not None:
                    over["attack"] = {"tau": tau}
                _, report, evals = run_unlearning(model, cfg, train, eval_ds, eval_name, **over)
                runs[(strategy, tau, n)] = (report, evals)
            for tau in taus:
                report, evals = runs[(strategy, tau if strategy.startswith("adv") else None, n)]
                rows.append({
                    "strategy": strategy, "tau": tau, "N": n, "seed": cfg["seed"],
                    "uar_forget": evals["forget"]["uar"], "uar_eval": evals[eval_name]["uar"],
                    "uar_eval_pre": pre, "n_forget": evals["forget"]["n_samples"],
                    "n_eval": evals[eval_name]["n_samples"],
                    "_run": {"report": report.to_dict(), "eval": evals},
                })
    return rows


def run_sweep(cfg: dict, workers: int | None = None) -> list[dict]:
    taus, ns, strategies, seeds = _sweep_grid(cfg)
    tasks = [(resolve_config(cfg, seed=s), taus, ns, strategies) for s in seeds]
    workers = workers or cfg["sweep"].get("workers", 1)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            per_seed = list(pool.map(_sweep_seed, tasks))
    else:
        per_seed = [_sweep_seed(t) for t in tasks]
    rows = {(r["strategy"], r["tau"], r["N"], r["seed"]): r for chunk in per_seed for r in chunk}
    ordered = []
    for strategy, tau, n, seed in itertools.product(strategies, taus, ns, seeds):
        key = (strategy, tau, n, seed)
        if key not in rows:
            raise RuntimeError(f"sweep produced no result for {key}")
        ordered.append(rows[key])
    return ordered


def select_best(rows: list[dict]) -> list[dict]:
    """Per (strategy, N): the tau with the highest seed-averaged eval UAR.

    Ties go to the smallest tau.
    """
    groups: dict = {}
    for r in rows:
        groups.setdefault((r["strategy"], int(r["N"])), {}).setdefault(float(r["tau"]), []).append(r)
    best = []
    for (strategy, n), by_tau in groups.items():
        stats = {
            tau: (np.mean([float(r["uar_eval"]) for r in rs]), rs) for tau, rs in by_tau.items()
        }
        tau = min(stats, key=lambda t: (-stats[t][0], t))
        rs = stats[tau][1]
        best.append({
            "strategy": strategy, "N": n, "tau": tau, "n_seeds": len(rs),
            "uar_forget": float(np.mean([float(r["uar_forget"]) for r in rs])),
            "uar_eval": float(stats[tau][0]),
            "uar_eval_pre": float(np.mean([float(r["uar_eval_pre"]) for r in rs])),
            "n_eval_total": int(sum(int(r["n_eval"]) for r in rs)),
        })
    return best


def write_results_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=RESULT_COLUMNS, extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: repr(r[k]) if isinstance(r[k], float) else r[k] for k in RESULT_COLUMNS})


def read_results_csv(path) -> list[dict]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise DataError(f"cannot read results {path}: {exc}") from exc
    reader = csv.DictReader(io.StringIO(text))
    missing = [c for c in RESULT_COLUMNS if c not in (reader.fieldnames or [])]
    if missing:
        raise DataError(f"{path}: missing columns {missing}")
    rows = []
    for line_no, r in enumerate(reader, start=2):
        try:
            rows.append({
                "strategy": r["strategy"], "tau": float(r["tau"]), "N": int(r["N"]),
                "seed": int(r["seed"]), "uar_forget": float(r["uar_forget"]),
                "uar_eval": float(r["uar_eval"]), "uar_eval_pre": float(r["uar_eval_pre"]),
                "n_forget": int(r["n_forget"]), "n_eval": int(r["n_eval"]),
            })
        except (TypeError, ValueError) as exc:
            raise DataError(f"{path}: row {line_no}: {exc}") from exc
    if not rows:
        raise DataError(f"{path}: no result rows")
    return rows


def cmd_sweep(cfg: dict, out_dir, workers: int | None = None) -> list[dict]:
    out = Path(out_dir)
    (out / "runs").mkdir(parents=True, exist_ok=True)
    rows = run_sweep(cfg, workers)
    for r in rows:
        name = f"{r['strategy']}_tau{r['tau']}_N{r['N']}_seed{r['seed']}.json"
        _write_json(out / "runs" / name, {"config": cfg, **{k: r[k] for k in RESULT_COLUMNS}, **r["_run"]})
    write_results_csv(rows, out / "results.csv")
    best = select_best(rows)
    with open(out / "best.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(best[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(best)
    _write_json(out / "sweep.json", {"config": cfg, "best": best})
    return rows


# -- report -----------------------------------------------------------------

METHOD_LABELS = {
    "remain_involved": "Remain. Unl.",
    "random_label": "Ran. Lab.",
    "adv": "Adv.",
    "adv_ela": "Adv. Ela.",
}
PROPOSED = ("adv", "adv_ela")


def render_report(rows: list[dict], alpha: float = 1e-3) -> str:
    """Methods x N table of (forget UAR, eval UAR) at each method's best tau.

    A ``*`` marks the better proposed method's eval UAR wherever it beats
    random relabelling with one-tailed z-test p < ``alpha``.
    """
    best = {(b["strategy"], b["N"]): b for b in select_best(rows)}
    ns = sorted({n for _, n in best})
    methods = [s for s in METHOD_LABELS if any((s, n) in best for n in ns)]
    stars = set()
    for n in ns:
        cands = [best[(s, n)] for s in PROPOSED if (s, n) in best]
        base = best.get(("random_label", n))
        if not cands or base is None:
            continue
        top = max(cands, key=lambda b: b["uar_eval"])
        test = one_tailed_z_test(top["uar_eval"], base["uar_eval"], top["n_eval_total"], base["n_eval_total"])
        if not test.degenerate and test.p_value < alpha:
            stars.add((top["strategy"], n))

    width = 14
    header = "Method".ljust(width) + "".join(f"| N={n}".ljust(17) for n in ns)
    sub = " " * width + "".join("| D_e    Eval    " for _ in ns)
    lines = [header, sub, "-" * len(sub)]
    pre = {n: np.mean([b["uar_eval_pre"] for (s, m), b in best.items() if m == n]) for n in ns}
    lines.append("Fine-tune".ljust(width) + "".join(f"| --     {pre[n]:.3f}   " for n in ns))
    for s in methods:
        cells = []
        for n in ns:
            b = best.get((s, n))
            if b is None:
                cells.append("| " + "".ljust(15))
                continue
            mark = "*" if (s, n) in stars else " "
            cells.append(f"| {b['uar_forget']:.3f}  {b['uar_eval']:.3f}{mark}  ")
        lines.append(METHOD_LABELS[s].ljust(width) + "".join(cells))
    lines.append("")
    lines.append(f"*: p < {alpha:g}, one-tailed pooled z-test vs Ran. Lab. (n = evaluated samples summed over seeds)")
    return "\n".join(line.rstrip() for line in lines) + "\n"


def cmd_report(results_path, out_path=None) -> str:
    text = render_report(read_results_csv(results_path))
    if out_path:
        Path(out_path).write_text(text)
    return text
