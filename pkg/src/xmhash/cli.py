"""Experiment driver: dataset synthesis, training, encoding, evaluation,
ablations, parameter sweeps, and convergence traces.

Configuration is a flat key=value text file; any key can be overridden by a
command-line flag of the same name, and flags win. Every command writes a
manifest recording the resolved config, its hash, the seed, and sha256
checksums of the artifacts it produced.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import data as dmod
from .data import Dataset, FeatureMatrix, LabelMatrix, SynthSpec, make_synthetic, split
from .hashfn import HashModel, encode, learn_hash_function, load_hash_model, save_hash_model
from .optimizer import Hyperparams, TrainResult, train_step1
from .retrieval import evaluate, pack_codes

TASKS = ("I2T", "T2I")
SWEEP_PARAMS = ("alpha", "beta", "eta", "omega", "zeta", "lam")

_BOOL_KEYS = {"multi_label", "reencode_db"}
_INT_KEYS = {"n", "c", "d1", "d2", "seed", "q", "bits", "T", "map_cutoff"}
_FLOAT_KEYS = {
    "noise", "alpha", "beta", "eta", "lam", "omega", "zeta", "tol", "ridge",
    "query_fraction",
}


@dataclass
class RunConfig:
    """Resolved experiment configuration (config file merged with flags)."""

    # synthetic inputs
    n: int | None = None
    c: int | None = None
    d1: int = 32
    d2: int = 24
    noise: float = 0.1
    multi_label: bool = False
    # file inputs
    x1: str | None = None
    x2: str | None = None
    labels: str | None = None
    # pipeline
    seed: int = 0
    q: int | None = None
    bits: int = 16
    alpha: float = 1e-2
    beta: float = 10.0
    eta: float = 1e-3
    lam: float = 1e-4
    omega: float = 1e-2
    zeta: float = 2.0
    T: int = 50
    tol: float = 1e-4
    ridge: float = 1e-6
    query_fraction: float = 0.2
    variant: str = "full"
    tasks: str = "I2T,T2I"
    map_cutoff: int | None = None
    reencode_db: bool = False

    def hyperparams(self) -> Hyperparams:
        return Hyperparams(
            k=self.bits, alpha=self.alpha, beta=self.beta, eta=self.eta,
            lam=self.lam, omega=self.omega, zeta=self.zeta, T=self.T,
            tol=self.tol, ridge=self.ridge, seed=self.seed,
        )

    def task_list(self) -> list[str]:
        tasks = [t.strip() for t in self.tasks.split(",") if t.strip()]
        for t in tasks:
            if t not in TASKS:
                raise ValueError(f"unknown task {t!r}, expected I2T or T2I")
        return tasks

    def validate_inputs(self) -> None:
        have_files = any(v is not None for v in (self.x1, self.x2, self.labels))
        have_synth = self.n is not None
        if have_files and have_synth:
            raise ValueError("config mixes file inputs with a synthetic spec")
        if have_files and not all((self.x1, self.x2, self.labels)):
            raise ValueError("file inputs require x1, x2, and labels")
        if not have_files and not have_synth:
            raise ValueError("config needs either file inputs or a synthetic spec (n, c)")

    def to_dict(self) -> dict:
        return {k: v for k, v in self.__dict__.items()}


def _coerce(key: str, value: str):
    if key in _BOOL_KEYS:
        return value.lower() in ("1", "true", "yes", "on")
    if key in _INT_KEYS:
        return int(value)
    if key in _FLOAT_KEYS:
        return float(value)
    return value


def parse_config_file(path) -> dict:
    out = {}
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}: line {lineno}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            if key not in RunConfig.__dataclass_fields__:
                raise ValueError(f"{path}: line {lineno}: unknown key {key!r}")
            out[key] = _coerce(key, value)
    return out


def build_config(args: argparse.Namespace) -> RunConfig:
    cfg_dict: dict = {}
    if getattr(args, "config", None):
        cfg_dict.update(parse_config_file(args.config))
    for key in RunConfig.__dataclass_fields__:
        val = getattr(args, key, None)
        if val is not None:
            cfg_dict[key] = val
    return RunConfig(**cfg_dict)


def config_hash(cfg: RunConfig) -> str:
    blob = json.dumps(cfg.to_dict(), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    h.update(path.read_bytes())
    return h.hexdigest()


def write_manifest(out_dir: Path, cfg: RunConfig, artifacts: list[Path], extra: dict | None = None) -> None:
    manifest = {
        "config": cfg.to_dict(),
        "config_hash": config_hash(cfg),
        "seed": cfg.seed,
        "artifacts": {p.name: _sha256(p) for p in artifacts},
    }
    if extra:
        manifest.update(extra)
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))


def load_dataset(cfg: RunConfig) -> Dataset:
    cfg.validate_inputs()
    if cfg.x1 is not None:
        return Dataset(
            modalities=[
                dmod.load_matrix(cfg.x1, modality_id=0),
                dmod.load_matrix(cfg.x2, modality_id=1),
            ],
            labels=dmod.load_labels(cfg.labels),
        )
    spec = SynthSpec(
        n=cfg.n, c=cfg.c, d1=cfg.d1, d2=cfg.d2,
        noise=cfg.noise, seed=cfg.seed, multi_label=cfg.multi_label,
    )
    return make_synthetic(spec)


def run_pipeline(cfg: RunConfig) -> tuple[TrainResult, HashModel, Dataset, Dataset]:
    """Dataset -> split -> step-one codes -> per-modality hash functions."""
    ds = load_dataset(cfg)
    db, query = split(ds, cfg.query_fraction, cfg.seed)
    h = cfg.hyperparams()
    res = train_step1(db, h, variant=cfg.variant, q=cfg.q)
    W = [learn_hash_function(res.B, phi, cfg.omega) for phi in res.phiX]
    model = HashModel(W=W, kernels=res.kernels, k=h.k)
    return res, model, db, query


def cmd_synth(args) -> int:
    cfg = build_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    spec = SynthSpec(
        n=cfg.n, c=cfg.c, d1=cfg.d1, d2=cfg.d2,
        noise=cfg.noise, seed=cfg.seed, multi_label=cfg.multi_label,
    )
    ds = make_synthetic(spec)
    paths = []
    for m, name in zip(ds.modalities, ("x1.bin", "x2.bin")):
        dmod.write_matrix(m, out / name)
        paths.append(out / name)
    dmod.write_labels(ds.labels, out / "labels.bin")
    paths.append(out / "labels.bin")
    write_manifest(out, cfg, paths)
    print(f"wrote synthetic dataset (n={ds.n}, c={ds.labels.n_classes}) to {out}")
    return 0


def cmd_train(args) -> int:
    cfg = build_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    res, model, db, query = run_pipeline(cfg)

    paths = []

    def _write(name, writer):
        p = out / name
        writer(p)
        paths.append(p)

    _write("model.bin", lambda p: save_hash_model(model, p))
    _write("db_codes.bin", lambda p: dmod.write_array(res.B, p))
    _write("db_labels.bin", lambda p: dmod.write_labels(db.labels, p))
    for fm, name in zip(db.modalities, ("db_x1.bin", "db_x2.bin")):
        _write(name, lambda p, fm=fm: dmod.write_matrix(fm, p))
    for fm, name in zip(query.modalities, ("query_x1.bin", "query_x2.bin")):
        _write(name, lambda p, fm=fm: dmod.write_matrix(fm, p))
    _write("query_labels.bin", lambda p: dmod.write_labels(query.labels, p))
    _write("trace.csv", lambda p: res.trace.write_csv(p))
    write_manifest(out, cfg, paths, extra={"iterations": len(res.trace.objective)})
    print(
        f"trained variant={cfg.variant} k={cfg.bits} on n={db.n} database instances "
        f"({len(res.trace.objective)} iterations); artifacts in {out}"
    )
    return 0


def cmd_encode(args) -> int:
    model = load_hash_model(args.model)
    X = dmod.load_matrix(args.input, modality_id=args.modality)
    codes = encode(model, args.modality, X)
    dmod.write_array(codes, args.out)
    print(f"encoded {X.n} instances of modality {args.modality} -> {args.out}")
    return 0


def _eval_reports(cfg: RunConfig, run_dir: Path, out: Path) -> list[Path]:
    model = load_hash_model(run_dir / "model.bin")
    db_labels = dmod.load_labels(run_dir / "db_labels.bin")
    query_labels = dmod.load_labels(run_dir / "query_labels.bin")
    query_x = {
        "I2T": dmod.load_matrix(run_dir / "query_x1.bin", modality_id=0),
        "T2I": dmod.load_matrix(run_dir / "query_x2.bin", modality_id=1),
    }
    paths = []
    for task in cfg.task_list():
        qmod = 0 if task == "I2T" else 1
        qcodes = pack_codes(encode(model, qmod, query_x[task]))
        if cfg.reencode_db:
            dbmod = 1 - qmod
            db_x = dmod.load_matrix(run_dir / f"db_x{dbmod + 1}.bin", modality_id=dbmod)
            db_codes = pack_codes(encode(model, dbmod, db_x))
        else:
            db_codes = pack_codes(dmod.load_array(run_dir / "db_codes.bin"))
        report = evaluate(
            qcodes, query_labels, db_codes, db_labels,
            task=task, map_cutoff=cfg.map_cutoff,
        )
        jp = out / f"report_{task}.json"
        jp.write_text(report.to_json())
        cp = out / f"report_{task}.csv"
        pn_header = ",".join(f"P@{n}" for n, _ in report.precision_at)
        cp.write_text(f"task,k,mAP,{pn_header},elapsed_ms\n{report.csv_row()}\n")
        pp = out / f"pn_curve_{task}.csv"
        with open(pp, "w") as f:
            f.write("n,precision\n")
            for n, p in report.precision_at:
                f.write(f"{n},{p:.6f}\n")
        paths += [jp, cp, pp]
        print(f"{task} k={report.k} mAP={report.map:.4f} ({report.backend} backend)")
    return paths


def cmd_eval(args) -> int:
    cfg = build_config(args)
    run_dir = Path(args.run_dir)
    out = Path(args.out) if args.out else run_dir
    out.mkdir(parents=True, exist_ok=True)
    _eval_reports(cfg, run_dir, out)
    return 0


def _pipeline_maps(cfg: RunConfig) -> dict[str, float]:
    """Train + evaluate in memory, returning mAP per task."""
    res, model, db, query = run_pipeline(cfg)
    db_codes = pack_codes(res.B)
    out = {}
    for task in cfg.task_list():
        qmod = 0 if task == "I2T" else 1
        qcodes = pack_codes(encode(model, qmod, query.modalities[qmod]))
        report = evaluate(
            qcodes, query.labels, db_codes, db.labels,
            task=task, map_cutoff=cfg.map_cutoff,
        )
        out[task] = report.map
    return out


def cmd_ablate(args) -> int:
    cfg = build_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for variant in ("full", "no_kernel", "no_multisemantic", "relaxed_B"):
        vcfg = RunConfig(**{**cfg.to_dict(), "variant": variant})
        maps = _pipeline_maps(vcfg)
        for task, m in maps.items():
            rows.append((variant, task, m))
            print(f"{variant:18s} {task} mAP={m:.4f}")
    path = out / "ablate.csv"
    with open(path, "w") as f:
        f.write(f"# seed={cfg.seed} bits={cfg.bits}\n")
        f.write("variant,task,mAP\n")
        for variant, task, m in rows:
            f.write(f"{variant},{task},{m:.6f}\n")
    write_manifest(out, cfg, [path])
    return 0


def cmd_sweep(args) -> int:
    cfg = build_config(args)
    if args.param not in SWEEP_PARAMS:
        print(f"unknown sweep parameter {args.param!r}, expected one of {SWEEP_PARAMS}", file=sys.stderr)
        return 2
    grid = [float(v) for v in args.grid.split(",")]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for value in grid:
        vcfg = RunConfig(**{**cfg.to_dict(), args.param: value})
        maps = _pipeline_maps(vcfg)
        rows.append((value, maps.get("I2T", float("nan")), maps.get("T2I", float("nan"))))
        print(f"{args.param}={value:g} " + " ".join(f"{t}={m:.4f}" for t, m in maps.items()))
    path = out / f"sweep_{args.param}.csv"
    with open(path, "w") as f:
        f.write(f"# seed={cfg.seed} bits={cfg.bits} param={args.param}\n")
        f.write(f"{args.param},mAP_I2T,mAP_T2I\n")
        for value, m1, m2 in rows:
            f.write(f"{value:g},{m1:.6f},{m2:.6f}\n")
    write_manifest(out, cfg, [path])
    return 0


def cmd_trace(args) -> int:
    cfg = build_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ds = load_dataset(cfg)
    db, _ = split(ds, cfg.query_fraction, cfg.seed)
    res = train_step1(db, cfg.hyperparams(), variant=cfg.variant, q=cfg.q)
    path = out / "trace.csv"
    res.trace.write_csv(path)
    write_manifest(out, cfg, [path], extra={"iterations": len(res.trace.objective)})
    print(f"{len(res.trace.objective)} iterations; trace in {path}")
    return 0


def _add_config_flags(p: argparse.ArgumentParser, include_variant: bool = True) -> None:
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--seed", type=int)
    p.add_argument("--bits", type=int, help="code length k")
    p.add_argument("--n", type=int)
    p.add_argument("--c", type=int)
    p.add_argument("--d1", type=int)
    p.add_argument("--d2", type=int)
    p.add_argument("--noise", type=float)
    p.add_argument("--multi-label", dest="multi_label", action="store_const", const=True)
    p.add_argument("--x1")
    p.add_argument("--x2")
    p.add_argument("--labels")
    p.add_argument("--q", type=int, help="anchor count for kernelization")
    for name in ("alpha", "beta", "eta", "lam", "omega", "zeta", "tol", "ridge"):
        p.add_argument(f"--{name}", type=float)
    p.add_argument("--T", type=int)
    p.add_argument("--query-fraction", dest="query_fraction", type=float)
    if include_variant:
        p.add_argument("--variant", choices=("full", "no_kernel", "no_multisemantic", "relaxed_B"))
    p.add_argument("--task", dest="tasks", help="comma-separated task list (I2T,T2I)")
    p.add_argument("--map-cutoff", dest="map_cutoff", type=int)
    p.add_argument("--reencode-db", dest="reencode_db", action="store_const", const=True)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="xmhash",
        description="Cross-modal hashing: train binary codes, learn hash functions, evaluate retrieval.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic bimodal dataset")
    _add_config_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="run the two-step training pipeline")
    _add_config_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("encode", help="encode a feature matrix with a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--modality", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("eval", help="evaluate retrieval from a training run directory")
    _add_config_flags(p)
    p.add_argument("--run-dir", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="compare all training variants under one seed")
    _add_config_flags(p, include_variant=False)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("sweep", help="sweep one hyperparameter over a grid")
    _add_config_flags(p)
    p.add_argument("--param", required=True)
    p.add_argument("--grid", required=True, help="comma-separated values")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("trace", help="run training and emit the convergence trace only")
    _add_config_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_trace)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
