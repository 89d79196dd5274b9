"""``onionkit`` command line: simulate, fit/apply ONION, train, evaluate, run experiments.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
Every run writes a ``manifest.json`` (or ``<output>.manifest.json``) holding
the argv, the resolved configuration and SHA-256 hashes of inputs and
outputs; :func:`replay_manifest` re-executes one.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from dataclasses import asdict
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .data_core import (Dataset, apply_preprocessor, fit_preprocessor, read_covariates,
                        read_matrix, write_dataset, write_matrix)
from .errors import ConfigError, OnionKitError
from .evaluation import auc, expand_sweep, run_experiment, set_path
from .models import (TrainConfig, dann_fit, load_model, logreg_fit, mlp_fit, predict_proba,
                     save_model)
from .onion import load_basis, onion_fit, onion_transform, save_basis
from .simulate import SimConfig, simulate_confounded

log = logging.getLogger("onionkit")

OUTPUT_ENV = "ONIONKIT_OUTPUT_DIR"
BUNDLED = ("figure1", "table1_style", "gc_style")


class UsageError(Exception):
    """Bad flags, missing inputs or an invalid config (exit code 2)."""


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _existing(path, what="file") -> Path:
    p = Path(path)
    if not p.exists():
        raise UsageError(f"{what} not found: {p}")
    return p


def write_manifest(path, argv, config, inputs=(), outputs=()) -> Path:
    path = Path(path)
    doc = {
        "onionkit_version": __version__,
        "argv": list(argv),
        "config": config,
        "inputs": {str(p): sha256(p) for p in inputs},
        "outputs": {str(p): sha256(p) for p in outputs},
    }
    path.write_text(json.dumps(doc, indent=1, sort_keys=True, default=str) + "\n")
    return path


def replay_manifest(path) -> int:
    """Re-run the command recorded in a manifest."""
    doc = json.loads(Path(path).read_text())
    return main(doc["argv"])


def _out_dir(args) -> Path:
    out = args.out_dir or os.environ.get(OUTPUT_ENV) or "."
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_simulate(args, argv) -> int:
    if args.n < 1:
        raise UsageError("--n must be >= 1")
    try:
        cfg = SimConfig(d=args.d, p=args.p, sigma=args.sigma, k=2,
                        concentration=args.concentration, n=args.n, seed=args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if not 0 < args.test_fraction < 1:
        raise UsageError("--test-fraction must be in (0, 1)")
    out = _out_dir(args)
    world, train, test = simulate_confounded(cfg, args.test_fraction,
                                             strict_balance=args.strict_balance)
    outputs = [*write_dataset(out / "train", train), *write_dataset(out / "test", test)]
    config = {"sim": cfg.to_dict(), "test_fraction": args.test_fraction,
              "strict_balance": args.strict_balance, "alpha": world.alpha.tolist(),
              "n_train": train.n, "n_test": test.n}
    write_manifest(out / "manifest.json", argv, config, outputs=outputs)
    print(f"wrote {train.n} training and {test.n} test samples to {out}")
    return 0


def _load_xy(matrix, covariates):
    X, names = read_matrix(_existing(matrix, "matrix file"))
    cov = read_covariates(_existing(covariates, "covariate file"))
    return Dataset(X, cov, names)


def cmd_onion_fit(args, argv) -> int:
    data = _load_xy(args.matrix, args.covariates)
    names = args.confounders or data.covariates.names
    try:
        confs = [data.covariates.column(n) for n in names]
    except KeyError as exc:
        raise UsageError(str(exc)) from None
    if not confs:
        raise UsageError("covariate file lists no confounders")
    Xc = data.X - data.X.mean(axis=0)
    basis, report = onion_fit(Xc, confs, tol=args.tol, max_iter=args.max_iter, seed=args.seed,
                              on_degenerate="skip" if args.skip_degenerate else "raise")
    out = Path(args.out)
    save_basis(out, basis, report)
    config = {"confounders": names, "tol": args.tol, "max_iter": args.max_iter, "seed": args.seed}
    write_manifest(out.with_suffix(".manifest.json"), argv, config,
                   inputs=[args.matrix, args.covariates], outputs=[out])
    print(f"basis with m={basis.m} written to {out}; captured covariance "
          + ", ".join(f"{v:.6g}" for v in report.captured_covariance))
    return 0


def cmd_onion_transform(args, argv) -> int:
    X, names = read_matrix(_existing(args.matrix, "matrix file"))
    basis, _ = load_basis(_existing(args.basis, "basis file"))
    if basis.p != X.shape[1]:
        raise UsageError(f"basis has p={basis.p} but {args.matrix} has {X.shape[1]} columns")
    Xn = onion_transform(X, basis)
    if args.verify:
        resid = np.abs(Xn @ basis.W).max() if basis.m else 0.0
        if resid > 1e-8 * max(1.0, np.abs(X).max()):
            print(f"verify failed: max |X_n W| = {resid:.3g}", file=sys.stderr)
            return 1
        print(f"verify ok: max |X_n W| = {resid:.3g}")
    out = Path(args.out)
    write_matrix(out, Xn, names)
    write_manifest(out.with_suffix(".manifest.json"), argv, {"verify": args.verify},
                   inputs=[args.matrix, args.basis], outputs=[out])
    return 0


def _train_config(args) -> TrainConfig:
    d = {}
    if args.config:
        d = json.loads(_existing(args.config, "train config").read_text())
    d["seed"] = args.seed
    try:
        return TrainConfig.from_dict(d)
    except (ConfigError, TypeError) as exc:
        raise UsageError(f"train config: {exc}") from None


def cmd_train(args, argv) -> int:
    data = _load_xy(args.matrix, args.covariates)
    tc = _train_config(args)
    state = fit_preprocessor(data.X, clip=False) if args.standardize else None
    X = apply_preprocessor(state, data.X) if state is not None else data.X
    basis = None
    if args.onion:
        basis, _ = onion_fit(X - X.mean(axis=0), data.covariates.confounders, seed=args.seed,
                             on_degenerate="skip")
        X = onion_transform(X, basis)
    history = None
    if args.method == "logreg":
        params, history = logreg_fit(X, data.y, tc, return_history=True)
    elif args.method == "mlp":
        params, history = mlp_fit(X, data.y, tc, return_history=True)
    else:
        params, history = dann_fit(X, data.y, data.covariates.confounders, tc,
                                   kinds=data.covariates.kinds)
    extra = {"method": args.method}
    if state is not None:
        extra["preprocessor"] = state.to_dict()
    if basis is not None:
        extra["onion_basis"] = basis.W.T.tolist()
    out = Path(args.out)
    save_model(out, params, tc, history, extra)
    outputs = [out] + ([out.with_suffix(".loss.csv")] if history else [])
    write_manifest(out.with_suffix(".manifest.json"), argv, asdict(tc),
                   inputs=[args.matrix, args.covariates], outputs=outputs)
    print(f"{args.method} model written to {out}")
    return 0


def _apply_saved_transforms(model_path, X):
    doc = json.loads(Path(model_path).read_text())
    pre = doc.get("preprocessor")
    if pre:
        from .data_core import PreprocessorState

        state = PreprocessorState(np.array(pre["mean"]), np.array(pre["sd"]),
                                  np.array(pre["clip_threshold"], dtype=float),
                                  np.array(pre["zero_sd"], dtype=bool), pre["depth_constant"],
                                  pre["clip"])
        X = apply_preprocessor(state, X)
    if doc.get("onion_basis"):
        X = onion_transform(X, np.array(doc["onion_basis"]).T)
    return X


def cmd_evaluate(args, argv) -> int:
    data = _load_xy(args.matrix, args.covariates)
    params, _ = load_model(_existing(args.model, "model file"))
    X = _apply_saved_transforms(args.model, data.X)
    if X.shape[1] != params.input_dim:
        raise UsageError(f"model expects {params.input_dim} features, data has {X.shape[1]}")
    prob = predict_proba(params, X)
    value = auc(prob, data.y)
    print(f"AUC {value:.6f} on {data.n} samples")
    if args.out:
        out = Path(args.out)
        out.write_text(json.dumps({"auc": value, "n": data.n}, indent=1) + "\n")
        write_manifest(out.with_suffix(".manifest.json"), argv, {},
                       inputs=[args.model, args.matrix, args.covariates], outputs=[out])
    return 0


def load_experiment_config(source: str) -> dict:
    """Load a config by path or by bundled name (``figure1``, ``table1_style``, ``gc_style``)."""
    name = source[:-5] if source.endswith(".json") else source
    if not Path(source).exists() and name in BUNDLED:
        text = resources.files("onionkit.configs").joinpath(f"{name}.json").read_text()
        return json.loads(text)
    path = _existing(source, "experiment config")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON ({exc})") from None


def validate_experiment_config(cfg: dict) -> list:
    """Schema violations as ``"<json path>: <message>"`` strings."""
    import jsonschema

    schema = json.loads(resources.files("onionkit.configs")
                        .joinpath("experiment.schema.json").read_text())
    validator = jsonschema.Draft7Validator(schema)
    return [f"{e.json_path}: {e.message}"
            for e in sorted(validator.iter_errors(cfg), key=lambda e: list(e.path))]


def _parse_override(text: str):
    if "=" not in text:
        raise UsageError(f"--override expects key.path=value, got {text!r}")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key, value


def cmd_experiment(args, argv) -> int:
    cfg = load_experiment_config(args.config)
    for item in args.override or []:
        key, value = _parse_override(item)
        set_path(cfg, key, value)
    if args.seed is not None:
        cfg["seed"] = args.seed
    errors = validate_experiment_config(cfg)
    if errors:
        raise UsageError("invalid experiment config:\n  " + "\n  ".join(errors))
    data = cfg["data"]
    if data["source"] == "files":
        for key in ("matrix", "covariates"):
            _existing(data[key], f"data.{key}")
    out = Path(args.out_dir or cfg.get("output_dir") or os.environ.get(OUTPUT_ENV) or ".")
    out.mkdir(parents=True, exist_ok=True)
    workers = args.workers or os.cpu_count() or 1
    outputs, failed = [], 0
    for label, sub in expand_sweep(cfg):
        report = run_experiment(sub, workers=workers)
        target = out / label if label else out
        paths = report.write(target)
        outputs += [paths["csv"], paths["json"]]
        failed += len(report.failures)
        print(report.summary_table() + (f"  [{label}]" if label else ""))
        print()
    write_manifest(out / "manifest.json", argv, cfg, outputs=outputs)
    if failed:
        print(f"{failed} experiment cells failed; see report.json", file=sys.stderr)
        return 1
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="onionkit", description="Confounder-robust learning toolkit.")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="generate a confounded train/test pair")
    p.add_argument("--n", type=int, default=6000, help="filtered training-set size")
    p.add_argument("--d", type=int, default=20, help="latent dimension")
    p.add_argument("--p", type=int, default=300, help="feature count")
    p.add_argument("--sigma", type=float, default=2.0)
    p.add_argument("--concentration", type=float, nargs=2, default=[40.0, 50.0])
    p.add_argument("--test-fraction", type=float, default=0.2)
    p.add_argument("--strict-balance", action="store_true",
                   help="equalize the four (confounder sign, label) cells of the test set")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("onion-fit", help="fit an ONION basis")
    p.add_argument("--matrix", required=True)
    p.add_argument("--covariates", required=True)
    p.add_argument("--confounders", nargs="*", help="covariate names (default: all but label)")
    p.add_argument("--out", required=True)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--max-iter", type=int, default=1000)
    p.add_argument("--skip-degenerate", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_onion_fit)

    p = sub.add_parser("onion-transform", help="project data off a fitted basis (no covariates)")
    p.add_argument("--matrix", required=True)
    p.add_argument("--basis", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--verify", action="store_true", help="check X_n W = 0")
    p.set_defaults(func=cmd_onion_transform)

    p = sub.add_parser("train", help="train logreg, MLP or DANN")
    p.add_argument("--matrix", required=True)
    p.add_argument("--covariates", required=True)
    p.add_argument("--method", choices=["logreg", "mlp", "dann"], default="logreg")
    p.add_argument("--config", help="JSON file of TrainConfig fields")
    p.add_argument("--standardize", action="store_true")
    p.add_argument("--onion", action="store_true", help="train on ONION-normalized data")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="AUC of a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--matrix", required=True)
    p.add_argument("--covariates", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("experiment", help="run a cross-validated experiment config")
    p.add_argument("config", help="config path or bundled name: " + ", ".join(BUNDLED))
    p.add_argument("--out-dir")
    p.add_argument("--workers", type=int, help="parallel trials (default: CPU count)")
    p.add_argument("--seed", type=int)
    p.add_argument("--override", action="append", metavar="KEY.PATH=JSON",
                   help="override a config value, e.g. trials=5 or train.iterations=500")
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"onionkit: error: {exc}", file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args, argv)
    except UsageError as exc:
        print(f"onionkit: error: {exc}", file=sys.stderr)
        return 2
    except (OnionKitError, ValueError, OSError) as exc:
        print(f"onionkit: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
