"""Command-line experiment harness.

    python spca_bench.py split --data faces/ --out results
    python spca_bench.py train --out results --k 30 --p 0.5
    python spca_bench.py eval --out results

Every command rebuilds its inputs from the data source and the seeds
(load, occlude, split, normalize) or reads what `split` and `train` left in
the output directory, so reruns with the same seeds produce identical files.
"""

import argparse
import csv
import functools
import io
import itertools
import logging
import sys
from dataclasses import dataclass, replace
from multiprocessing import Pool
from pathlib import Path
from typing import Tuple

import numpy as np
from tqdm import tqdm

from spca import baselines, constants, data, diagnostics, matrix_io
from spca.core import (
    IterationRecord,
    SelfPacedConfig,
    TrainingHistory,
    fidelity,
    fit_spca,
    weighted_objective,
)
from spca.errors import (
    DataFormatError,
    DegenerateInputError,
    DiagnosticViolation,
    InvalidArgumentError,
    SpcaError,
)

logger = logging.getLogger(__name__)

LOG_DIR = "log-results"
LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

TRAIN_FILE = "train.csv"
TEST_FILE = "test.csv"
SPLIT_FILE = "split.txt"
MANIFEST_FILE = "manifest.csv"
MODEL_FILE = "model.txt"
ERROR_FILE = "error.csv"
SWEEP_FILE = "sweep.csv"
SWEEP_SUMMARY_FILE = "sweep_summary.csv"

ERROR_COLUMNS = ["dataset", "method", "p", "eta", "c", "k", "error"]
SWEEP_COLUMNS = ERROR_COLUMNS + ["status"]

# solver parameters a method does not use; result rows and model files leave them empty
IGNORED_PARAMETERS = {"spca": (), "l2p": ("eta", "c"), "pca": ("p", "eta", "c")}

# config-file keys named after the flags of list-valued options
CONFIG_ALIASES = {"method": "methods", "k": "ks", "p": "ps", "eta": "etas", "c": "cs"}

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_RUNTIME = 2
EXIT_VIOLATION = 3


# ---------------------------------------------------------------------------
# logging


def setup_logger(flag, verbose=False, log_dir=None):
    """Send package records to <log_dir>/<flag>_log.txt, or to stderr when
    no log directory is given."""
    logger = logging.getLogger("spca")
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
        handler.close()
    if log_dir is None:
        handler = logging.StreamHandler(sys.stderr)
        level = logging.INFO if verbose else logging.WARNING
    else:
        Path(log_dir).mkdir(parents=True, exist_ok=True)
        handler = logging.FileHandler(Path(log_dir) / f"{flag}_log.txt")
        level = logging.DEBUG if verbose else logging.INFO
    handler.setLevel(level)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    logger.setLevel(level)
    logger.addHandler(handler)
    return logger


def log_output(flag):
    output_logger = logging.getLogger(f"spca.{flag}")

    def decorator(func):
        @functools.wraps(func)
        def wrapper(*args, **kwargs):
            original_stdout = sys.stdout
            sys.stdout = io.StringIO()
            try:
                return func(*args, **kwargs)
            finally:
                output = sys.stdout.getvalue()
                sys.stdout = original_stdout
                if output:
                    output_logger.info(f"Function {func.__name__} output:\n{output}")

        return wrapper

    return decorator


def create_logged_function(func, flag):
    return log_output(flag)(func)


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a harness command needs besides the files in `out`."""

    out: Path
    methods: Tuple[str, ...] = ("spca",)
    ks: Tuple[int, ...] = ()
    ps: Tuple[float, ...] = (constants.P,)
    etas: Tuple[float, ...] = (constants.ETA,)
    cs: Tuple[float, ...] = (constants.C,)
    fraction: float = constants.OCCLUDE_FRACTION
    side_ratio: float = constants.SIDE_RATIO
    fill: str = constants.FILL
    train_ratio: float = constants.TRAIN_RATIO
    seed_data: int = constants.SEED
    seed_corrupt: int = constants.SEED
    seed_split: int = constants.SEED
    seed_init: int = constants.SEED
    outer_iters: int = constants.OUTER_ITERS
    inner_tol: float = constants.INNER_TOL
    inner_max: int = constants.INNER_MAX
    eps_dist: float = constants.EPS_DIST
    init: str = constants.INIT
    normalization: str = constants.NORMALIZATION

    def __post_init__(self):
        for method in self.methods:
            if method not in constants.METHODS:
                raise InvalidArgumentError(f"method must be one of {constants.METHODS}, got {method!r}")
        for k in self.ks:
            if k < 1:
                raise InvalidArgumentError(f"every k must be a positive integer, got {k}")
        for p, eta, c in itertools.product(self.ps, self.etas, self.cs):
            self.solver_config(1, p, eta, c)

    @classmethod
    def from_args(cls, args):
        seed = args.seed
        values = {"out": Path(args.out)}
        for name in ("methods", "ks", "ps", "etas", "cs"):
            if getattr(args, name, None) is not None:
                values[name] = tuple(getattr(args, name))
        for name in ("seed_data", "seed_corrupt", "seed_split", "seed_init"):
            value = getattr(args, name, None)
            values[name] = seed if value is None else value
        for name in (
            "fraction",
            "side_ratio",
            "fill",
            "train_ratio",
            "outer_iters",
            "inner_tol",
            "inner_max",
            "eps_dist",
            "init",
            "normalization",
        ):
            if getattr(args, name, None) is not None:
                values[name] = getattr(args, name)
        return cls(**values)

    def single(self, name):
        values = getattr(self, name)
        if len(values) != 1:
            raise InvalidArgumentError(f"this command takes exactly one value for {name}, got {values}")
        return values[0]

    def solver_config(self, k, p=None, eta=None, c=None):
        return SelfPacedConfig(
            k=k,
            p=constants.P if p is None else p,
            eta=constants.ETA if eta is None else eta,
            c=constants.C if c is None else c,
            outer_iters=self.outer_iters,
            inner_tol=self.inner_tol,
            inner_max=self.inner_max,
            eps_dist=self.eps_dist,
            seed=self.seed_init,
            init=self.init,
            normalization=self.normalization,
        )


def _parse_bool(text):
    lowered = str(text).strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off", ""):
        return False
    raise InvalidArgumentError(f"expected a boolean, got {text!r}")


def _apply_config_file(commands, args, argv):
    """Re-parse with the config file's key=value pairs as defaults."""
    overrides = matrix_io.read_key_values(args.config)
    parsed = vars(args)
    defaults = {}
    for key, value in overrides.items():
        dest = key.replace("-", "_")
        dest = CONFIG_ALIASES.get(dest, dest)
        if dest in ("command", "handler", "config") or dest not in parsed:
            raise InvalidArgumentError(f"{args.config}: unknown key {key!r} for `{args.command}`")
        defaults[dest] = _parse_bool(value) if isinstance(parsed[dest], bool) else value
    subparser = commands[args.command]
    subparser.set_defaults(**defaults)
    reparsed = subparser.parse_args(argv[1:])
    reparsed.command = args.command
    return reparsed


# ---------------------------------------------------------------------------
# argument types


def _list_of(kind):
    def parse(text):
        try:
            values = [kind(item) for item in str(text).split(",") if item.strip()]
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected a comma-separated list, got {text!r}") from None
        if not values:
            raise argparse.ArgumentTypeError("empty list")
        return values

    return parse


def _method_list(text):
    return [item.strip() for item in str(text).split(",") if item.strip()]


def _shape(text):
    try:
        height, width = (int(part) for part in str(text).lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected HEIGHTxWIDTH, got {text!r}") from None
    if height < 1 or width < 1:
        raise argparse.ArgumentTypeError(f"image shape must be positive, got {text!r}")
    return height, width


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _common_options():
    parser = _Parser(add_help=False)
    parser.add_argument("--out", type=str, default="results", help="Output directory")
    parser.add_argument("--config", type=str, help="key=value file with defaults for any flag")
    parser.add_argument("--seed", type=int, default=constants.SEED, help="Default for every stage seed")
    parser.add_argument("--log", action="store_true", help="Log the results to a txt in log-results/")
    parser.add_argument("--verbose", action="store_true", help="Log per-iteration progress")
    return parser


def _source_options():
    parser = _Parser(add_help=False)
    parser.add_argument("--data", type=str, help="Image directory, one subdirectory per class")
    parser.add_argument("--matrix", type=str, help="CSV data matrix, one sample per column")
    parser.add_argument("--shape", type=_shape, help="HEIGHTxWIDTH of the --matrix columns")
    parser.add_argument("--synthetic", action="store_true", help="Use the synthetic low-rank generator")
    parser.add_argument("--synthetic-shape", type=_shape, default=(4, 5), help="HEIGHTxWIDTH")
    parser.add_argument("--synthetic-n", type=int, default=60, help="Number of synthetic samples")
    parser.add_argument("--synthetic-rank", type=int, default=3, help="Rank of the synthetic data")
    parser.add_argument("--synthetic-classes", type=int, default=1, help="Round-robin class count")
    parser.add_argument("--seed-data", type=int, help="Seed of the synthetic generator")
    parser.add_argument("--fraction", type=float, default=constants.OCCLUDE_FRACTION)
    parser.add_argument("--side-ratio", type=float, default=constants.SIDE_RATIO)
    parser.add_argument("--fill", type=str, default=constants.FILL, choices=constants.FILL_MODES)
    parser.add_argument("--seed-corrupt", type=int, help="Seed of the occlusion")
    parser.add_argument("--train-ratio", type=float, default=constants.TRAIN_RATIO)
    parser.add_argument("--seed-split", type=int, help="Seed of the per-class split")
    return parser


def _model_options():
    parser = _Parser(add_help=False)
    parser.add_argument("--method", dest="methods", type=_method_list, default=["spca"],
                        help="spca, l2p or pca (comma list in sweep)")
    parser.add_argument("--k", dest="ks", type=_list_of(int), help="Target dimension(s)")
    parser.add_argument("--p", dest="ps", type=_list_of(float), default=[constants.P])
    parser.add_argument("--eta", dest="etas", type=_list_of(float), default=[constants.ETA])
    parser.add_argument("--c", dest="cs", type=_list_of(float), default=[constants.C])
    parser.add_argument("--outer-iters", type=int, default=constants.OUTER_ITERS)
    parser.add_argument("--inner-tol", type=float, default=constants.INNER_TOL)
    parser.add_argument("--inner-max", type=int, default=constants.INNER_MAX)
    parser.add_argument("--eps-dist", type=float, default=constants.EPS_DIST)
    parser.add_argument("--init", type=str, default=constants.INIT, choices=constants.INIT_METHODS)
    parser.add_argument("--normalization", type=str, default=constants.NORMALIZATION,
                        choices=constants.NORMALIZATION_MODES)
    parser.add_argument("--seed-init", type=int, help="Seed of the random initialization")
    return parser


def build_parser():
    """Returns (parser, {command: subparser})."""
    parser = _Parser(description="Self-paced PCA experiment harness")
    subparsers = parser.add_subparsers(dest="command", required=True)
    common, source, model = _common_options(), _source_options(), _model_options()
    commands = {}

    def add(name, handler, parents, help_text):
        sub = subparsers.add_parser(name, parents=parents, help=help_text)
        sub.set_defaults(handler=handler)
        commands[name] = sub
        return sub

    add("corrupt", cmd_corrupt, [common, source], "Write occluded images and a manifest")
    add("split", cmd_split, [common, source], "Write normalized train/test matrices")
    add("train", cmd_train, [common, model], "Fit one model on train.csv")
    add("eval", cmd_eval, [common], "Reconstruction error of model.txt on test.csv")
    sweep = add("sweep", cmd_sweep, [common, model], "Grid over method, k, p, eta and c")
    sweep.add_argument("--jobs", type=int, default=1, help="Worker processes")
    export = add("export", cmd_export, [common], "Eigenface and reconstruction images")
    export.add_argument("--indices", type=_list_of(int), help="Test columns to reconstruct (default: first 5)")
    diagnose = add("diagnose", cmd_diagnose, [common], "Check the recorded history")
    diagnose.add_argument("--bound", type=float, help="Fidelity bound M of the robustness check")
    diagnose.add_argument("--weight-etas", type=_list_of(float), default=[0.05, 0.1, 0.2, 0.5, 1.0])
    diagnose.add_argument("--weight-grid-max", type=float, default=20.0)
    diagnose.add_argument("--weight-grid-points", type=int, default=201)
    diagnose.add_argument("--report-only", action="store_true", help="Never exit with a violation code")
    return parser, commands


# ---------------------------------------------------------------------------
# data pipeline


def _load_source(args, cfg):
    """(dataset name, ImageDataset) for --synthetic, --data or --matrix."""
    given = [bool(args.synthetic), args.data is not None, args.matrix is not None]
    if sum(given) != 1:
        raise InvalidArgumentError("give exactly one of --data, --matrix or --synthetic")
    if args.synthetic:
        height, width = args.synthetic_shape
        ds = data.make_low_rank(
            height, width, args.synthetic_n, args.synthetic_rank, args.synthetic_classes, cfg.seed_data
        )
        return "synthetic", ds
    if args.data is not None:
        return Path(args.data).name, data.load_image_dir(args.data)
    height, width = args.shape if args.shape else (None, None)
    return Path(args.matrix).stem, data.load_matrix_csv(args.matrix, height, width)


def _split_info(cfg):
    path = cfg.out / SPLIT_FILE
    if not path.exists():
        raise FileNotFoundError(f"{path} not found; run `split` first")
    return matrix_io.read_key_values(path)


def _read_split_matrix(cfg, name):
    path = cfg.out / name
    if not path.exists():
        raise FileNotFoundError(f"{path} not found; run `split` first")
    return matrix_io.read_matrix(path)


def _read_model(cfg):
    path = cfg.out / MODEL_FILE
    if not path.exists():
        raise FileNotFoundError(f"{path} not found; run `train` first")
    model = matrix_io.read_model(path)
    if model.method not in constants.METHODS:
        raise DataFormatError(f"{path}: unknown method {model.method!r}")
    ignored = IGNORED_PARAMETERS[model.method]
    missing = [name for name in ("p", "eta", "c") if name not in ignored and getattr(model, name) is None]
    if missing:
        raise DataFormatError(f"{path}: {model.method} model needs {', '.join(missing)}")
    return model


def cmd_corrupt(cfg: ExperimentConfig, args):
    name, ds = _load_source(args, cfg)
    corrupted = data.occlude(ds, cfg.fraction, cfg.side_ratio, cfg.fill, cfg.seed_corrupt)
    for column, file in enumerate(corrupted.files):
        target = cfg.out / "corrupted" / (file if file.endswith(".pgm") else f"{file}.pgm")
        data.save_pgm(corrupted.matrix[:, column], ds.height, ds.width, target, rescale=False)
    data.write_manifest(cfg.out / MANIFEST_FILE, data.manifest_rows(corrupted))
    print(f"{name}: occluded {int(corrupted.mask.sum())} of {corrupted.n} images into {cfg.out / 'corrupted'}")
    return EXIT_OK


def cmd_split(cfg: ExperimentConfig, args):
    name, ds = _load_source(args, cfg)
    corrupted = data.occlude(ds, cfg.fraction, cfg.side_ratio, cfg.fill, cfg.seed_corrupt)
    train_mask = data.split_mask(corrupted, cfg.train_ratio, cfg.seed_split)
    train = data.normalize_samples(replace(corrupted.subset(np.flatnonzero(train_mask)), clean=None))
    test = corrupted.subset(np.flatnonzero(~train_mask))
    test = data.normalize_samples(replace(test, matrix=test.pristine, clean=None))

    matrix_io.write_matrix(cfg.out / TRAIN_FILE, train.matrix)
    matrix_io.write_matrix(cfg.out / TEST_FILE, test.matrix)
    data.write_manifest(cfg.out / MANIFEST_FILE, data.manifest_rows(corrupted, train_mask))
    matrix_io.write_key_values(
        cfg.out / SPLIT_FILE,
        {
            "dataset": name,
            "height": ds.height,
            "width": ds.width,
            "n_train": train.n,
            "n_test": test.n,
            "fraction": cfg.fraction,
            "side_ratio": cfg.side_ratio,
            "fill": cfg.fill,
            "train_ratio": cfg.train_ratio,
            "seed_data": cfg.seed_data,
            "seed_corrupt": cfg.seed_corrupt,
            "seed_split": cfg.seed_split,
        },
    )
    print(f"{name}: {train.n} training and {test.n} test samples written to {cfg.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# training


def _summary_record(X, U, p, objective, trace):
    """One-iteration history for the methods without sample weights."""
    fid = fidelity(X, U, p)
    return TrainingHistory(
        [
            IterationRecord(
                iteration=1,
                weights=np.ones(X.shape[1]),
                raw_fidelity=fid.ell,
                fidelity=fid,
                objective=objective,
                trace=list(trace),
            )
        ]
    )


def method_parameters(method, p, eta, c):
    """(p, eta, c) with the parameters `method` ignores replaced by None."""
    values = {"p": p, "eta": eta, "c": c}
    for name in IGNORED_PARAMETERS[method]:
        values[name] = None
    return values["p"], values["eta"], values["c"]


def fit_method(method, X, solver: SelfPacedConfig, progress=False):
    """(U, weights, history) for one of spca, l2p or pca."""
    if method == "spca":
        return fit_spca(X, solver, progress=progress)
    if method == "l2p":
        U, trace = baselines.fit_l2p_rpca(
            X,
            solver.k,
            solver.p,
            inner_tol=solver.inner_tol,
            inner_max=solver.inner_max * solver.outer_iters,
            eps_dist=solver.eps_dist,
            init=solver.init,
            seed=solver.seed,
            return_trace=True,
        )
        objective = weighted_objective(X, U, np.ones(X.shape[1]), solver.p)
        return U, np.ones(X.shape[1]), _summary_record(X, U, solver.p, objective, trace)
    model = baselines.fit_pca(X, solver.k)
    centered = X - model.mean[:, None]
    objective = float(np.sum((model.U.T @ centered) ** 2))
    return model.U, np.ones(X.shape[1]), _summary_record(X, model.U, 2.0, objective, [objective])


def cmd_train(cfg: ExperimentConfig, args):
    if not cfg.ks:
        raise InvalidArgumentError("--k is required")
    method = cfg.single("methods")
    p = 2.0 if method == "pca" else cfg.single("ps")
    solver = cfg.solver_config(cfg.single("ks"), p, cfg.single("etas"), cfg.single("cs"))
    X = _read_split_matrix(cfg, TRAIN_FILE)
    U, weights, history = fit_method(method, X, solver, progress=args.verbose)

    matrix_io.write_model(
        cfg.out / MODEL_FILE,
        U,
        weights,
        *method_parameters(method, solver.p, solver.eta, solver.c),
        method=method,
        normalization=solver.normalization,
        outer_iters=solver.outer_iters,
    )
    matrix_io.write_history(cfg.out, history)
    print(
        f"{method}: k={solver.k} p={solver.p} fitted on {X.shape[1]} samples, "
        f"{len(history)} iteration(s), final objective {history[-1].objective:.6g}"
    )
    return EXIT_OK


def cmd_eval(cfg: ExperimentConfig, args):
    model = _read_model(cfg)
    X_test = _read_split_matrix(cfg, TEST_FILE)
    dataset = _split_info(cfg).get("dataset", "")
    error = baselines.reconstruction_error(X_test, model.U)
    with open(cfg.out / ERROR_FILE, "w", newline="") as csvfile:
        writer = csv.writer(csvfile, lineterminator="\n")
        writer.writerow(ERROR_COLUMNS)
        writer.writerow(
            [
                dataset,
                model.method,
                *(_text(value) for value in method_parameters(model.method, model.p, model.eta, model.c)),
                model.k,
                matrix_io.format_float(error),
            ]
        )
    print(f"{model.method}: k={model.k} reconstruction error {error:.6g} on {X_test.shape[1]} test samples")
    return EXIT_OK


# ---------------------------------------------------------------------------
# sweep

_SWEEP_STATE = {}


def _init_sweep_worker(X_train, X_test, cfg):
    _SWEEP_STATE.update(X_train=X_train, X_test=X_test, cfg=cfg)


def _run_sweep_row(task):
    method, p, eta, c, k = task
    cfg = _SWEEP_STATE["cfg"]
    try:
        solver = cfg.solver_config(k, 2.0 if method == "pca" else p, eta, c)
        U, _, _ = fit_method(method, _SWEEP_STATE["X_train"], solver)
        error = baselines.reconstruction_error(_SWEEP_STATE["X_test"], U)
        return task, matrix_io.format_float(error), "ok"
    except (SpcaError, np.linalg.LinAlgError) as err:
        return task, "", f"error: {err}"


def _sweep_tasks(cfg):
    """(method, p, eta, c, k) in grid order; parameters a method ignores are None."""
    tasks = []
    for method in cfg.methods:
        grid = (method_parameters(method, *values) for values in itertools.product(cfg.ps, cfg.etas, cfg.cs))
        for p, eta, c in dict.fromkeys(grid):
            tasks.extend((method, p, eta, c, k) for k in cfg.ks)
    return tasks


def _text(value):
    return "" if value is None else matrix_io.format_float(value)


def _task_key(task):
    method, p, eta, c, k = task
    return method, _text(p), _text(eta), _text(c), str(k)


def _row_key(row):
    def canonical(text):
        return "" if text == "" else matrix_io.format_float(float(text))

    return row["method"], canonical(row["p"]), canonical(row["eta"]), canonical(row["c"]), str(int(row["k"]))


def _read_sweep_rows(path):
    if not path.exists():
        return []
    with open(path, newline="") as csvfile:
        reader = csv.DictReader(csvfile)
        if reader.fieldnames != SWEEP_COLUMNS:
            raise DataFormatError(f"{path}: expected header {','.join(SWEEP_COLUMNS)}")
        try:
            rows = list(reader)
            for row in rows:
                _row_key(row)
        except (TypeError, ValueError):
            raise DataFormatError(f"{path}: malformed sweep row") from None
    return rows


def _write_sweep_summary(path, rows):
    groups = {}
    for row in rows:
        if row["status"] != "ok":
            continue
        key = (row["method"], row["p"], row["eta"], row["c"])
        groups.setdefault(key, []).append(float(row["error"]))
    with open(path, "w", newline="") as csvfile:
        writer = csv.writer(csvfile, lineterminator="\n")
        writer.writerow(["method", "p", "eta", "c", "mean_error", "n_k"])
        for key, errors in groups.items():
            writer.writerow(list(key) + [matrix_io.format_float(np.mean(errors)), len(errors)])


def cmd_sweep(cfg: ExperimentConfig, args):
    if not cfg.ks:
        raise InvalidArgumentError("--k is required")
    if args.jobs < 1:
        raise InvalidArgumentError(f"--jobs must be >= 1, got {args.jobs}")
    X_train = _read_split_matrix(cfg, TRAIN_FILE)
    X_test = _read_split_matrix(cfg, TEST_FILE)
    dataset = _split_info(cfg).get("dataset", "")

    path = cfg.out / SWEEP_FILE
    done = {_row_key(row) for row in _read_sweep_rows(path)}
    pending = [task for task in _sweep_tasks(cfg) if _task_key(task) not in done]
    logger.info("sweep: %d rows pending, %d already present", len(pending), len(done))

    new_file = not path.exists()
    with open(path, "a", newline="") as csvfile:
        writer = csv.writer(csvfile, lineterminator="\n")
        if new_file:
            writer.writerow(SWEEP_COLUMNS)
            csvfile.flush()

        def record(result):
            task, error, status = result
            method, p, eta, c, k = _task_key(task)
            if status != "ok":
                logger.warning("sweep row %s failed: %s", task, status)
            writer.writerow([dataset, method, p, eta, c, k, error, status])
            csvfile.flush()

        if args.jobs == 1:
            _init_sweep_worker(X_train, X_test, cfg)
            for task in tqdm(pending, file=sys.stdout, desc="sweep"):
                record(_run_sweep_row(task))
        else:
            with Pool(args.jobs, initializer=_init_sweep_worker, initargs=(X_train, X_test, cfg)) as pool:
                for result in tqdm(pool.imap(_run_sweep_row, pending), total=len(pending), file=sys.stdout, desc="sweep"):
                    record(result)

    rows = _read_sweep_rows(path)
    _write_sweep_summary(cfg.out / SWEEP_SUMMARY_FILE, rows)
    failed = sum(row["status"] != "ok" for row in rows)
    print(f"sweep: {len(pending)} rows computed, {len(rows)} total, {failed} failed")
    return EXIT_OK


# ---------------------------------------------------------------------------
# export and diagnostics


def cmd_export(cfg: ExperimentConfig, args):
    model = _read_model(cfg)
    info = _split_info(cfg)
    height, width = int(info["height"]), int(info["width"])
    if model.U.shape[0] != height * width:
        raise InvalidArgumentError(
            f"model has d = {model.U.shape[0]} but the images are {height}x{width}"
        )
    X_test = _read_split_matrix(cfg, TEST_FILE)
    indices = args.indices if args.indices is not None else list(range(min(5, X_test.shape[1])))
    for index in indices:
        if not 0 <= index < X_test.shape[1]:
            raise InvalidArgumentError(f"test index {index} out of range [0, {X_test.shape[1]})")

    target = cfg.out / "export"
    for j in range(model.k):
        data.save_pgm(model.U[:, j], height, width, target / f"eigenface_{j:03d}.pgm")
    for index in indices:
        x = X_test[:, index]
        data.save_pgm(x, height, width, target / f"test_{index:04d}_original.pgm")
        data.save_pgm(baselines.reconstruct(x, model.U), height, width, target / f"test_{index:04d}_reconstruction.pgm")
    print(f"exported {model.k} eigenfaces and {len(indices)} reconstructions to {target}")
    return EXIT_OK


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as csvfile:
        writer = csv.writer(csvfile, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([matrix_io.format_float(v) if isinstance(v, float) else v for v in row])


def cmd_diagnose(cfg: ExperimentConfig, args):
    model = _read_model(cfg)
    for name in (matrix_io.HISTORY_FILE, matrix_io.FIDELITY_FILE, matrix_io.TRACE_FILE):
        if not (cfg.out / name).exists():
            raise FileNotFoundError(f"{cfg.out / name} not found; run `train` first")
    history = matrix_io.read_history(cfg.out)
    # fits without sample weights record their fidelities under the default age
    eta = constants.ETA if model.eta is None else model.eta
    p = 2.0 if model.p is None else model.p
    problems = []

    mono = diagnostics.check_mm_monotonicity(history, eta)
    _write_rows(cfg.out / "monotonicity.csv", ["iter", "objective", "delta", "violation"], mono.rows())
    if mono.inner_violations and p >= 1:
        problems.append(f"trace objective decreased at (iteration, step) {mono.inner_violations}")
    if mono.violations and model.method == "spca" and model.headers.get("normalization") != "every":
        problems.append(f"surrogate objective decreased at iterations {mono.violations}")

    minorant_rows = []
    for previous, current in zip(history, history[1:]):
        report = diagnostics.check_minorant(current.fidelity.ell, previous.fidelity.ell, eta)
        minorant_rows.append((current.iteration, report.worst_gap, report.violations))
        if not report.ok:
            problems.append(f"minorant violated {report.violations} times at iteration {current.iteration}")
    _write_rows(cfg.out / "minorant.csv", ["iter", "worst_gap", "violations"], minorant_rows)

    peak = max(float(np.max(record.fidelity.ell)) for record in history)
    bound = args.bound if args.bound is not None else peak * (1 + 1e-6) + 1e-12
    robustness_rows = []
    for record in history:
        report = diagnostics.check_robustness_bound(record.fidelity.ell, eta, bound)
        robustness_rows.append(
            (record.iteration, report.lipschitz, report.worst_slack, report.max_slack, report.violations)
        )
        if not report.ok:
            problems.append(f"robustness bound violated {report.violations} times at iteration {record.iteration}")
    _write_rows(
        cfg.out / "robustness.csv",
        ["iter", "lipschitz", "worst_slack", "max_slack", "violations"],
        robustness_rows,
    )

    curve = diagnostics.weight_curve(
        args.weight_etas, np.linspace(0.0, args.weight_grid_max, args.weight_grid_points)
    )
    _write_rows(cfg.out / "weight_curve.csv", ["eta", "ell", "w", "threshold"], curve.rows())

    print(
        f"diagnose: {len(history)} iteration(s), {len(mono.violations)} outer and "
        f"{len(mono.inner_violations)} inner monotonicity flags, bound M = {bound:.6g}"
    )
    if problems and not args.report_only:
        raise DiagnosticViolation("; ".join(problems))
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, commands = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.config:
            args = _apply_config_file(commands, args, argv)
        setup_logger(args.command, verbose=args.verbose, log_dir=LOG_DIR if args.log else None)
        handler = args.handler
        if args.log:
            handler = create_logged_function(handler, args.command)
        cfg = ExperimentConfig.from_args(args)
        cfg.out.mkdir(parents=True, exist_ok=True)
        return handler(cfg, args)
    except DiagnosticViolation as err:
        print(f"error: diagnostic violation: {err}", file=sys.stderr)
        return EXIT_VIOLATION
    except (InvalidArgumentError, DataFormatError, FileNotFoundError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INVALID
    except (DegenerateInputError, np.linalg.LinAlgError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_RUNTIME
