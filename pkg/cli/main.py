"""
Command-Line Entry Point

    python -m cli gen        --out DIR [scene flags]
    python -m cli train      --data MANIFEST --out DIR [training flags]
    python -m cli eval       --checkpoint CKPT --data MANIFEST|FILE
    python -m cli oracle     [--quick]
    python -m cli sample-obs --checkpoint CKPT --data MANIFEST|FILE --out FILE
    python -m cli sweep      --data MANIFEST --out DIR --values 0,2,8 --seeds 0,1,2

Exit codes: 0 success, 2 configuration/input error, 3 training aborted
after tracking failures, 4 oracle check failed.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import pandas as pd

from autodiff.params import CheckpointError, load_checkpoint
from data.dataset_io import (
    DatasetFormatError,
    load_scenes,
    load_trajectories,
    read_manifest,
    write_dataset,
)
from data.generators.scene_generator import SceneConfig, TrueModelConfig
from data.generators.synthetic_data_generator import SyntheticDataGenerator, summarize
from data.schemas.schema_definitions import ObjectTrajectory
from filtering.random_streams import STREAM_SAMPLE_OBS, make_rng
from metrics.tracking_metrics import TrackingMetricsCalculator
from models.motion_model import MotionConfig
from models.tracking_ssm import TrackingModel
from training.trainer import TrainConfig, Trainer, TrainingAborted
from .config import (
    ConfigError,
    EvalConfig,
    SampleObsConfig,
    default_threads,
    fields_of,
    load_config_file,
    merge,
    resolve,
    write_resolved_config,
)
from .oracle import OracleConfig, run_oracle_suite

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ABORTED = 3
EXIT_ORACLE = 4


# Parsers

def _add_common(parser: argparse.ArgumentParser):
    parser.add_argument("--config", type=Path, help="key = value config file")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--threads", type=int)


def _add_train_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--data", type=Path, required=True, help="dataset manifest")
    parser.add_argument("--out", type=Path, required=True)
    parser.add_argument("--init", type=Path, help="start from this checkpoint")
    parser.add_argument("--estimator", choices=["pf_sefi", "pf", "pfnet"])
    parser.add_argument("--lag", type=int)
    parser.add_argument("--alpha", dest="pfnet_alpha", type=float)
    parser.add_argument("--particles", dest="n_train", type=int)
    parser.add_argument("--eval-particles", dest="n_eval", type=int)
    parser.add_argument("--lr", dest="learning_rate", type=float)
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--steps-per-epoch", type=int)
    parser.add_argument("--clip", dest="grad_clip", type=float)
    parser.add_argument("--policy", choices=["simple", "neural"])
    parser.add_argument("--train-segments", help="comma-separated parameter name prefixes")
    parser.add_argument("--max-train-length", type=int)
    parser.add_argument("--resampling", choices=["multinomial", "systematic"])
    parser.add_argument("--max-failure-rate", type=float)
    parser.add_argument("--init-sigma-accel", type=float)
    parser.add_argument("--init-sigma-pinch", type=float)
    _add_common(parser)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pfsefi", description=__doc__.split("\n\n")[0])
    parser.add_argument("--log-level", default="INFO",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a synthetic dataset")
    gen.add_argument("--out", type=Path, required=True)
    gen.add_argument("--scenes", dest="train_scenes", type=int)
    gen.add_argument("--eval-scenes", type=int)
    gen.add_argument("--objects", dest="n_objects", type=int)
    gen.add_argument("--steps", dest="n_steps", type=int)
    gen.add_argument("--dt", type=float)
    gen.add_argument("--points-min", type=int)
    gen.add_argument("--points-max", type=int)
    gen.add_argument("--av-motion", choices=["stationary", "straight"])
    gen.add_argument("--av-speed", type=float)
    gen.add_argument("--av-noise-xy", type=float)
    gen.add_argument("--av-noise-theta", type=float)
    gen.add_argument("--sigma-accel", type=float)
    gen.add_argument("--sigma-pinch", type=float)
    _add_common(gen)

    train = sub.add_parser("train", help="train a tracking model")
    _add_train_flags(train)

    ev = sub.add_parser("eval", help="evaluate a checkpoint")
    ev.add_argument("--checkpoint", type=Path, required=True)
    ev.add_argument("--data", type=Path, required=True, help="manifest or scene file")
    ev.add_argument("--split")
    ev.add_argument("--particles", dest="n_eval", type=int)
    ev.add_argument("--lag", type=int)
    ev.add_argument("--resampling", choices=["multinomial", "systematic"])
    ev.add_argument("--out", type=Path, help="CSV file to append the metrics row to")
    _add_common(ev)

    oracle = sub.add_parser("oracle", help="run the Kalman and transition-gradient checks")
    oracle.add_argument("--quick", action="store_true", help="small particle/seed counts")
    oracle.add_argument("--out", type=Path, help="directory for oracle.csv")
    oracle.add_argument("--steps", type=int)
    oracle.add_argument("--mll-particles", type=int)
    oracle.add_argument("--mll-seeds", type=int)
    oracle.add_argument("--score-particles", type=int)
    oracle.add_argument("--score-seeds", type=int)
    oracle.add_argument("--score-lag", type=int)
    _add_common(oracle)

    sample = sub.add_parser("sample-obs", help="resample observations at ground-truth states")
    sample.add_argument("--checkpoint", type=Path, required=True)
    sample.add_argument("--data", type=Path, required=True)
    sample.add_argument("--split")
    sample.add_argument("--out", type=Path, required=True)
    sample.add_argument("-n", "--n", dest="n_objects", type=int, help="first n trajectories only")
    _add_common(sample)

    sweep = sub.add_parser("sweep", help="train over lags or alphas and several seeds")
    _add_train_flags(sweep)
    sweep.add_argument("--values", required=True,
                       help="comma-separated lags (pf_sefi) or alphas (pfnet)")
    sweep.add_argument("--seeds", default="0,1,2")
    return parser


def _flags(args: argparse.Namespace, exclude: Sequence[str] = ()) -> Dict[str, object]:
    skip = {"command", "config", "log_level", *exclude}
    return {k: v for k, v in vars(args).items() if k not in skip}


def _csv_list(text: str, cast) -> List:
    try:
        return [cast(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse list {text!r}") from None


def _int_value(values: dict, key: str, default: int) -> int:
    value = values.get(key)
    if value is None:
        return default
    try:
        return int(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key} must be an integer, got {value!r}") from None


def _model_for(meta: dict) -> TrackingModel:
    return TrackingModel(meta.get("policy", "simple"), MotionConfig(dt=meta.get("dt", 0.33)))


# Commands

def cmd_gen(args: argparse.Namespace) -> int:
    extra = {"train_scenes", "eval_scenes", "seed", "threads"}
    values = merge(load_config_file(args.config), _flags(args, ["out"]),
                   fields_of(SceneConfig, TrueModelConfig) | extra)
    scene = resolve(SceneConfig, values)
    true_model = resolve(TrueModelConfig, values)
    run = {
        "train_scenes": _int_value(values, "train_scenes", 10),
        "eval_scenes": _int_value(values, "eval_scenes", 2),
        "seed": _int_value(values, "seed", 0),
        "threads": _int_value(values, "threads", default_threads()),
    }

    generator = SyntheticDataGenerator(scene, true_model, run["seed"], run["threads"])
    dataset = generator.generate_dataset(run["train_scenes"], run["eval_scenes"])
    generator.save_dataset(dataset, args.out)
    write_resolved_config(args.out, "gen", {"run": run, "scene": scene, "true_model": true_model})
    print(summarize(dataset).to_string(index=False))
    return EXIT_OK


def _train_config(args: argparse.Namespace) -> TrainConfig:
    values = merge(load_config_file(args.config),
                   _flags(args, ["data", "out", "init", "values", "seeds"]),
                   fields_of(TrainConfig))
    values.setdefault("threads", default_threads())
    return resolve(TrainConfig, values)


def _run_training(config: TrainConfig, manifest: Path, out: Path, init: Optional[Path]):
    train_scenes = load_scenes(manifest, "train")
    eval_set = [t for scene in load_scenes(manifest, "eval") for t in scene]
    dt = read_manifest(manifest).get("scene_config", {}).get("dt")
    if dt is not None and config.dt != dt:
        logger.info("using dataset dt %.4g", dt)
        config = config.model_copy(update={"dt": dt})
    params = None
    if init is not None:
        params, _ = load_checkpoint(init)
    write_resolved_config(out, "train", {"train": config},
                          {"data": manifest, "init": init})
    return Trainer(config, output_dir=out).fit(train_scenes, eval_set, params)


def cmd_train(args: argparse.Namespace) -> int:
    config = _train_config(args)
    result = _run_training(config, args.data, args.out, args.init)
    print(result.history.to_string(index=False))
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    values = merge(load_config_file(args.config), _flags(args, ["checkpoint", "data", "out"]),
                   fields_of(EvalConfig))
    values.setdefault("threads", default_threads())
    config = resolve(EvalConfig, values)

    params, meta = load_checkpoint(args.checkpoint)
    dataset = load_trajectories(args.data, config.split)
    calc = TrackingMetricsCalculator(_model_for(meta), config.n_eval, config.lag,
                                     config.seed, config.resampling, config.threads)
    report = calc.evaluate(params, dataset)
    row = pd.DataFrame([report.to_row(checkpoint=str(args.checkpoint))])
    if args.out is not None:
        header = not args.out.exists()
        args.out.parent.mkdir(parents=True, exist_ok=True)
        row.to_csv(args.out, mode="a", header=header, index=False)
        write_resolved_config(args.out.parent, "eval", {"eval": config},
                              {"checkpoint": args.checkpoint, "data": args.data})
    print(row.to_string(index=False))
    return EXIT_OK


def cmd_oracle(args: argparse.Namespace) -> int:
    values = merge(load_config_file(args.config), _flags(args, ["quick", "out", "threads"]),
                   fields_of(OracleConfig))
    if args.quick:
        for key, value in QUICK_ORACLE.items():
            values.setdefault(key, value)
    config = resolve(OracleConfig, values)
    table = run_oracle_suite(config)
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        table.to_csv(args.out / "oracle.csv", index=False)
        write_resolved_config(args.out, "oracle", {"oracle": config})
    print(table.to_string(index=False))
    if not table["passed"].all():
        logger.error("oracle checks failed: %s", ", ".join(table.loc[~table["passed"], "check"]))
        return EXIT_ORACLE
    return EXIT_OK


def sample_observations(params, model: TrackingModel, trajectories: Sequence[ObjectTrajectory],
                        seed: int) -> List[ObjectTrajectory]:
    """Same trajectories with observations redrawn at the ground-truth states"""
    sampled = []
    for i, traj in enumerate(trajectories):
        if not traj.has_ground_truth:
            logger.warning("trajectory %d has no ground-truth states; skipped", i)
            continue
        rng = make_rng(seed, STREAM_SAMPLE_OBS, i)
        observations = [
            model.observation_model.sample_observation(
                params, pose, state, traj.dims, obs.n_points, rng, t)
            for t, (pose, state, obs) in enumerate(zip(traj.av_poses, traj.states,
                                                        traj.observations))
        ]
        sampled.append(ObjectTrajectory(traj.dims, observations, traj.av_poses, traj.states,
                                        traj.actions, dict(traj.meta, sampled=True)))
    return sampled


def cmd_sample_obs(args: argparse.Namespace) -> int:
    values = merge(load_config_file(args.config),
                   _flags(args, ["checkpoint", "data", "out", "threads"]),
                   fields_of(SampleObsConfig))
    config = resolve(SampleObsConfig, values)

    params, meta = load_checkpoint(args.checkpoint)
    trajectories = load_trajectories(args.data, config.split)
    if config.n_objects is not None:
        trajectories = trajectories[:config.n_objects]
    sampled = sample_observations(params, _model_for(meta), trajectories, config.seed)
    count = write_dataset(args.out, sampled)
    write_resolved_config(args.out.parent, "sample-obs", {"sample_obs": config},
                          {"checkpoint": args.checkpoint, "data": args.data})
    print(f"wrote {count} trajectories with resampled observations to {args.out}")
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    base = _train_config(args)
    key = "pfnet_alpha" if base.estimator == "pfnet" else "lag"
    cast = float if key == "pfnet_alpha" else int
    rows = []
    for value in _csv_list(args.values, cast):
        for seed in _csv_list(args.seeds, int):
            config = resolve(TrainConfig, {**base.model_dump(), key: value, "seed": seed})
            out = args.out / f"{key}_{value}" / f"seed_{seed}"
            try:
                final = _run_training(config, args.data, out, args.init).history.iloc[-1].to_dict()
                final["aborted"] = False
            except TrainingAborted as exc:
                logger.warning("run %s=%s seed=%d aborted: %s", key, value, seed, exc)
                final = {"aborted": True}
            rows.append({**final, key: value, "seed": seed})

    runs = pd.DataFrame(rows)
    args.out.mkdir(parents=True, exist_ok=True)
    runs.to_csv(args.out / "runs.csv", index=False)
    summary = sweep_summary(runs, key)
    summary.to_csv(args.out / "summary.csv", index=False)
    write_resolved_config(args.out, "sweep", {"train": base},
                          {"data": args.data, "values": args.values, "seeds": args.seeds})
    print(summary.to_string(index=False))
    return EXIT_OK


def sweep_summary(runs: pd.DataFrame, key: str) -> pd.DataFrame:
    """Median and inter-quartile range of the final held-out MLL per sweep value"""
    if "mll" not in runs:
        runs = runs.assign(mll=float("nan"))
    mll = runs.dropna(subset=["mll"])
    grouped = mll.groupby(key)["mll"]
    return pd.DataFrame({
        "mll_median": grouped.median(),
        "mll_q25": grouped.quantile(0.25),
        "mll_q75": grouped.quantile(0.75),
        "runs": grouped.size(),
    }).reset_index()


COMMANDS = {
    "gen": cmd_gen,
    "train": cmd_train,
    "eval": cmd_eval,
    "oracle": cmd_oracle,
    "sample-obs": cmd_sample_obs,
    "sweep": cmd_sweep,
}

QUICK_ORACLE = {
    "mll_particles": 5000,
    "mll_seeds": 10,
    "score_particles": 2000,
    "score_seeds": 20,
    "mll_tolerance": 0.02,
    "score_tolerance": 0.15,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        logger.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except (DatasetFormatError, CheckpointError, OSError, ValueError) as exc:
        logger.error("input error: %s", exc)
        return EXIT_CONFIG
    except TrainingAborted as exc:
        logger.error("%s", exc)
        return EXIT_ABORTED


if __name__ == "__main__":
    sys.exit(main())
