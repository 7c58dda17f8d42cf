"""Python bindings for the reposer simulation, trainer and evaluation harness."""

import json

from ._reposer import (
    CheckpointError,
    Config,
    ConfigError,
    Env,
    IncompatibleCheckpoint,
    NonFiniteError,
    Policy,
    Trainer,
    UnsupportedObject,
    evaluate,
    keypoints,
    load_config,
    logistic_kernel,
    make_env,
    profile_names,
    robustness_sweep,
    rot_dist,
    threshold_heatmap,
    wilson_interval,
    zero_shot_objects,
)


def config_dict(config):
    return json.loads(config.to_json())


def config_from_dict(tree):
    return Config.from_json(json.dumps(tree))
