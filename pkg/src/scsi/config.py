"""Experiment configuration: INI-style files with strict key checking.

Sections and keys are documented in the README. Unknown sections or keys are
rejected, enum-valued keys are validated against the module enums, and the
config carries a git-blob-style content hash that is stamped into every CSV
the run emits.
"""

from __future__ import annotations

import configparser
import hashlib
import io
from dataclasses import dataclass, field

from .channels import CHANNEL_KINDS, FILL_KINDS, ChannelSpec
from .schedules import SCHEDULE_KINDS, Schedule, make_schedule
from .training import LOSS_KINDS, TrainConfig
from .transport import TransportConfig

__all__ = ["ExperimentConfig", "parse_config", "load_config", "git_blob_hash"]

_SECTIONS = {
    "schedule": {"kind", "epsilon"},
    "channel": {"kind", "sigma_n", "rho", "sigma_r", "lam_n", "shift", "fill", "stages"},
    "transport": {"steps", "mode", "epsilon", "scheme", "t_min", "eps_schedule"},
    "train": {
        "outer_iters",
        "inner_steps",
        "mix_p",
        "batch_size",
        "resample",
        "lr",
        "warmup",
        "seed",
        "loss",
        "dataset",
        "n",
        "heldout",
    },
    "eval": {"n_projections", "metric", "track_every"},
}

_REQUIRED = ("schedule", "channel", "transport", "train")

_DATASETS = ("two-moon",)
_METRICS = ("w2-exact", "sliced")


@dataclass
class ExperimentConfig:
    """Everything a `run` invocation needs, plus the config content hash."""

    name: str
    schedule: Schedule
    channel: ChannelSpec
    transport: TransportConfig
    train: TrainConfig
    dataset: str = "two-moon"
    n_train: int = 10000
    n_heldout: int = 2000
    metric: str = "w2-exact"
    n_projections: int = 128
    track_every: int = 0
    seed: int = 0
    config_hash: str = ""


def git_blob_hash(data: bytes) -> str:
    """sha1 of the git blob encoding of `data`."""
    header = f"blob {len(data)}\0".encode()
    return hashlib.sha1(header + data).hexdigest()


def _parse_channel_inline(text: str) -> ChannelSpec:
    """Parse "kind:key=val,key=val" used inside compose stages."""
    if ":" in text:
        kind, rest = text.split(":", 1)
        params = {}
        for item in rest.split(","):
            if not item.strip():
                continue
            key, _, val = item.partition("=")
            params[key.strip()] = val.strip()
    else:
        kind, params = text, {}
    kind = kind.strip()
    return _make_channel(kind, params, where=f"stage {text!r}")


def _make_channel(kind: str, params: dict, where: str) -> ChannelSpec:
    if kind not in CHANNEL_KINDS or kind == "compose":
        raise ValueError(f"unknown channel kind {kind!r} in {where}")
    kwargs = {}
    numeric = {"sigma_n", "rho", "sigma_r", "lam_n", "shift"}
    for key, val in params.items():
        if key in numeric:
            kwargs[key] = float(val)
        elif key == "fill":
            if val not in FILL_KINDS:
                raise ValueError(f"unknown fill {val!r} in {where}")
            kwargs[key] = val
        else:
            raise ValueError(f"unknown channel key {key!r} in {where}")
    return ChannelSpec(kind=kind, **kwargs)


def parse_config(text: str, name: str = "config") -> ExperimentConfig:
    """Parse and validate a config document; raises ValueError with the
    offending section/key on contract violations."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        parser.read_string(text, source=name)
    except configparser.Error as exc:
        raise ValueError(f"config parse error: {exc}") from exc

    for section in _REQUIRED:
        if section not in parser:
            raise ValueError(f"missing required section [{section}]")
    for section in parser.sections():
        if section not in _SECTIONS:
            raise ValueError(f"unknown section [{section}]")
        allowed = _SECTIONS[section]
        for key in parser[section]:
            if key not in allowed:
                raise ValueError(f"unknown key {key!r} in section [{section}]")

    sched_kind = parser["schedule"].get("kind", "ode-linear")
    if sched_kind not in SCHEDULE_KINDS:
        raise ValueError(f"unknown schedule kind {sched_kind!r}")
    sched_eps = parser["schedule"].getfloat("epsilon", fallback=None)
    schedule = make_schedule(sched_kind, sched_eps)

    ch = parser["channel"]
    ch_kind = ch.get("kind", "awgn")
    if ch_kind == "compose":
        stages = ch.get("stages", "")
        parts = [s.strip() for s in stages.split("|") if s.strip()]
        if len(parts) < 2:
            raise ValueError("compose channel needs 'stages = a | b' with at least two stages")
        channel = ChannelSpec(
            kind="compose", parts=tuple(_parse_channel_inline(p) for p in parts)
        )
    else:
        params = {k: ch[k] for k in ch if k not in ("kind", "stages")}
        channel = _make_channel(ch_kind, params, where="section [channel]")

    tr = parser["transport"]
    transport = TransportConfig(
        steps=tr.getint("steps", 64),
        mode=tr.get("mode", "ode"),
        epsilon=tr.getfloat("epsilon", schedule.epsilon),
        scheme=tr.get("scheme", "heun"),
        t_min=tr.getfloat("t_min", 1e-3),
        eps_schedule=tr.get("eps_schedule", "constant"),
    )

    tn = parser["train"]
    loss = tn.get("loss", fallback=None)
    if loss is not None and loss not in LOSS_KINDS:
        raise ValueError(f"unknown loss kind {loss!r}")
    train = TrainConfig(
        schedule=schedule,
        transport=transport,
        outer_iters=tn.getint("outer_iters", 1000),
        inner_steps=tn.getint("inner_steps", 1),
        mix_p=tn.getfloat("mix_p", 0.9),
        batch_size=tn.getint("batch_size", 256),
        resample=tn.getint("resample", 1),
        lr=tn.getfloat("lr", 5e-4),
        warmup=tn.getint("warmup", 500),
        seed=tn.getint("seed", 0),
        loss=loss,
    )
    dataset = tn.get("dataset", "two-moon")
    if dataset not in _DATASETS:
        raise ValueError(f"unknown dataset {dataset!r}")

    ev = parser["eval"] if "eval" in parser else {}
    metric = ev.get("metric", "w2-exact") if ev else "w2-exact"
    if metric not in _METRICS:
        raise ValueError(f"unknown metric {metric!r}")

    return ExperimentConfig(
        name=name,
        schedule=schedule,
        channel=channel,
        transport=transport,
        train=train,
        dataset=dataset,
        n_train=tn.getint("n", 10000),
        n_heldout=tn.getint("heldout", 2000),
        metric=metric,
        n_projections=int(ev.get("n_projections", 128)) if ev else 128,
        track_every=int(ev.get("track_every", 0)) if ev else 0,
        seed=tn.getint("seed", 0),
        config_hash=git_blob_hash(text.encode()),
    )


def load_config(path) -> ExperimentConfig:
    with open(path, "r") as fh:
        text = fh.read()
    name = str(path).rsplit("/", 1)[-1]
    if name.endswith(".ini") or name.endswith(".cfg"):
        name = name.rsplit(".", 1)[0]
    return parse_config(text, name=name)
