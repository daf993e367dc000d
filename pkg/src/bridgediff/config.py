"""Plain-text run configuration: an INI file with one section per subsystem.

Unknown sections or keys are rejected; every command echoes its fully
resolved configuration into its output directory so runs are reproducible
from (config, seed) alone. CLI flags override file values.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field

from .audio import StftConfig
from .corpus import CorpusSpec
from .sampler import SamplerConfig
from .sde import OuveSde
from .trainer import TrainConfig

ENV_CONFIG_PATH = "BRIDGEDIFF_CONFIG"


def _parse_bool(raw: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _parse_floats(raw: str) -> tuple[float, ...]:
    return tuple(float(part) for part in raw.split(",") if part.strip())


def _parse_ints(raw: str) -> tuple[int, ...]:
    return tuple(int(part) for part in raw.split(",") if part.strip())


# section -> key -> (parser, default)
SCHEMA: dict[str, dict[str, tuple]] = {
    "stft": {
        "window_len": (int, 510),
        "hop": (int, 128),
        "window": (str, "hann"),
        "center": (_parse_bool, True),
    },
    "sde": {
        "gamma": (float, 1.5),
        "sigma_min": (float, 0.05),
        "sigma_max": (float, 0.5),
    },
    "denoiser": {
        "hidden": (_parse_ints, (256, 256)),
        "seed": (int, 0),
    },
    "train": {
        "epochs": (int, 200),
        "batch_size": (int, 32),
        "learning_rate": (float, 1e-3),
        "beta1": (float, 0.9),
        "beta2": (float, 0.999),
        "eps": (float, 1e-8),
        "t_min": (float, 0.03),
        "t_max": (float, 0.999),
        "loss_mode": (str, "x0"),
        "val_fraction": (float, 0.1),
        "seed": (int, 0),
    },
    "sampler": {
        "n_steps": (int, 30),
        "t_start": (float, 0.999),
        "t_end": (float, 0.03),
        "corrector_enabled": (_parse_bool, False),
        "corrector_steps": (int, 1),
        "corrector_snr": (float, 0.5),
        "seed": (int, 0),
    },
    "corpus": {
        "n_utterances": (int, 10),
        "duration_s": (float, 1.0),
        "sample_rate": (int, 16000),
        "clean_kind": (str, "harmonic"),
        "noise_kind": (str, "white"),
        "snr_grid": (_parse_floats, (0.0, 5.0, 10.0, 15.0)),
        "seed": (int, 0),
    },
    "metrics": {
        "cap_db": (float, 100.0),
    },
}


@dataclass
class RunConfig:
    values: dict[str, dict[str, object]] = field(default_factory=dict)

    @classmethod
    def defaults(cls) -> "RunConfig":
        return cls({s: {k: spec[1] for k, spec in keys.items()} for s, keys in SCHEMA.items()})

    @classmethod
    def load(cls, path=None) -> "RunConfig":
        """Defaults, overlaid with the INI file at path (or $BRIDGEDIFF_CONFIG)."""
        cfg = cls.defaults()
        if path is None:
            path = os.environ.get(ENV_CONFIG_PATH)
        if path is None:
            return cfg
        parser = configparser.ConfigParser()
        with open(path) as fh:
            parser.read_file(fh)
        for section in parser.sections():
            if section not in SCHEMA:
                raise ValueError(f"unknown config section [{section}]")
            for key, raw in parser.items(section):
                cfg.set(section, key, raw)
        return cfg

    def set(self, section: str, key: str, raw) -> None:
        if section not in SCHEMA or key not in SCHEMA[section]:
            raise ValueError(f"unknown config key [{section}] {key}")
        parse = SCHEMA[section][key][0]
        self.values[section][key] = parse(raw) if isinstance(raw, str) else raw

    def get(self, section: str, key: str):
        return self.values[section][key]

    def dump(self) -> str:
        lines = []
        for section, keys in self.values.items():
            lines.append(f"[{section}]")
            for key, value in keys.items():
                if isinstance(value, (tuple, list)):
                    value = ",".join(str(v) for v in value)
                lines.append(f"{key} = {value}")
            lines.append("")
        return "\n".join(lines)

    def write_resolved(self, out_dir) -> str:
        path = os.path.join(out_dir, "resolved.ini")
        with open(path, "w") as fh:
            fh.write(self.dump())
        return path

    # -- typed views ---------------------------------------------------------

    def stft_config(self) -> StftConfig:
        s = self.values["stft"]
        return StftConfig(s["window_len"], s["hop"], s["window"], s["center"])

    def sampler_config(self, **overrides) -> SamplerConfig:
        s = dict(self.values["sampler"])
        s.update({k: v for k, v in overrides.items() if v is not None})
        return SamplerConfig(**s)

    def train_config(self, **overrides) -> TrainConfig:
        s = dict(self.values["train"])
        s.update({k: v for k, v in overrides.items() if v is not None})
        return TrainConfig(**s)

    def corpus_spec(self, **overrides) -> CorpusSpec:
        s = dict(self.values["corpus"])
        s.update({k: v for k, v in overrides.items() if v is not None})
        return CorpusSpec(stft=self.stft_config(), **s)

    def ouve_sde(self) -> OuveSde:
        s = self.values["sde"]
        return OuveSde(s["gamma"], s["sigma_min"], s["sigma_max"])
