"""Experiment configuration: flat key=value files with dotted sections.

Example::

    # toy regression, dual-pass estimator
    dataset.name = toy_regression
    dataset.n_train = 1000
    dataset.n_test = 500
    estimator.kind = zigzag
    model.recipe = synthetic_regression
    train.epochs = 4000
    train.lr = 0.01
    seeds = 1,2,3
    output.dir = out/toy_zigzag

Values are typed by shape: integers, floats, booleans (true/false), and
comma-separated lists; an empty value means "use the default". The config
hash is computed over the canonicalized parsed mapping, so formatting and
comments never change it, while any semantic change does.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

DATASET_NAMES = ("toy_regression", "toy_classification",
                 "mnist_vs_fashion", "split_mnist")

_DATASET_TASKS = {
    "toy_regression": "regression",
    "toy_classification": "classification",
    "mnist_vs_fashion": "classification",
    "split_mnist": "classification",
}

_DATASET_RECIPES = {
    "toy_regression": "synthetic_regression",
    "toy_classification": "synthetic_classification",
    "mnist_vs_fashion": "mnist_mlp",
    "split_mnist": "mnist_mlp",
}


def _convert(value: str):
    if value == "":
        return None
    if "," in value:
        return [_convert(v.strip()) for v in value.split(",")]
    low = value.lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        return int(value)
    except ValueError:
        pass
    try:
        return float(value)
    except ValueError:
        pass
    return value


def parse_key_values(text: str) -> dict:
    pairs: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key = value, got {raw!r}")
        key, _, value = line.partition("=")
        pairs[key.strip()] = _convert(value.strip())
    return pairs


@dataclass
class ExperimentConfig:
    dataset: dict = field(default_factory=lambda: {"name": "toy_regression"})
    estimator: dict = field(default_factory=lambda: {"kind": "zigzag"})
    model: dict = field(default_factory=dict)
    train: dict = field(default_factory=dict)
    seeds: list[int] = field(default_factory=lambda: [1, 2, 3])
    output_dir: str = "out"

    def __post_init__(self):
        if not self.seeds:
            raise ValueError("seeds must be non-empty")
        name = self.dataset.get("name")
        if name not in DATASET_NAMES:
            raise ValueError(
                f"unknown dataset {name!r}; valid: {', '.join(DATASET_NAMES)}"
            )

    @property
    def task(self) -> str:
        return _DATASET_TASKS[self.dataset["name"]]

    @property
    def recipe(self) -> str:
        return self.model.get("recipe") or _DATASET_RECIPES[self.dataset["name"]]

    def canonical_items(self) -> list[tuple[str, str]]:
        items = []
        for section, mapping in (("dataset", self.dataset),
                                 ("estimator", self.estimator),
                                 ("model", self.model), ("train", self.train)):
            for key in sorted(mapping):
                if mapping[key] is not None:
                    items.append((f"{section}.{key}", repr(mapping[key])))
        items.append(("seeds", repr(list(self.seeds))))
        return items

    def hash(self) -> str:
        payload = "\n".join(f"{k}={v}" for k, v in self.canonical_items())
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


def load_config(source) -> ExperimentConfig:
    """Parse a config file path or raw config text."""
    if isinstance(source, Path):
        text = source.read_text(encoding="utf-8")
    elif isinstance(source, str) and "=" not in source:
        text = Path(source).read_text(encoding="utf-8")
    else:
        text = str(source)
    pairs = parse_key_values(text)

    sections: dict[str, dict] = {"dataset": {}, "estimator": {},
                                 "model": {}, "train": {}}
    seeds = [1, 2, 3]
    output_dir = "out"
    for key, value in pairs.items():
        if key == "seeds":
            if value is None:
                continue
            seeds = value if isinstance(value, list) else [value]
            if not all(isinstance(s, int) for s in seeds):
                raise ValueError(f"seeds must be integers, got {seeds!r}")
        elif key == "output.dir":
            output_dir = str(value)
        else:
            section, _, name = key.partition(".")
            if section not in sections or not name:
                raise ValueError(f"unknown config key {key!r}")
            # nested keys like dataset.ood.lo keep their dotted remainder
            if value is not None:
                sections[section][name] = value
    return ExperimentConfig(dataset=sections["dataset"],
                            estimator=sections["estimator"],
                            model=sections["model"], train=sections["train"],
                            seeds=list(seeds), output_dir=output_dir)
