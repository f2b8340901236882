"""Line-based configuration: `key = value`, `#` comments, dotted sections.

Unknown keys are rejected; every key has a documented default, and
--print-config echoes the fully resolved configuration.
"""

from __future__ import annotations

from .data import SyntheticSpec
from .errors import UsageError
from .model import ModelConfig
from .train import TrainConfig


def _parse_bool(s: str) -> bool:
    if s.lower() in ("true", "yes", "1", "on"):
        return True
    if s.lower() in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _parse_int_list(s: str) -> tuple[int, ...]:
    return tuple(int(tok) for tok in s.split(",") if tok.strip())


def _parse_stages(s: str) -> tuple[tuple[int, int], ...]:
    """Stage list like '2x32,2x64,2x128' (blocks x base width)."""
    stages = []
    for tok in s.split(","):
        blocks, width = tok.strip().split("x")
        stages.append((int(blocks), int(width)))
    return tuple(stages)


# key -> (default string, parser, help)
CONFIG_KEYS = {
    "model.variant": ("p4m", str, "plain | p4 | p4m"),
    "model.attention": ("true", _parse_bool, "enable channel attention"),
    "model.stages": ("2x32,2x64,2x128", _parse_stages, "blocks x base width per stage"),
    "model.input_channels": ("1", int, "image channels"),
    "model.input_size": ("64", int, "square input size"),
    "model.num_classes": ("10", int, "classification classes"),
    "model.embed_dim": ("64", int, "embedding dimension"),
    "model.attention_reduction": ("4", int, "channel attention reduction ratio"),
    "model.seed": ("12345", int, "weight initialization seed"),
    "train.phase": ("classify", str, "classify | retrieve"),
    "train.epochs": ("30", int, "training epochs"),
    "train.batch": ("32", int, "classification batch size"),
    "train.lr": ("auto", str, "learning rate; auto = 0.01 classify / 0.001 retrieve"),
    "train.momentum": ("0.9", float, "SGD momentum"),
    "train.margin": ("0.2", float, "triplet margin"),
    "train.split_ratio": ("0.7", float, "train fraction of the stratified split"),
    "train.seed": ("777", int, "training seed"),
    "train.rotation_augment": ("false", _parse_bool, "rotate training batches"),
    "train.identities_per_batch": ("8", int, "identities per retrieval batch"),
    "train.views_per_identity": ("4", int, "views per identity per batch"),
    "train.log_timing": ("false", _parse_bool,
                         "write wall seconds into the metrics log (breaks "
                         "byte-identical logs)"),
    "data.root": ("data", str, "dataset directory containing manifest.tsv"),
    "data.train_views": ("0,1", _parse_int_list, "view ids used for training"),
    "eval.n_values": ("1,5,10", _parse_int_list, "Recall@n cut-offs"),
    "eval.seed": ("99", int, "query rotation seed"),
    "eval.database_views": ("2", _parse_int_list, "view ids forming the database"),
    "eval.query_views": ("3", _parse_int_list, "view ids forming the queries"),
    "eval.batch": ("32", int, "embedding batch size"),
    "threads": ("1", int, "worker threads (only 1 is supported)"),
}

SPEC_KEYS = {
    "num_classes": ("10", int, "pattern classes"),
    "instances_per_class": ("20", int, "instances per class"),
    "views_per_instance": ("4", int, "views per instance"),
    "image_size": ("32", int, "square image size (even)"),
    "noise_sigma": ("0.03", float, "per-view Gaussian pixel noise"),
    "jitter_px": ("2", int, "max per-view translation jitter"),
    "seed": ("20240", int, "generator seed"),
}


def _parse_lines(text: str, registry: dict, label: str) -> dict:
    values = {key: parser(default) for key, (default, parser, _) in registry.items()}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{label} line {line_no}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in registry:
            raise UsageError(f"{label} line {line_no}: unknown key {key!r}")
        _, parser, _ = registry[key]
        try:
            values[key] = parser(value)
        except (ValueError, IndexError) as exc:
            raise UsageError(f"{label} line {line_no}: bad value for {key!r}: {exc}") from exc
    return values


class RunConfig:
    def __init__(self, values: dict):
        self.values = values
        if values["threads"] != 1:
            raise UsageError("threads > 1 is not supported in this build")

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from exc
        return cls(_parse_lines(text, CONFIG_KEYS, str(path)))

    @classmethod
    def defaults(cls) -> "RunConfig":
        return cls(_parse_lines("", CONFIG_KEYS, "<defaults>"))

    def __getitem__(self, key: str):
        return self.values[key]

    def model_config(self) -> ModelConfig:
        v = self.values
        return ModelConfig(
            variant=v["model.variant"],
            attention_enabled=v["model.attention"],
            stages=v["model.stages"],
            input_channels=v["model.input_channels"],
            input_size=v["model.input_size"],
            num_classes=v["model.num_classes"],
            embed_dim=v["model.embed_dim"],
            attention_reduction=v["model.attention_reduction"],
            seed=v["model.seed"],
        )

    def resolved_lr(self, phase: str) -> float:
        raw = self.values["train.lr"]
        if raw == "auto":
            return 0.01 if phase == "classify" else 0.001
        try:
            return float(raw)
        except ValueError:
            raise UsageError(f"train.lr must be a number or 'auto', got {raw!r}") from None

    def train_config(self, phase: str, allow_cold_start: bool = False) -> TrainConfig:
        v = self.values
        return TrainConfig(
            phase=phase,
            epochs=v["train.epochs"],
            batch_size=v["train.batch"],
            lr=self.resolved_lr(phase),
            momentum=v["train.momentum"],
            margin=v["train.margin"],
            split_ratio=v["train.split_ratio"],
            seed=v["train.seed"],
            rotation_augment=v["train.rotation_augment"],
            identities_per_batch=v["train.identities_per_batch"],
            views_per_identity=v["train.views_per_identity"],
            allow_cold_start=allow_cold_start,
        )

    def render(self) -> str:
        lines = []
        for key in sorted(self.values):
            val = self.values[key]
            if isinstance(val, tuple) and val and isinstance(val[0], tuple):
                text = ",".join(f"{b}x{w}" for b, w in val)
            elif isinstance(val, tuple):
                text = ",".join(str(x) for x in val)
            elif isinstance(val, bool):
                text = "true" if val else "false"
            else:
                text = str(val)
            lines.append(f"{key} = {text}")
        return "\n".join(lines) + "\n"


def load_synthetic_spec(path=None) -> SyntheticSpec:
    if path is None:
        values = _parse_lines("", SPEC_KEYS, "<defaults>")
    else:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise UsageError(f"cannot read spec {path}: {exc}") from exc
        values = _parse_lines(text, SPEC_KEYS, str(path))
    return SyntheticSpec(**values)
