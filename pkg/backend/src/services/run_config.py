from dataclasses import asdict, dataclass, field, fields
from typing import Mapping, Optional, Tuple

from config.config import get_parameter, load_run_file
from src.common.exceptions import ConfigError
from src.services.model import ModelHyperparameters
from src.services.transforms import BLOCK_ORDER

LOSS_VARIANTS = ("full", "l1-only")


def _default(key: str):
    return field(default_factory=lambda: get_parameter(f"run.{key}"))


def _as_tuple(value) -> tuple:
    if isinstance(value, str):
        return tuple(v.strip() for v in value.split(",") if v.strip())
    if isinstance(value, (list, tuple)):
        return tuple(value)
    return (value,)


@dataclass
class RunConfig:
    tau: int = _default("tau")
    k: int = _default("k")
    stride: int = _default("stride")
    batch_size: int = _default("batch_size")
    epochs: int = _default("epochs")
    learning_rate: float = _default("learning_rate")
    hidden_ch: int = _default("hidden_ch")
    lstm_kernel: int = _default("lstm_kernel")
    dilated_channels: Tuple[int, ...] = _default("dilated_channels")
    dilations: Tuple[int, ...] = _default("dilations")
    detectors: Tuple[str, ...] = _default("detectors")
    loss: str = _default("loss")
    seed: int = _default("seed")
    train_stride: int = _default("train_stride")
    workers: int = 1
    data_dir: Optional[str] = None
    output_dir: str = field(default_factory=lambda: get_parameter("paths.output_dir"))

    def __post_init__(self):
        self.dilated_channels = _as_tuple(self.dilated_channels)
        self.dilations = _as_tuple(self.dilations)
        self.detectors = _as_tuple(self.detectors)
        if "all" in self.detectors:
            self.detectors = BLOCK_ORDER

    @classmethod
    def from_sources(cls, file_path: Optional[str] = None, overrides: Optional[Mapping] = None) -> "RunConfig":
        """Package defaults, then the run file, then explicit overrides."""
        values = {}
        if file_path:
            try:
                values.update(load_run_file(file_path))
            except OSError as e:
                raise ConfigError("config", f"cannot read run file [{file_path}]: {e}")
        values.update({k: v for k, v in (overrides or {}).items() if v is not None})
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(values) - known)
        if unknown:
            raise ConfigError(unknown[0], "unknown setting")
        config = cls(**values)
        config.validate()
        return config

    def effective_train_stride(self) -> int:
        return self.train_stride or self.k

    def _check_int(self, name: str, minimum: int) -> None:
        value = getattr(self, name)
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(name, f"must be an integer, got {value!r}")
        if value < minimum:
            raise ConfigError(name, f"must be >= {minimum}, got {value}")

    def validate(self) -> "RunConfig":
        for name, minimum in (
            ("tau", 2),
            ("k", 2),
            ("stride", 1),
            ("batch_size", 2),
            ("epochs", 1),
            ("hidden_ch", 1),
            ("lstm_kernel", 1),
            ("seed", 0),
            ("train_stride", 0),
            ("workers", 1),
        ):
            self._check_int(name, minimum)
        if self.k % 2:
            raise ConfigError("k", f"must be even, got {self.k}")
        if self.k >= self.tau:
            raise ConfigError("k", f"must be smaller than tau={self.tau}, got {self.k}")
        if (self.tau - self.k) // self.stride < 1:
            raise ConfigError("stride", f"tau - k = {self.tau - self.k} leaves no history window at stride {self.stride}")
        if self.lstm_kernel % 2 == 0:
            raise ConfigError("lstm_kernel", f"must be odd for same padding, got {self.lstm_kernel}")
        try:
            lr = float(self.learning_rate)
        except (TypeError, ValueError):
            raise ConfigError("learning_rate", f"must be a number, got {self.learning_rate!r}")
        if not lr > 0:
            raise ConfigError("learning_rate", f"must be positive, got {self.learning_rate}")
        self.learning_rate = lr
        if not self.detectors:
            raise ConfigError("detectors", "at least one detector must be enabled")
        unknown = [d for d in self.detectors if d not in BLOCK_ORDER]
        if unknown:
            raise ConfigError("detectors", f"unknown detectors {unknown}, choose from {list(BLOCK_ORDER)}")
        if len(set(self.detectors)) != len(self.detectors):
            raise ConfigError("detectors", f"duplicate entries in {list(self.detectors)}")
        if self.loss not in LOSS_VARIANTS:
            raise ConfigError("loss", f"must be one of {list(LOSS_VARIANTS)}, got {self.loss!r}")
        if len(self.dilated_channels) != len(self.dilations):
            raise ConfigError(
                "dilations", f"{len(self.dilations)} dilations for {len(self.dilated_channels)} channel sizes"
            )
        if not all(isinstance(c, int) and c >= 1 for c in self.dilated_channels):
            raise ConfigError("dilated_channels", f"must be positive integers, got {list(self.dilated_channels)}")
        if not all(isinstance(r, int) and r >= 1 for r in self.dilations):
            raise ConfigError("dilations", f"must be positive integers, got {list(self.dilations)}")
        if any(a >= b for a, b in zip(self.dilations, self.dilations[1:])):
            raise ConfigError("dilations", f"must be strictly increasing, got {list(self.dilations)}")
        if "spatial" in self.detectors and self.tau - self.k < 1 + 2 * sum(self.dilations):
            raise ConfigError(
                "tau", f"history tau - k = {self.tau - self.k} is shorter than the dilated receptive field"
            )
        return self

    def hyperparameters(self, m: int) -> ModelHyperparameters:
        ordered = tuple(d for d in BLOCK_ORDER if d in self.detectors)
        return ModelHyperparameters(
            m=m,
            tau=self.tau,
            k=self.k,
            stride=self.stride,
            hidden_ch=self.hidden_ch,
            lstm_kernel=self.lstm_kernel,
            dilated_channels=tuple(self.dilated_channels),
            dilations=tuple(self.dilations),
            detectors=ordered,
        )

    def to_dict(self) -> dict:
        return asdict(self)
