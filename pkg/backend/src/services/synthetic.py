"""Synthetic multivariate series with the four injected anomaly patterns.

Base channels are noisy sinusoids; some channels follow a lead channel with a
fixed sign. Anomalies are injected into the test split only:

* frequency-change: the channel's frequency doubles
* correlation-change: a follower channel flips the sign of its coupling
* abrupt-value: a spike of several standard deviations lasting 1-3 steps
* subtle-value: a linear drift reaching 1.5 standard deviations at segment end
"""

from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from config.config import get_parameter
from src.common.exceptions import ContractViolation, require
from src.common.logger import get_logger
from src.services.dataset import Dataset

logger = get_logger("synthetic")

KINDS = ("frequency-change", "correlation-change", "abrupt-value", "subtle-value")
SPIKE_SIGMAS = 6.0
DRIFT_SIGMAS = 1.5
MIN_RATIO = 0.01
MAX_RATIO = 0.15
# periods with a whole number of cycles in a 30-step window, so spectral bins stay sharp
PERIOD_CYCLE = (30.0, 15.0, 30.0, 10.0, 15.0)


@dataclass(frozen=True)
class AnomalySegment:
    start: int
    end: int
    kind: str
    channel: int

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ContractViolation(f"unknown anomaly kind '{self.kind}'")
        require(0 <= self.start < self.end, f"bad segment [{self.start}, {self.end})")


@dataclass(frozen=True)
class Coupling:
    lead: int
    follower: int
    sign: float = 1.0


@dataclass
class SyntheticSpec:
    m: int
    train_length: int
    test_length: int
    seed: int
    segments: List[AnomalySegment] = field(default_factory=list)
    periods: List[float] = field(default_factory=list)
    amplitudes: List[float] = field(default_factory=list)
    noise: float = 0.05
    couplings: List[Coupling] = field(default_factory=list)

    def __post_init__(self):
        if not self.periods:
            self.periods = [PERIOD_CYCLE[c % len(PERIOD_CYCLE)] for c in range(self.m)]
        if not self.amplitudes:
            self.amplitudes = [float(get_parameter("synthetic.amplitude", 1.0))] * self.m

    def validate(self) -> None:
        require(self.m >= 1, "synthetic series needs at least one channel")
        require(self.train_length > 0 and self.test_length > 0, "split lengths must be positive")
        require(len(self.periods) == self.m and len(self.amplitudes) == self.m, "one period and amplitude per channel")
        require(all(p >= 2 for p in self.periods), "periods must be at least 2 steps")
        followers = set()
        for c in self.couplings:
            require(0 <= c.lead < self.m and 0 <= c.follower < self.m, f"coupling {c} outside the channels")
            require(c.lead != c.follower and c.follower not in followers, f"bad coupling {c}")
            followers.add(c.follower)

        ordered = sorted(self.segments, key=lambda s: s.start)
        for seg in ordered:
            if seg.end > self.test_length:
                raise ContractViolation(f"segment [{seg.start}, {seg.end}) runs past the test split")
            require(0 <= seg.channel < self.m, f"segment channel {seg.channel} out of range")
            if seg.kind == "correlation-change":
                require(seg.channel in followers, f"correlation-change needs a follower channel, got {seg.channel}")
        for a, b in zip(ordered, ordered[1:]):
            if b.start < a.end:
                raise ContractViolation(f"segments [{a.start}, {a.end}) and [{b.start}, {b.end}) overlap")
        if ordered:
            ratio = sum(s.end - s.start for s in ordered) / self.test_length
            if not MIN_RATIO <= ratio <= MAX_RATIO:
                raise ContractViolation(f"anomalous fraction {ratio:.4f} outside [{MIN_RATIO}, {MAX_RATIO}]")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "SyntheticSpec":
        data = dict(data)
        data["segments"] = [AnomalySegment(**s) for s in data.get("segments", [])]
        data["couplings"] = [Coupling(**c) for c in data.get("couplings", [])]
        return cls(**data)

    @classmethod
    def default(
        cls,
        m: Optional[int] = None,
        train_length: Optional[int] = None,
        test_length: Optional[int] = None,
        seed: Optional[int] = None,
        kinds: Sequence[str] = KINDS,
        anomaly_ratio: Optional[float] = None,
        warmup: int = 600,
    ) -> "SyntheticSpec":
        """Mixed layout covering ``kinds`` at roughly ``anomaly_ratio`` of the test split.

        The first ``warmup`` test steps stay normal so every segment can be scored.
        """
        m = m or int(get_parameter("synthetic.m"))
        train_length = train_length or int(get_parameter("synthetic.train_length"))
        test_length = test_length or int(get_parameter("synthetic.test_length"))
        seed = int(get_parameter("synthetic.seed")) if seed is None else seed
        ratio = anomaly_ratio or float(get_parameter("synthetic.anomaly_ratio"))
        for kind in kinds:
            if kind not in KINDS:
                raise ContractViolation(f"unknown anomaly kind '{kind}'")
        require(m >= 2 or "correlation-change" not in kinds, "correlation-change needs at least two channels")
        require(test_length > warmup, f"test split of {test_length} steps leaves no room after warmup {warmup}")

        rng = np.random.default_rng(seed)
        couplings = [Coupling(lead=c - 1, follower=c, sign=1.0 if c % 4 == 1 else -1.0) for c in range(1, m, 2)]
        followers = [c.follower for c in couplings]
        leads = [c for c in range(m) if c not in followers]

        budget = ratio * test_length
        plan: List[Tuple[str, int]] = []
        others = [k for k in kinds if k != "abrupt-value"]
        if "abrupt-value" in kinds:
            n_spikes = 4 if others else max(1, int(round(budget / 2)))
            spikes = [int(rng.integers(1, 4)) for _ in range(n_spikes)]
            plan.extend(("abrupt-value", n) for n in spikes)
            budget -= sum(spikes)
        if others:
            length = max(1, int(budget // (2 * len(others))))
            plan.extend((kind, length) for kind in others for _ in range(2))
        order = rng.permutation(len(plan))
        plan = [plan[i] for i in order]

        slot = (test_length - warmup) // max(1, len(plan))
        segments = []
        for idx, (kind, length) in enumerate(plan):
            require(length < slot, f"test split too short for {len(plan)} segments")
            start = warmup + idx * slot + int(rng.integers(0, slot - length))
            if kind == "correlation-change":
                channel = int(rng.choice(followers))
            elif kind == "frequency-change":
                channel = int(rng.choice(leads))
            else:
                channel = int(rng.integers(0, m))
            segments.append(AnomalySegment(start, start + length, kind, channel))

        return cls(
            m=m,
            train_length=train_length,
            test_length=test_length,
            seed=seed,
            segments=segments,
            noise=float(get_parameter("synthetic.noise")),
            couplings=couplings,
        )


def _segment_masks(spec: SyntheticSpec, total: int, offset: int) -> Dict[str, np.ndarray]:
    masks = {kind: np.zeros((spec.m, total), dtype=bool) for kind in KINDS}
    for seg in spec.segments:
        masks[seg.kind][seg.channel, offset + seg.start : offset + seg.end] = True
    return masks


def generate_synthetic(spec: SyntheticSpec) -> Dataset:
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    total = spec.train_length + spec.test_length
    offset = spec.train_length
    masks = _segment_masks(spec, total, offset)

    freq = np.array([[1.0 / p] for p in spec.periods]) * np.ones((spec.m, total))
    freq[masks["frequency-change"]] *= 2.0
    phase0 = rng.uniform(0.0, 2.0 * np.pi, size=(spec.m, 1))
    # phase accumulation keeps the signal continuous across frequency changes
    phase = 2.0 * np.pi * np.cumsum(freq, axis=1) + phase0
    amplitudes = np.asarray(spec.amplitudes)[:, None]
    clean = amplitudes * np.sin(phase)

    for c in spec.couplings:
        sign = np.full(total, c.sign)
        sign[masks["correlation-change"][c.follower]] *= -1.0
        clean[c.follower] = sign * spec.amplitudes[c.follower] * np.sin(phase[c.lead])

    values = clean + spec.noise * rng.standard_normal((spec.m, total))
    sigma = values[:, :offset].std(axis=1)

    for seg in spec.segments:
        lo, hi = offset + seg.start, offset + seg.end
        ch = seg.channel
        if seg.kind == "abrupt-value":
            direction = 1.0 if rng.random() < 0.5 else -1.0
            values[ch, lo:hi] += direction * SPIKE_SIGMAS * sigma[ch]
        elif seg.kind == "subtle-value":
            values[ch, lo:hi] += np.linspace(0.0, DRIFT_SIGMAS * sigma[ch], hi - lo + 1)[1:]

    labels = np.zeros(spec.test_length, dtype=bool)
    for seg in spec.segments:
        labels[seg.start : seg.end] = True

    logger.info(
        f"Generated synthetic series: m={spec.m}, train={spec.train_length}, "
        f"test={spec.test_length}, segments={len(spec.segments)}, anomaly_ratio={labels.mean():.4f}"
    )
    return Dataset.from_raw(values[:, :offset], values[:, offset:], labels)
