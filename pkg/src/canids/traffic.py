"""Synthetic CAN traffic generation and attack injection.

Normal traffic is modelled as a pool of periodic ECU broadcasts (each id has
a period, jitter, and a payload generator).  Attacks are injected on top of
a sorted base stream:

* DoS      -- highest-priority id 0x0000, all-zero payload, one frame every
              0.3 ms inside the scenario window.
* Fuzzy    -- uniformly random id in [0, 0x7FF] with random DLC/payload,
              one frame every 0.5 ms.
* RPM/Gear -- a fixed forged payload injected on a legitimate target id.

The experiment builder lays the scenarios out on a wall-clock schedule
(RPM spoofing in the 16h window, gear spoofing 17h, fuzzy 17-19h, DoS
18-20h, normal traffic throughout 16-21h) and sizes the default dataset to
roughly 350k frames with Normal the majority class.  Hours are mapped from
timestamps with a fixed configured UTC offset, never the system timezone.

Everything is a pure function of (config, seed): identical inputs yield
bit-identical frame sequences.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .frames import MAX_DLC, MAX_STD_ID, CanFrame, ClassLabel

log = logging.getLogger(__name__)

DOS_INJECTION_PERIOD = 0.0003  # seconds between DoS frames
FUZZY_INJECTION_PERIOD = 0.0005  # seconds between fuzzy frames
DOS_TARGET_ID = 0x0000

# payload models for the periodic id streams
PAYLOAD_STYLES = ("counter", "sensor", "constant", "noise", "rpm", "gear", "diag")


@dataclass(frozen=True)
class IdSpec:
    """One periodic broadcast stream: (can_id, period, payload seed) plus
    the payload model used to fill the data bytes."""

    can_id: int
    period: float
    payload_seed: int
    style: str = "counter"
    dlc: int = 8
    # style knobs: sensor value ceiling, probability of emitting the
    # saturated "peak" payload (rpm/gear styles share the spoofed pattern)
    value_max: int = 0x0FFF
    peak_prob: float = 0.0
    # low-rate diagnostic streams (OBD polling) only run during capture
    # windows at least this long
    min_window: float = 0.0

    def __post_init__(self):
        if not 0 <= self.can_id <= MAX_STD_ID:
            raise ValueError(f"can_id {self.can_id:#x} outside 11-bit range")
        if self.period <= 0:
            raise ValueError("period must be positive")
        if self.style not in PAYLOAD_STYLES:
            raise ValueError(f"unknown payload style {self.style!r}")
        if not 0 <= self.dlc <= MAX_DLC:
            raise ValueError("dlc must be in [0, 8]")


@dataclass(frozen=True)
class NormalProfile:
    """Periodic normal-traffic profile over one contiguous time window."""

    id_pool: tuple[IdSpec, ...]
    jitter_fraction: float = 0.15
    duration: float = 60.0
    start_epoch: float = 0.0

    def __post_init__(self):
        if not self.id_pool:
            raise ValueError("id_pool must not be empty")
        if not 0 <= self.jitter_fraction < 0.5:
            raise ValueError("jitter_fraction must be in [0, 0.5)")
        if self.duration <= 0:
            raise ValueError("duration must be positive")


@dataclass(frozen=True)
class AttackScenario:
    """One attack injection campaign.

    ``window`` is (start_hour, end_hour) on the local clock, fractional
    hours allowed.  ``injection_jitter`` perturbs each injection time by
    up to +/- jitter*period (0 keeps the exact grid).
    """

    kind: ClassLabel
    injection_period: float
    window: tuple[float, float]
    target_id: int | None = None
    fixed_payload: tuple[int, ...] | None = None
    rng_seed: int = 0
    injection_jitter: float = 0.0

    def __post_init__(self):
        if self.kind == ClassLabel.NORMAL:
            raise ValueError("attack kind cannot be Normal")
        if self.injection_period <= 0:
            raise ValueError("injection_period must be positive")
        if not 0 <= self.injection_jitter < 0.5:
            raise ValueError("injection_jitter must be in [0, 0.5)")
        if self.window[0] >= self.window[1]:
            raise ValueError("window start must precede end")
        if self.kind == ClassLabel.DOS:
            if self.target_id not in (None, DOS_TARGET_ID):
                raise ValueError("DoS always targets id 0x0000")
            object.__setattr__(self, "target_id", DOS_TARGET_ID)
        elif self.kind == ClassLabel.FUZZY:
            if self.target_id is not None:
                raise ValueError("fuzzy attacks pick random ids; target_id must be absent")
        else:  # spoofing
            if self.target_id is None or self.fixed_payload is None:
                raise ValueError(f"{self.kind.display_name} requires target_id and fixed_payload")
            if not 0 <= self.target_id <= MAX_STD_ID:
                raise ValueError("target_id outside 11-bit range")
            if not all(0 <= b <= 255 for b in self.fixed_payload):
                raise ValueError("fixed_payload bytes must be in [0, 255]")


def _quantize_us(ts: np.ndarray) -> np.ndarray:
    """Snap timestamps to microsecond resolution (matches the CSV format)."""
    return np.asarray([float(f"{t:.6f}") for t in ts])


def _payload_stream(spec: IdSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """Produce n payload rows (n x dlc uint8) for one id stream."""
    dlc = spec.dlc
    out = np.zeros((n, dlc), dtype=np.uint8)
    fixed = np.frombuffer(
        np.uint64((spec.can_id * 2654435761 + 0x9E3779B9) % 2**64).tobytes(), dtype=np.uint8
    )
    if spec.style == "counter":
        # rolling counters ride in the high half; trailing bytes are
        # high-range status constants (keeps live bytes above fuzz noise)
        cnt = np.arange(n, dtype=np.int64)
        for j in range(dlc):
            if j == 0:
                out[:, j] = 0x80 | (cnt & 0x7F)
            elif j == 1:
                out[:, j] = 0x80 | ((cnt >> 7) & 0x7F)
            else:
                out[:, j] = fixed[j % 8] | 0xC1
    elif spec.style == "constant":
        for j in range(dlc):
            out[:, j] = fixed[j % 8] | 0xC1
    elif spec.style == "diag":
        # diagnostic responses: fixed high marker byte then id-specific data
        out[:, 0] = 0xFE
        for j in range(1, dlc):
            out[:, j] = fixed[j % 8] | 0xC1
    elif spec.style == "noise":
        # noisy sensor block: leading bytes churn, the rest stay constant
        out[:] = np.tile(fixed[:dlc] | 0x01, (n, 1))
        churn = min(3, dlc)
        out[:, :churn] = rng.integers(0, 256, size=(n, churn), dtype=np.uint8)
    elif spec.style in ("sensor", "rpm"):
        # reflected walk kept below the ceiling; saturated readings (the
        # value the spoofed payload forges) only occur at peak_prob
        walk_max = spec.value_max - max(spec.value_max // 8, 1)
        steps = rng.integers(-96, 97, size=n)
        value = np.clip(np.cumsum(steps) + walk_max // 2, 0, walk_max)
        if spec.peak_prob > 0:
            peak = rng.random(n) < spec.peak_prob
            value[peak] = spec.value_max
        out[:, 0] = 0x05
        out[:, 1] = (value >> 8) & 0xFF
        out[:, 2] = value & 0xFF
        if dlc > 3:
            # limit flag: raised only when the reading saturates
            out[:, 3] = np.where(value >= spec.value_max, 0xFF, 0x10)
        for j in range(4, dlc):
            out[:, j] = fixed[j % 8] | 0xC1
        if dlc > 4:
            out[:, 4] = rng.integers(0, 4, size=n) | 0x20  # low-entropy status bits
    elif spec.style == "gear":
        # gear selector walks 1..5; top gear (the value spoofed frames
        # forge) only occurs at peak_prob.  A torque byte scales with the
        # gear so shifts move more than one byte value.
        steps = rng.integers(-1, 2, size=n)
        gear = np.clip(np.cumsum(steps) + 3, 1, 5)
        if spec.peak_prob > 0:
            peak = rng.random(n) < spec.peak_prob
            gear[peak] = 6
        out[:, 0] = 0x00 | 0x08
        out[:, 1] = gear
        if dlc > 2:
            out[:, 2] = gear * 0x26
        for j in range(3, dlc):
            out[:, j] = fixed[j % 8] | 0xC1
    return out


def sensor_peak_payload(spec: IdSpec) -> tuple[int, ...]:
    """The saturated payload a sensor/rpm id emits at its value ceiling."""
    n1 = _payload_stream(replace(spec, peak_prob=1.0), 1, np.random.default_rng(0))
    return tuple(int(b) for b in n1[0])


def gear_top_payload(spec: IdSpec) -> tuple[int, ...]:
    n1 = _payload_stream(replace(spec, peak_prob=1.0), 1, np.random.default_rng(0))
    return tuple(int(b) for b in n1[0])


def _grid_count(span: float, period: float) -> int:
    """Number of k >= 0 with k*period < span (half-open window)."""
    if span <= 0:
        return 0
    return int(np.ceil(span / period - 1e-9))


def generate_normal(profile: NormalProfile, seed: int = 0) -> list[CanFrame]:
    """Generate the profile's periodic streams, merged and timestamp-sorted.

    Each id stream k emits at start + k*period with uniform jitter of
    +/- jitter_fraction * period; deterministic for a given seed.
    """
    streams: list[tuple[np.ndarray, int, int, np.ndarray]] = []
    for spec in sorted(profile.id_pool, key=lambda s: (s.can_id, s.period)):
        if profile.duration < spec.min_window:
            continue
        rng = np.random.default_rng([seed, spec.payload_seed, spec.can_id])
        n = _grid_count(profile.duration, spec.period)
        if n == 0:
            continue
        base = profile.start_epoch + np.arange(n) * spec.period
        if profile.jitter_fraction > 0:
            base = base + rng.uniform(-1, 1, size=n) * profile.jitter_fraction * spec.period
        ts = _quantize_us(np.maximum(base, profile.start_epoch))
        payload = _payload_stream(spec, n, rng)
        streams.append((ts, spec.can_id, spec.dlc, payload))

    all_ts = np.concatenate([s[0] for s in streams])
    all_ids = np.concatenate([np.full(len(s[0]), s[1]) for s in streams])
    all_dlc = np.concatenate([np.full(len(s[0]), s[2]) for s in streams])
    payloads = [s[3] for s in streams]
    row_of = np.concatenate([np.stack([np.full(len(s[0]), i), np.arange(len(s[0]))], axis=1) for i, s in enumerate(streams)])

    order = np.argsort(all_ts, kind="stable")
    frames = []
    for idx in order:
        si, ri = row_of[idx]
        frames.append(
            CanFrame(
                float(all_ts[idx]),
                int(all_ids[idx]),
                int(all_dlc[idx]),
                tuple(int(b) for b in payloads[si][ri]),
                ClassLabel.NORMAL,
            )
        )
    return frames


def _window_seconds(scenario: AttackScenario, day_epoch: float) -> tuple[float, float]:
    return day_epoch + scenario.window[0] * 3600.0, day_epoch + scenario.window[1] * 3600.0


def build_injected_frames(scenario: AttackScenario, start: float, end: float) -> list[CanFrame]:
    """Materialize a scenario's frames over the absolute window [start, end)."""
    n = _grid_count(end - start, scenario.injection_period)
    if n <= 0:
        return []
    rng = np.random.default_rng([scenario.rng_seed, int(scenario.kind)])
    ts = start + np.arange(n) * scenario.injection_period
    if scenario.injection_jitter > 0:
        ts = ts + rng.uniform(-1, 1, size=n) * scenario.injection_jitter * scenario.injection_period
        ts = np.clip(ts, start, None)
    ts = _quantize_us(ts)

    frames: list[CanFrame] = []
    if scenario.kind == ClassLabel.DOS:
        payload = tuple([0] * MAX_DLC)
        frames = [CanFrame(float(t), DOS_TARGET_ID, MAX_DLC, payload, ClassLabel.DOS) for t in ts]
    elif scenario.kind == ClassLabel.FUZZY:
        ids = rng.integers(0, MAX_STD_ID + 1, size=n)
        dlcs = rng.integers(0, MAX_DLC + 1, size=n)
        raw = rng.integers(0, 256, size=(n, MAX_DLC), dtype=np.uint8)
        frames = [
            CanFrame(float(t), int(i), int(d), tuple(int(b) for b in raw[k, :d]), ClassLabel.FUZZY)
            for k, (t, i, d) in enumerate(zip(ts, ids, dlcs))
        ]
    else:
        payload = tuple(scenario.fixed_payload)
        frames = [
            CanFrame(float(t), scenario.target_id, len(payload), payload, scenario.kind) for t in ts
        ]
    frames.sort(key=lambda f: f.timestamp)
    return frames


def inject_attack(
    base: list[CanFrame], scenario: AttackScenario, day_epoch: float = 0.0
) -> list[CanFrame]:
    """Merge scenario frames into a sorted base stream.

    The injection interval is the intersection of the scenario window with
    the base time range; an empty intersection is a no-op.  Timestamp
    collisions order the injected frame first; timestamps are never
    perturbed by the merge.
    """
    if not base:
        raise ValueError("base stream is empty")
    w0, w1 = _window_seconds(scenario, day_epoch)
    start = max(w0, base[0].timestamp)
    end = min(w1, base[-1].timestamp)
    injected = build_injected_frames(scenario, start, end)
    if not injected:
        return list(base)
    return merge_streams(base, injected)


def merge_streams(base: list[CanFrame], injected: list[CanFrame]) -> list[CanFrame]:
    """Deterministic sorted merge; ties order injected before base."""
    tagged = [(f.timestamp, 1, i, f) for i, f in enumerate(base)]
    tagged += [(f.timestamp, 0, i, f) for i, f in enumerate(injected)]
    tagged.sort(key=lambda t: (t[0], t[1], t[2]))
    return [t[3] for t in tagged]


@dataclass(frozen=True)
class ExperimentConfig:
    """Full experiment description: the normal profile replayed over the
    scheduled hour slices, plus the attack scenario set."""

    id_pool: tuple[IdSpec, ...]
    scenarios: tuple[AttackScenario, ...]
    day_epoch: float = 1626652800.0  # 2021-07-19 00:00:00 UTC
    normal_slices: tuple[tuple[float, float], ...] = ()  # (start_hour, duration_s)
    jitter_fraction: float = 0.15
    utc_offset_hours: float = 0.0
    seed: int = 20210719


def build_experiment_dataset(config: ExperimentConfig) -> list[CanFrame]:
    """Generate the full labeled stream for the experiment schedule."""
    normal: list[CanFrame] = []
    for slice_idx, (start_hour, duration) in enumerate(config.normal_slices):
        profile = NormalProfile(
            id_pool=config.id_pool,
            jitter_fraction=config.jitter_fraction,
            duration=duration,
            start_epoch=config.day_epoch + start_hour * 3600.0,
        )
        normal.extend(generate_normal(profile, seed=config.seed + slice_idx))
    normal.sort(key=lambda f: f.timestamp)
    if not normal:
        raise ValueError("experiment config produced no normal traffic")

    injected: list[CanFrame] = []
    for scenario in config.scenarios:
        w0, w1 = _window_seconds(scenario, config.day_epoch)
        injected.extend(build_injected_frames(scenario, w0, w1))
    injected.sort(key=lambda f: f.timestamp)

    stream = merge_streams(normal, injected)
    counts = class_counts(stream)
    log.info("experiment dataset: %s", {k.display_name: v for k, v in counts.items()})
    return stream


def class_counts(frames: list[CanFrame]) -> dict[ClassLabel, int]:
    counts = {label: 0 for label in ClassLabel}
    for f in frames:
        counts[f.label] += 1
    return counts


# --- default experiment -----------------------------------------------------
#
# Desk-scale stand-in for the unavailable real captures: ~355k frames over
# the 16:00-21:00 schedule, Normal the majority class, then DoS, RPM
# spoofing, Fuzzy, Gear spoofing.  Per-class sizes follow from the injection
# periods and window lengths below; normal traffic is active for a 60 s
# burst at the top of each hour (the wall-clock hour of every frame is what
# matters downstream, not full-hour coverage).

RPM_TARGET_ID = 0x316
GEAR_TARGET_ID = 0x43F


def default_id_pool() -> tuple[IdSpec, ...]:
    """22 dense periodic ids plus 100 sparse low-rate ids spanning the id space."""
    dense = [
        # (id, period, style, dlc, value_max, peak_prob)
        IdSpec(0x000, 0.025, 11, "counter"),
        IdSpec(0x05F, 0.024, 12, "counter"),
        IdSpec(0x0A0, 0.026, 13, "sensor", value_max=0x0FFF),
        IdSpec(0x0C5, 0.030, 14, "constant"),
        IdSpec(0x12E, 0.028, 15, "counter"),
        IdSpec(0x155, 0.032, 16, "sensor", value_max=0x07FF),
        IdSpec(0x1B0, 0.032, 18, "counter"),
        IdSpec(0x1D2, 0.040, 19, "constant"),
        IdSpec(0x20F, 0.045, 20, "counter"),
        IdSpec(0x260, 0.045, 21, "sensor", value_max=0x0FFF),
        IdSpec(0x2C0, 0.040, 23, "counter"),
        IdSpec(0x314, 0.030, 24, "sensor", value_max=0x0BFF),
        IdSpec(RPM_TARGET_ID, 0.020, 25, "rpm", value_max=0x1FFF, peak_prob=0.20),
        IdSpec(0x318, 0.032, 26, "sensor", value_max=0x0BFF),
        IdSpec(0x350, 0.045, 27, "sensor", value_max=0x03FF),
        IdSpec(0x3C8, 0.048, 28, "sensor", value_max=0x0FFF),
        IdSpec(0x43D, 0.036, 29, "gear"),
        IdSpec(GEAR_TARGET_ID, 0.025, 30, "gear", peak_prob=0.02),
        IdSpec(0x5A0, 0.045, 31, "counter"),
        IdSpec(0x690, 0.050, 32, "sensor", value_max=0x0FFF),
    ]
    sparse = [
        IdSpec(0x010 + step * 0x028, 2.2 + (step % 7) * 0.25, 100 + step, "constant",
               dlc=(step % 4) * 2 + 2, min_window=100.0)
        for step in range(50)
    ]
    return tuple(dense + sparse)


def default_scenarios(seed: int = 20210719) -> tuple[AttackScenario, ...]:
    pool = {spec.can_id: spec for spec in default_id_pool()}
    rpm_payload = sensor_peak_payload(pool[RPM_TARGET_ID])
    # forged gear frame: top gear with an over-limit torque request byte
    gear_payload = list(gear_top_payload(pool[GEAR_TARGET_ID]))
    gear_payload[2] = 0xF0
    gear_payload = tuple(gear_payload)
    hour = 1 / 3600.0
    return (
        AttackScenario(
            ClassLabel.RPM_SPOOF, 0.020, (16.0, 16.0 + 800 * hour),
            target_id=RPM_TARGET_ID, fixed_payload=rpm_payload,
            rng_seed=seed + 1, injection_jitter=0.35,
        ),
        AttackScenario(
            ClassLabel.GEAR_SPOOF, 0.025, (17.0, 17.0 + 625 * hour),
            target_id=GEAR_TARGET_ID, fixed_payload=gear_payload,
            rng_seed=seed + 2, injection_jitter=0.35,
        ),
        AttackScenario(
            ClassLabel.FUZZY, FUZZY_INJECTION_PERIOD, (17.0 + 20 * hour, 17.0 + 27.5 * hour),
            rng_seed=seed + 3,
        ),
        AttackScenario(
            ClassLabel.FUZZY, FUZZY_INJECTION_PERIOD, (18.0 + 20 * hour, 18.0 + 27.5 * hour),
            rng_seed=seed + 4,
        ),
        AttackScenario(
            ClassLabel.DOS, DOS_INJECTION_PERIOD, (18.0 + 6 * hour, 18.0 + 15 * hour),
            rng_seed=seed + 5,
        ),
        AttackScenario(
            ClassLabel.DOS, DOS_INJECTION_PERIOD, (19.0 + 5 * hour, 19.0 + 14 * hour),
            rng_seed=seed + 6,
        ),
    )


def default_experiment_config(seed: int = 20210719) -> ExperimentConfig:
    # normal runs throughout the capture but concentrates late, as in the
    # source captures (attack-heavy early hours, normal-heavy 19-21h)
    slices = ((16.0, 14.0), (17.0, 14.0), (18.0, 14.0), (19.0, 132.0), (20.0, 132.0))
    return ExperimentConfig(
        id_pool=default_id_pool(),
        scenarios=default_scenarios(seed),
        normal_slices=slices,
        seed=seed,
    )


# --- scenario config (de)serialization --------------------------------------

def scenario_to_dict(s: AttackScenario) -> dict:
    return {
        "kind": s.kind.display_name,
        "injection_period": s.injection_period,
        "window": list(s.window),
        "target_id": None if s.target_id is None else f"{s.target_id:#05x}",
        "fixed_payload": None if s.fixed_payload is None else list(s.fixed_payload),
        "rng_seed": s.rng_seed,
        "injection_jitter": s.injection_jitter,
    }


def scenario_from_dict(d: dict) -> AttackScenario:
    target = d.get("target_id")
    if isinstance(target, str):
        target = int(target, 16)
    payload = d.get("fixed_payload")
    return AttackScenario(
        kind=ClassLabel.from_name(d["kind"]),
        injection_period=float(d["injection_period"]),
        window=(float(d["window"][0]), float(d["window"][1])),
        target_id=target,
        fixed_payload=None if payload is None else tuple(int(b) for b in payload),
        rng_seed=int(d.get("rng_seed", 0)),
        injection_jitter=float(d.get("injection_jitter", 0.0)),
    )


def config_to_dict(config: ExperimentConfig) -> dict:
    return {
        "seed": config.seed,
        "day_epoch": config.day_epoch,
        "utc_offset_hours": config.utc_offset_hours,
        "jitter_fraction": config.jitter_fraction,
        "normal_slices": [list(s) for s in config.normal_slices],
        "id_pool": [
            {
                "can_id": f"{spec.can_id:#05x}",
                "period": spec.period,
                "payload_seed": spec.payload_seed,
                "style": spec.style,
                "dlc": spec.dlc,
                "value_max": spec.value_max,
                "peak_prob": spec.peak_prob,
            }
            for spec in config.id_pool
        ],
        "scenarios": [scenario_to_dict(s) for s in config.scenarios],
    }


def config_from_dict(d: dict) -> ExperimentConfig:
    pool = tuple(
        IdSpec(
            can_id=int(e["can_id"], 16) if isinstance(e["can_id"], str) else int(e["can_id"]),
            period=float(e["period"]),
            payload_seed=int(e["payload_seed"]),
            style=e.get("style", "counter"),
            dlc=int(e.get("dlc", 8)),
            value_max=int(e.get("value_max", 0x0FFF)),
            peak_prob=float(e.get("peak_prob", 0.0)),
        )
        for e in d["id_pool"]
    )
    return ExperimentConfig(
        id_pool=pool,
        scenarios=tuple(scenario_from_dict(s) for s in d["scenarios"]),
        day_epoch=float(d.get("day_epoch", 1626652800.0)),
        normal_slices=tuple((float(a), float(b)) for a, b in d.get("normal_slices", [])),
        jitter_fraction=float(d.get("jitter_fraction", 0.15)),
        utc_offset_hours=float(d.get("utc_offset_hours", 0.0)),
        seed=int(d.get("seed", 20210719)),
    )


def load_experiment_config(path: str, seed_override: int | None = None) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        d = json.load(fh)
    config = config_from_dict(d)
    if seed_override is not None:
        config = reseed_config(config, seed_override)
    return config


def reseed_config(config: ExperimentConfig, seed: int) -> ExperimentConfig:
    scenarios = tuple(
        replace(s, rng_seed=seed + 1 + i) for i, s in enumerate(config.scenarios)
    )
    return replace(config, seed=seed, scenarios=scenarios)
