"""CAN frame data model and text-format parsers/writers.

Three on-disk formats are handled here:

* attack CSV (Car-Hacking layout):
  ``timestamp,canid_hex4,dlc,b0,...,b{dlc-1},flag`` with flag T (attacked)
  or R (regular).  One file per attack type; the attack class of T rows is
  supplied by the caller.
* normal-traffic log (candump style):
  ``(<seconds.micros>) <iface> <HEXID>#<HEXPAIRS>``.  The real in-vehicle
  capture this stands in for is not publicly documented, so the de-facto
  SocketCAN logging convention is used instead.
* unified merged CSV: the attack layout padded to eight fixed byte columns
  (unused ones left empty, not zero-filled) plus a trailing class-name
  column.  Header row required.

Parsing is pure and stateless; CanFrame values are immutable and safe to
share across threads.
"""

from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Iterable, Iterator, TextIO

log = logging.getLogger(__name__)

MAX_STD_ID = 0x7FF  # 11-bit standard arbitration id; extended ids rejected
MAX_DLC = 8

UNIFIED_COLUMNS = (
    "timestamp",
    "can_id",
    "dlc",
    "data0",
    "data1",
    "data2",
    "data3",
    "data4",
    "data5",
    "data6",
    "data7",
    "flag",
    "label",
)
UNIFIED_HEADER = ",".join(UNIFIED_COLUMNS)


class ClassLabel(IntEnum):
    """Traffic classes with fixed ordinals used everywhere downstream."""

    NORMAL = 0
    DOS = 1
    FUZZY = 2
    RPM_SPOOF = 3
    GEAR_SPOOF = 4

    @property
    def display_name(self) -> str:
        return _LABEL_NAMES[self]

    @classmethod
    def from_name(cls, name: str) -> "ClassLabel":
        try:
            return _NAME_TO_LABEL[name.strip().lower()]
        except KeyError:
            raise ValueError(f"unknown class label {name!r}") from None

    @classmethod
    def attack_labels(cls) -> tuple["ClassLabel", ...]:
        return (cls.DOS, cls.FUZZY, cls.RPM_SPOOF, cls.GEAR_SPOOF)


_LABEL_NAMES = {
    ClassLabel.NORMAL: "Normal",
    ClassLabel.DOS: "DoS",
    ClassLabel.FUZZY: "Fuzzy",
    ClassLabel.RPM_SPOOF: "RpmSpoof",
    ClassLabel.GEAR_SPOOF: "GearSpoof",
}
_NAME_TO_LABEL = {name.lower(): label for label, name in _LABEL_NAMES.items()}
# accepted aliases for CLI/config convenience
_NAME_TO_LABEL.update({"rpm": ClassLabel.RPM_SPOOF, "gear": ClassLabel.GEAR_SPOOF})


class ParseError(ValueError):
    """Structured parse failure carrying the offending line number."""

    def __init__(self, reason: str, message: str, line_number: int = 1):
        super().__init__(f"line {line_number}: {message}")
        self.reason = reason
        self.line_number = line_number


@dataclass(frozen=True, slots=True)
class CanFrame:
    """One timestamped CAN message with its ground-truth label.

    Only the fields the datasets carry are modelled (timestamp, arbitration
    id, DLC, payload); frame-level bits such as CRC/ACK are out of scope.
    Validation lives in :meth:`problems` and is enforced at the parser /
    generator boundaries rather than on every construction.
    """

    timestamp: float
    can_id: int
    dlc: int
    data: tuple[int, ...]
    label: ClassLabel = ClassLabel.NORMAL

    def problems(self) -> list[str]:
        """Return invariant violations, empty when the frame is valid."""
        out = []
        if self.timestamp is None or not math.isfinite(self.timestamp) or self.timestamp < 0:
            out.append("timestamp must be finite and non-negative")
        if self.can_id is None or not 0 <= self.can_id <= MAX_STD_ID:
            out.append(f"can_id must be in [0, {MAX_STD_ID:#x}]")
        if self.dlc is None or not 0 <= self.dlc <= MAX_DLC:
            out.append("dlc must be in [0, 8]")
        elif self.data is None or len(self.data) != self.dlc:
            out.append("data length must equal dlc")
        if self.data is not None and any(b is None or not 0 <= b <= 255 for b in self.data):
            out.append("data bytes must be in [0, 255]")
        return out

    def is_valid(self) -> bool:
        return not self.problems()


@dataclass(frozen=True, slots=True)
class RawRecord:
    """Tokenized input line kept for error reporting and provenance."""

    source: str  # "attack_csv" | "normal_log"
    line_number: int
    fields: tuple[str, ...] = field(default_factory=tuple)


def _parse_timestamp(token: str, line_number: int) -> float:
    try:
        ts = float(token)
    except ValueError:
        raise ParseError("bad_timestamp", f"cannot parse timestamp {token!r}", line_number) from None
    if not math.isfinite(ts) or ts < 0:
        raise ParseError("bad_timestamp", f"timestamp {token!r} not finite/non-negative", line_number)
    return ts


def _parse_can_id(token: str, line_number: int) -> int:
    try:
        can_id = int(token, 16)
    except ValueError:
        raise ParseError("bad_hex", f"cannot parse CAN id {token!r}", line_number) from None
    if not 0 <= can_id <= MAX_STD_ID:
        raise ParseError("id_out_of_range", f"CAN id {token!r} outside 11-bit range", line_number)
    return can_id


def _parse_byte(token: str, line_number: int) -> int:
    try:
        value = int(token, 16)
    except ValueError:
        raise ParseError("bad_hex", f"cannot parse data byte {token!r}", line_number) from None
    if not 0 <= value <= 255:
        raise ParseError("bad_byte", f"data byte {token!r} outside [0, 255]", line_number)
    return value


def parse_attack_csv_row(
    row: str,
    attack_label: ClassLabel | None = None,
    line_number: int = 1,
) -> CanFrame:
    """Parse one attack-CSV or unified-CSV row into a CanFrame.

    Accepts the variable-arity attack layout (flag right after the DLC data
    bytes) and the fixed 13-column unified layout (eight byte columns with
    empty tails, flag, class name).  Flag R maps to Normal; flag T takes the
    trailing class-name column when present, otherwise ``attack_label``.
    """
    fields = [f.strip() for f in row.strip().split(",")]
    n = len(fields)
    if n < 4:
        raise ParseError("field_count", f"expected at least 4 fields, got {n}", line_number)

    timestamp = _parse_timestamp(fields[0], line_number)
    can_id = _parse_can_id(fields[1], line_number)
    try:
        dlc = int(fields[2])
    except ValueError:
        raise ParseError("bad_dlc", f"cannot parse DLC {fields[2]!r}", line_number) from None
    if not 0 <= dlc <= MAX_DLC:
        raise ParseError("dlc_out_of_range", f"DLC {dlc} outside [0, 8]", line_number)

    label_name: str | None = None
    if n == len(UNIFIED_COLUMNS):  # unified: 8 byte columns + flag + label
        byte_fields, flag = fields[3:11], fields[11]
        label_name = fields[12]
    elif n == len(UNIFIED_COLUMNS) - 1:  # fixed arity without the label column
        byte_fields, flag = fields[3:11], fields[11]
    elif n == 4 + dlc:  # variable arity: exactly dlc byte fields then flag
        byte_fields, flag = fields[3 : 3 + dlc], fields[3 + dlc]
    else:
        raise ParseError(
            "field_count", f"got {n} fields, expected {4 + dlc} or {len(UNIFIED_COLUMNS)}", line_number
        )

    present = [f for f in byte_fields if f != ""]
    if len(present) != dlc or any(f != "" for f in byte_fields[dlc:]):
        raise ParseError(
            "field_count", f"expected {dlc} data bytes, got {len(present)}", line_number
        )
    data = tuple(_parse_byte(tok, line_number) for tok in present)

    if flag == "R":
        label = ClassLabel.NORMAL
    elif flag == "T":
        if label_name:
            try:
                label = ClassLabel.from_name(label_name)
            except ValueError:
                raise ParseError("bad_label", f"unknown class name {label_name!r}", line_number) from None
        elif attack_label is not None:
            label = attack_label
        else:
            raise ParseError(
                "missing_attack_class", "flag T but no attack class available", line_number
            )
    else:
        raise ParseError("bad_flag", f"flag must be T or R, got {flag!r}", line_number)

    return CanFrame(timestamp, can_id, dlc, data, label)


_CANDUMP_RE = re.compile(
    r"^\((?P<ts>\d+(?:\.\d+)?)\)\s+(?P<iface>\S+)\s+(?P<id>[0-9A-Fa-f]{1,8})#(?P<data>[0-9A-Fa-f]*)\s*$"
)


def parse_normal_log_line(line: str, line_number: int = 1) -> CanFrame:
    """Parse one candump-style line; resulting frames are labeled Normal.

    The interface token is only provenance and is not retained on the frame.
    """
    m = _CANDUMP_RE.match(line.strip())
    if m is None:
        raise ParseError("grammar", f"not a candump line: {line.strip()!r}", line_number)
    timestamp = _parse_timestamp(m.group("ts"), line_number)
    can_id = _parse_can_id(m.group("id"), line_number)
    hexpairs = m.group("data")
    if len(hexpairs) % 2 != 0:
        raise ParseError("odd_hex", f"odd-length data hex {hexpairs!r}", line_number)
    dlc = len(hexpairs) // 2
    if dlc > MAX_DLC:
        raise ParseError("dlc_out_of_range", f"{dlc} data bytes exceed CAN limit", line_number)
    data = tuple(_parse_byte(hexpairs[i : i + 2], line_number) for i in range(0, len(hexpairs), 2))
    return CanFrame(timestamp, can_id, dlc, data, ClassLabel.NORMAL)


def write_frame_csv(frame: CanFrame) -> str:
    """Format a frame as one unified-CSV row (no trailing newline).

    Timestamps are written at microsecond resolution; byte columns past the
    DLC stay empty so that "absent" remains distinct from byte value 0.
    """
    bytes_out = [f"{b:02x}" for b in frame.data] + [""] * (MAX_DLC - frame.dlc)
    flag = "R" if frame.label == ClassLabel.NORMAL else "T"
    return ",".join(
        [f"{frame.timestamp:.6f}", f"{frame.can_id:04x}", str(frame.dlc), *bytes_out, flag, frame.label.display_name]
    )


def _warn_non_monotone(path: str, count: int, first_line: int) -> None:
    if count:
        log.warning(
            "%s: %d non-monotone timestamp(s), first at line %d (kept, not an error)",
            path, count, first_line,
        )


def iter_attack_csv(
    lines: Iterable[str],
    attack_label: ClassLabel | None = None,
    source: str = "<attack csv>",
) -> Iterator[CanFrame]:
    """Yield frames from attack-CSV lines, skipping an optional header row."""
    last_ts = -math.inf
    non_monotone = 0
    first_bad_line = 0
    for line_number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        if line_number == 1 and line.lower().startswith("timestamp"):
            continue
        frame = parse_attack_csv_row(line, attack_label, line_number)
        if frame.timestamp < last_ts:
            non_monotone += 1
            first_bad_line = first_bad_line or line_number
        last_ts = max(last_ts, frame.timestamp)
        yield frame
    _warn_non_monotone(source, non_monotone, first_bad_line)


def iter_normal_log(lines: Iterable[str], source: str = "<normal log>") -> Iterator[CanFrame]:
    last_ts = -math.inf
    non_monotone = 0
    first_bad_line = 0
    for line_number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        frame = parse_normal_log_line(line, line_number)
        if frame.timestamp < last_ts:
            non_monotone += 1
            first_bad_line = first_bad_line or line_number
        last_ts = max(last_ts, frame.timestamp)
        yield frame
    _warn_non_monotone(source, non_monotone, first_bad_line)


def read_attack_csv(path: str, attack_label: ClassLabel | None = None) -> list[CanFrame]:
    with open(path, encoding="utf-8", errors="replace") as fh:
        return list(iter_attack_csv(fh, attack_label, source=path))


def read_normal_log(path: str) -> list[CanFrame]:
    with open(path, encoding="utf-8", errors="replace") as fh:
        return list(iter_normal_log(fh, source=path))


def read_unified_csv(path: str) -> list[CanFrame]:
    """Read a unified merged CSV; the header row is required."""
    with open(path, encoding="utf-8", errors="replace") as fh:
        header = fh.readline()
        if header.strip() != UNIFIED_HEADER:
            raise ParseError("missing_header", f"{path}: expected unified CSV header", 1)
        frames = []
        last_ts = -math.inf
        non_monotone = 0
        first_bad_line = 0
        for line_number, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            frame = parse_attack_csv_row(line, None, line_number)
            if frame.timestamp < last_ts:
                non_monotone += 1
                first_bad_line = first_bad_line or line_number
            last_ts = max(last_ts, frame.timestamp)
            frames.append(frame)
    _warn_non_monotone(path, non_monotone, first_bad_line)
    return frames


def write_unified_csv(target: str | TextIO, frames: Iterable[CanFrame]) -> int:
    """Write frames as a unified CSV (header + one row per frame)."""

    def _write(fh: TextIO) -> int:
        fh.write(UNIFIED_HEADER + "\n")
        count = 0
        for frame in frames:
            fh.write(write_frame_csv(frame) + "\n")
            count += 1
        return count

    if isinstance(target, str):
        with open(target, "w", encoding="utf-8", newline="\n") as fh:
            return _write(fh)
    return _write(target)
