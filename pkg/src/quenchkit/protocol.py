"""Piecewise-constant (velocity, acceleration) quench schedules.

File format (UTF-8 JSON object)::

    {
      "system": "sho",            # "box" or "sho"
      "x1": 0.0,                  # potential centre at segments[0].t_start
      "segments": [               # at least two, t_start strictly increasing
        {"t_start": 0.0, "v": 0.0, "a": 0.0},
        {"t_start": 1.0, "v": 1.0, "a": 0.0}
      ]
    }

Each segment holds the velocity at its own start and a constant
acceleration; the centre trajectory is continuous across every quench.
Times and kinematics are dimensionless (hbar = m = 1 and L = 1 for the box,
omega = 1 for the oscillator). Unknown keys are rejected.
"""
from __future__ import annotations

import bisect
import json
import math
from dataclasses import dataclass

from .errors import (NonFiniteField, NonMonotonicTimes, ProtocolSyntaxError,
                     SchemaError, TooFewSegments)

SYSTEMS = ("box", "sho")
_TOP_KEYS = ("system", "x1", "segments")
_SEGMENT_KEYS = ("t_start", "v", "a")


@dataclass(frozen=True)
class QuenchSegment:
    t_start: float
    v: float = 0.0
    a: float = 0.0


@dataclass(frozen=True)
class QuenchProtocol:
    segments: tuple[QuenchSegment, ...]
    x1: float = 0.0
    system: str = "sho"

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))

    @property
    def quench_times(self) -> list[float]:
        return [s.t_start for s in self.segments[1:]]


def validate(p: QuenchProtocol) -> None:
    """Raise the first violated invariant; return None when the protocol is valid."""
    if p.system not in SYSTEMS:
        raise SchemaError("system", f"system must be one of {SYSTEMS}, got {p.system!r}")
    if not math.isfinite(p.x1):
        raise NonFiniteField("x1 is not finite")
    for i, seg in enumerate(p.segments):
        for name in _SEGMENT_KEYS:
            if not math.isfinite(getattr(seg, name)):
                raise NonFiniteField(f"{name} is not finite", i)
    if len(p.segments) < 2:
        raise TooFewSegments(f"need at least 2 segments, got {len(p.segments)}")
    for i in range(1, len(p.segments)):
        if not p.segments[i].t_start > p.segments[i - 1].t_start:
            raise NonMonotonicTimes(
                f"t_start={p.segments[i].t_start!r} does not exceed "
                f"previous t_start={p.segments[i - 1].t_start!r}", i)


def center_positions(p: QuenchProtocol) -> list[float]:
    """Potential-centre position at each segment's t_start."""
    xs = [p.x1]
    for prev, nxt in zip(p.segments, p.segments[1:]):
        dt = nxt.t_start - prev.t_start
        xs.append(xs[-1] + prev.v * dt + 0.5 * prev.a * dt * dt)
    return xs


def center_at(p: QuenchProtocol, t: float) -> float:
    """Potential-centre position at an arbitrary time t >= segments[0].t_start."""
    xs = center_positions(p)
    j = max(bisect.bisect_right(p.quench_times, t), 0)
    seg = p.segments[j]
    dt = t - seg.t_start
    return xs[j] + seg.v * dt + 0.5 * seg.a * dt * dt


def _number(value, key: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(key, f"{key!r} must be a number, got {value!r}")
    return float(value)


def _from_obj(obj) -> QuenchProtocol:
    if not isinstance(obj, dict):
        raise SchemaError("<root>", "top level must be an object")
    for key in obj:
        if key not in _TOP_KEYS:
            raise SchemaError(key)
    for key in _TOP_KEYS:
        if key not in obj:
            raise SchemaError(key, f"missing key {key!r}")
    system = obj["system"]
    if system not in SYSTEMS:
        raise SchemaError("system", f"system must be one of {SYSTEMS}, got {system!r}")
    if not isinstance(obj["segments"], list):
        raise SchemaError("segments", "'segments' must be an array")
    segments = []
    for i, seg in enumerate(obj["segments"]):
        if not isinstance(seg, dict):
            raise SchemaError("segments", f"segment {i} must be an object")
        for key in seg:
            if key not in _SEGMENT_KEYS:
                raise SchemaError(key, f"unknown key {key!r} in segment {i}")
        if "t_start" not in seg:
            raise SchemaError("t_start", f"segment {i} lacks 't_start'")
        segments.append(QuenchSegment(*(_number(seg.get(k, 0.0), k) for k in _SEGMENT_KEYS)))
    return QuenchProtocol(tuple(segments), _number(obj["x1"], "x1"), system)


def parse_protocol(text: str | bytes) -> QuenchProtocol:
    """Parse a protocol document. Invariants are checked separately by :func:`validate`."""
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ProtocolSyntaxError(f"not UTF-8: {exc.reason}", 1, exc.start + 1) from exc
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProtocolSyntaxError(exc.msg, exc.lineno, exc.colno) from exc
    return _from_obj(obj)


def serialize_protocol(p: QuenchProtocol) -> str:
    doc = {
        "system": p.system,
        "x1": p.x1,
        "segments": [{"t_start": s.t_start, "v": s.v, "a": s.a} for s in p.segments],
    }
    return json.dumps(doc, indent=2) + "\n"


def load_protocol(path) -> QuenchProtocol:
    with open(path, "rb") as fh:
        p = parse_protocol(fh.read())
    validate(p)
    return p
