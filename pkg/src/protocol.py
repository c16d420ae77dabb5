"""
Fixed 8-byte command / telemetry frames for the actuator bus link.

Frame layout (big-endian, most significant bits first, 64 bits total):

    | position 16 | velocity 12 | kp 12 | kd 12 | torque 12 |

Telemetry reuses the same layout with the kp/kd slots zero and the torque
estimate in the torque slot. Fields are linearly quantized:

    code  = floor((x - min) * (2**bits - 1) / (max - min))
    value = min + code * (max - min) / (2**bits - 1)

so zero torque in [-6, 6] @ 12 bits maps to 2047 (floor of the midpoint tie).
"""
import math
from dataclasses import dataclass, field

from .errors import CodecError

PAYLOAD_BYTES = 8
FIELD_ORDER = ('position', 'velocity', 'kp', 'kd', 'torque')


@dataclass(frozen=True)
class FieldRange:
    minimum: float
    maximum: float
    bits: int

    def __post_init__(self):
        if not self.minimum < self.maximum:
            raise CodecError(f"field range min ({self.minimum}) must be below max ({self.maximum})")
        if not 1 <= self.bits <= 32:
            raise CodecError(f"bit width must be in 1..32, got {self.bits}")

    @property
    def max_code(self):
        return (1 << self.bits) - 1

    @property
    def step(self):
        return (self.maximum - self.minimum) / self.max_code

    def quantize(self, name, x):
        if not (math.isfinite(x) and self.minimum <= x <= self.maximum):
            raise CodecError(f"{name}={x!r} outside codec range [{self.minimum}, {self.maximum}]")
        code = math.floor((x - self.minimum) * self.max_code / (self.maximum - self.minimum))
        return min(max(code, 0), self.max_code)

    def dequantize(self, code):
        return self.minimum + code * (self.maximum - self.minimum) / self.max_code


@dataclass(frozen=True)
class CodecRanges:
    position: FieldRange = field(default_factory=lambda: FieldRange(-12.5, 12.5, 16))
    velocity: FieldRange = field(default_factory=lambda: FieldRange(-65.0, 65.0, 12))
    kp: FieldRange = field(default_factory=lambda: FieldRange(0.0, 500.0, 12))
    kd: FieldRange = field(default_factory=lambda: FieldRange(0.0, 5.0, 12))
    torque: FieldRange = field(default_factory=lambda: FieldRange(-6.0, 6.0, 12))

    def __post_init__(self):
        total = sum(getattr(self, n).bits for n in FIELD_ORDER)
        if total != 8 * PAYLOAD_BYTES:
            raise CodecError(f"field widths must total {8 * PAYLOAD_BYTES} bits, got {total}")

    @classmethod
    def from_params(cls, params):
        c = params['codec']
        return cls(
            position=FieldRange(*c['position_rad']),
            velocity=FieldRange(*c['velocity_rad_s']),
            kp=FieldRange(*c['kp']),
            kd=FieldRange(*c['kd']),
            torque=FieldRange(*c['torque_nm']),
        )


@dataclass(frozen=True)
class CommandFrame:
    torque_setpoint: float = 0.0
    position_setpoint: float = 0.0
    velocity_setpoint: float = 0.0
    kp_field: float = 0.0
    kd_field: float = 0.0


@dataclass(frozen=True)
class TelemetryFrame:
    position: float = 0.0
    velocity: float = 0.0
    torque_estimate: float = 0.0


def _pack(ranges, values):
    word = 0
    for name in FIELD_ORDER:
        rng = getattr(ranges, name)
        word = (word << rng.bits) | rng.quantize(name, values[name])
    return word.to_bytes(PAYLOAD_BYTES, 'big')


def _unpack(ranges, payload):
    if len(payload) != PAYLOAD_BYTES:
        raise CodecError(f"payload must be exactly {PAYLOAD_BYTES} bytes, got {len(payload)}")
    word = int.from_bytes(bytes(payload), 'big')
    out = {}
    for name in reversed(FIELD_ORDER):
        rng = getattr(ranges, name)
        out[name] = rng.dequantize(word & rng.max_code)
        word >>= rng.bits
    return out


def encode_command(frame, ranges=None):
    ranges = ranges or CodecRanges()
    return _pack(ranges, {
        'position': frame.position_setpoint,
        'velocity': frame.velocity_setpoint,
        'kp': frame.kp_field,
        'kd': frame.kd_field,
        'torque': frame.torque_setpoint,
    })


def decode_command(payload, ranges=None):
    v = _unpack(ranges or CodecRanges(), payload)
    return CommandFrame(torque_setpoint=v['torque'], position_setpoint=v['position'],
                        velocity_setpoint=v['velocity'], kp_field=v['kp'], kd_field=v['kd'])


def encode_telemetry(frame, ranges=None):
    ranges = ranges or CodecRanges()
    return _pack(ranges, {
        'position': frame.position,
        'velocity': frame.velocity,
        'kp': ranges.kp.minimum,
        'kd': ranges.kd.minimum,
        'torque': frame.torque_estimate,
    })


def decode_telemetry(payload, ranges=None):
    v = _unpack(ranges or CodecRanges(), payload)
    return TelemetryFrame(position=v['position'], velocity=v['velocity'], torque_estimate=v['torque'])


def bus_budget(control_rate, frame_overhead_bits=64, frames_per_cycle=2, bitrate=1e6):
    """Fraction of the bus bitrate used by the control traffic."""
    if not control_rate > 0:
        raise ValueError(f"control_rate must be positive, got {control_rate}")
    return control_rate * frames_per_cycle * (8 * PAYLOAD_BYTES + frame_overhead_bits) / bitrate


# --- Hex-dump vectors ---

def format_vector(payload, comment=''):
    line = bytes(payload).hex()
    return f"{line} # {comment}" if comment else line


def parse_vectors(text):
    """Parses `<hex16> # comment` lines; blank lines and lines starting with '#' are skipped."""
    vectors = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith('#'):
            continue
        hex_part, _, comment = line.partition('#')
        hex_part = hex_part.strip()
        if len(hex_part) != 2 * PAYLOAD_BYTES:
            raise CodecError(f"line {lineno}: expected {2 * PAYLOAD_BYTES} hex digits, got '{hex_part}'")
        try:
            payload = bytes.fromhex(hex_part)
        except ValueError as exc:
            raise CodecError(f"line {lineno}: {exc}") from exc
        vectors.append((payload, comment.strip()))
    return vectors
