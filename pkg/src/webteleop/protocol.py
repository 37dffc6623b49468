"""Wire message schema and validation for the teleoperation protocol.

Messages are newline-free UTF-8 JSON objects carried in length-delimited
WebSocket text frames. Field names and variants are frozen in protocol.md
at the repository root; the schema version rides in the welcome message.
"""

from __future__ import annotations

import json

PROTOCOL_VERSION = 1

CLIENT_TYPES = ("hello", "command", "claim_lock", "peek", "heartbeat")
COMMAND_VERBS = ("look", "drive", "turn", "spine", "hand_step", "hand_vertical",
                 "hand_rotate", "gripper", "step_size", "preview")
MODES = ("looking", "driving", "spine", "hand-left", "hand-right")
RESTRICTIONS = ("full", "arat-left", "arat-right")


class ProtocolError(ValueError):
    pass


def encode(msg: dict) -> bytes:
    return json.dumps(msg, separators=(",", ":")).encode("utf-8")


def decode(data: bytes) -> dict:
    try:
        msg = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ProtocolError(f"malformed message: {e}") from e
    if not isinstance(msg, dict) or "type" not in msg:
        raise ProtocolError("message must be an object with a type")
    return msg


def validate_client_message(msg: dict) -> None:
    """Schema-level validation; raises ProtocolError with the reason."""
    mtype = msg.get("type")
    if mtype not in CLIENT_TYPES:
        raise ProtocolError(f"unknown message type {mtype!r}")
    if not isinstance(msg.get("seq"), int):
        raise ProtocolError("seq must be an integer")
    if mtype == "hello":
        if not isinstance(msg.get("token"), str):
            raise ProtocolError("hello needs a token")
    elif mtype == "command":
        verb = msg.get("verb")
        if verb not in COMMAND_VERBS:
            raise ProtocolError(f"unknown verb {verb!r}")
        if msg.get("mode") not in MODES:
            raise ProtocolError(f"unknown mode {msg.get('mode')!r}")
        if not isinstance(msg.get("params", {}), dict):
            raise ProtocolError("params must be an object")
    elif mtype == "peek":
        if msg.get("side") not in ("left", "right"):
            raise ProtocolError("peek needs side left|right")


def restriction_allows(restriction: str, verb: str, params: dict) -> bool:
    """Which command verbs the current restriction mode admits.

    arat-<side> leaves exactly nine controllable degrees of freedom: head
    pan/tilt (look), that side's gripper, and that side's 6-DoF hand pose.
    """
    if restriction == "full":
        return True
    side = restriction.split("-", 1)[1]
    if verb == "look":
        return True
    if verb in ("hand_step", "hand_vertical", "hand_rotate", "gripper",
                "step_size", "preview"):
        return params.get("side") == side
    return False   # drive, turn, spine


def controllable_dofs() -> list:
    """The 20 interface-controllable degrees of freedom with a probe command
    apiece (a verb that must be accepted for the DoF to count)."""
    dofs = [
        ("base-x", "drive", {"pixel": [960.0, 900.0], "held": True}, "driving"),
        ("base-y", "drive", {"pixel": [1200.0, 900.0], "held": True}, "driving"),
        ("base-yaw", "turn", {"direction": "left", "held": True}, "driving"),
        ("torso-lift", "spine", {"fraction": 0.5}, "spine"),
        ("head-pan", "look", {"pixel": [1000.0, 540.0]}, "looking"),
        ("head-tilt", "look", {"pixel": [960.0, 600.0]}, "looking"),
    ]
    for side in ("left", "right"):
        tag = side[0].upper()
        mode = f"hand-{side}"
        sy = 1.0 if side == "left" else -1.0
        dofs += [
            (f"hand-{tag}-x", "hand_step", {"side": side, "point": [0.9, sy * 0.188, 0.8]}, mode),
            (f"hand-{tag}-y", "hand_step", {"side": side, "point": [0.7, sy * 0.4, 0.8]}, mode),
            (f"hand-{tag}-z", "hand_vertical", {"side": side, "direction": "up"}, mode),
            (f"hand-{tag}-rx", "hand_rotate", {"side": side, "arrow": "x+"}, mode),
            (f"hand-{tag}-ry", "hand_rotate", {"side": side, "arrow": "y+"}, mode),
            (f"hand-{tag}-rz", "hand_rotate", {"side": side, "arrow": "z+"}, mode),
            (f"gripper-{tag}", "gripper", {"side": side, "action": "open", "fraction": 0.5},
             mode),
        ]
    return dofs
