"""Protection profiles: which action each API endpoint group receives.

Three shipped profiles cover the usual stances.  P1 feeds every
fingerprintable group little lies, so readings differ per origin and
session but stay self-consistent.  P2 leaves fingerprintable groups
untouched and keeps only the security protections (timing).  P3 trades
fingerprintability for information hiding: groups either return fixed
fake values shared by every P3 user or are blocked outright.

The endpoint catalog is a representative selection of commonly wrapped
read surfaces, not an exhaustive API inventory.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path


class ProtectionAction(Enum):
    LITTLE_LIE = "little_lie"
    PASS_THROUGH = "pass_through"
    BLOCK = "block"
    FIXED_FAKE = "fixed_fake"


# group -> fingerprintable?  Timing protection is an anti-side-channel
# measure and stays active in every profile.
GROUPS = {
    "canvas": True,
    "webgl": True,
    "audio": True,
    "fonts": True,
    "navigator": True,
    "screen": True,
    "battery": True,
    "gamepad": True,
    "sensors": True,
    "geolocation": True,
    "mediadevices": True,
    "webrtc": True,
    "speech": True,
    "timing": False,
}

ENDPOINT_GROUPS = {
    "HTMLCanvasElement.prototype.toDataURL": "canvas",
    "HTMLCanvasElement.prototype.toBlob": "canvas",
    "OffscreenCanvas.prototype.convertToBlob": "canvas",
    "CanvasRenderingContext2D.prototype.getImageData": "canvas",
    "WebGLRenderingContext.prototype.getParameter": "webgl",
    "WebGLRenderingContext.prototype.readPixels": "webgl",
    "WebGLRenderingContext.prototype.getSupportedExtensions": "webgl",
    "WebGL2RenderingContext.prototype.getParameter": "webgl",
    "AudioBuffer.prototype.getChannelData": "audio",
    "AnalyserNode.prototype.getFloatFrequencyData": "audio",
    "AudioBuffer.prototype.copyFromChannel": "audio",
    "OfflineAudioContext.prototype.startRendering": "audio",
    "CanvasRenderingContext2D.prototype.measureText": "fonts",
    "FontFaceSet.prototype.check": "fonts",
    "Navigator.prototype.userAgent": "navigator",
    "Navigator.prototype.platform": "navigator",
    "Navigator.prototype.language": "navigator",
    "Navigator.prototype.languages": "navigator",
    "Navigator.prototype.plugins": "navigator",
    "Navigator.prototype.mimeTypes": "navigator",
    "Navigator.prototype.hardwareConcurrency": "navigator",
    "Navigator.prototype.deviceMemory": "navigator",
    "Navigator.prototype.webdriver": "navigator",
    "Screen.prototype.width": "screen",
    "Screen.prototype.height": "screen",
    "Screen.prototype.availWidth": "screen",
    "Screen.prototype.availHeight": "screen",
    "Screen.prototype.colorDepth": "screen",
    "Window.prototype.devicePixelRatio": "screen",
    "Navigator.prototype.getBattery": "battery",
    "BatteryManager.prototype.level": "battery",
    "BatteryManager.prototype.charging": "battery",
    "Navigator.prototype.getGamepads": "gamepad",
    "Gamepad.prototype.id": "gamepad",
    "Accelerometer": "sensors",
    "Gyroscope": "sensors",
    "Magnetometer": "sensors",
    "AmbientLightSensor": "sensors",
    "Geolocation.prototype.getCurrentPosition": "geolocation",
    "Geolocation.prototype.watchPosition": "geolocation",
    "MediaDevices.prototype.enumerateDevices": "mediadevices",
    "RTCPeerConnection": "webrtc",
    "RTCPeerConnection.prototype.createDataChannel": "webrtc",
    "RTCPeerConnection.prototype.createOffer": "webrtc",
    "SpeechSynthesis.prototype.getVoices": "speech",
    "Performance.prototype.now": "timing",
    "Date.now": "timing",
    "Event.prototype.timeStamp": "timing",
    "Sensor.prototype.timestamp": "timing",
}

# P3 stance per fingerprintable group: fixed fake values where a
# plausible constant exists, hard block where none does.
_P3_ACTIONS = {
    "canvas": ProtectionAction.FIXED_FAKE,
    "webgl": ProtectionAction.FIXED_FAKE,
    "audio": ProtectionAction.FIXED_FAKE,
    "fonts": ProtectionAction.FIXED_FAKE,
    "navigator": ProtectionAction.FIXED_FAKE,
    "screen": ProtectionAction.FIXED_FAKE,
    "battery": ProtectionAction.FIXED_FAKE,
    "speech": ProtectionAction.FIXED_FAKE,
    "sensors": ProtectionAction.FIXED_FAKE,
    "gamepad": ProtectionAction.BLOCK,
    "geolocation": ProtectionAction.BLOCK,
    "mediadevices": ProtectionAction.BLOCK,
    "webrtc": ProtectionAction.BLOCK,
    "timing": ProtectionAction.LITTLE_LIE,
}


@dataclass(frozen=True)
class ProtectionProfile:
    """One profile: a total map from endpoint group to action."""

    id: str
    actions: dict

    def validate(self) -> None:
        missing = set(GROUPS) - set(self.actions)
        if missing:
            raise ValueError(f"profile {self.id} missing groups: {sorted(missing)}")
        extra = set(self.actions) - set(GROUPS)
        if extra:
            raise ValueError(f"profile {self.id} has unknown groups: {sorted(extra)}")


def _build_profiles() -> dict:
    p1 = {g: ProtectionAction.LITTLE_LIE for g in GROUPS}
    p2 = {
        g: ProtectionAction.PASS_THROUGH if fingerprintable else ProtectionAction.LITTLE_LIE
        for g, fingerprintable in GROUPS.items()
    }
    p3 = dict(_P3_ACTIONS)
    return {
        "p1": ProtectionProfile("p1", p1),
        "p2": ProtectionProfile("p2", p2),
        "p3": ProtectionProfile("p3", p3),
    }


PROFILES = _build_profiles()


def resolve_protection(profile: ProtectionProfile, endpoint: str) -> ProtectionAction:
    """Map an endpoint to its group's action; unknown endpoints pass through."""
    profile.validate()
    group = ENDPOINT_GROUPS.get(endpoint)
    if group is None:
        return ProtectionAction.PASS_THROUGH
    return profile.actions[group]


def resolve_group_action(profile: ProtectionProfile, group: str) -> ProtectionAction:
    """Action for a whole endpoint group (used by the CLI subcommands)."""
    profile.validate()
    if group not in GROUPS:
        return ProtectionAction.PASS_THROUGH
    return profile.actions[group]


def profiles_to_json() -> str:
    doc = {
        "version": 1,
        "groups": GROUPS,
        "endpoints": ENDPOINT_GROUPS,
        "profiles": {
            pid: {g: a.value for g, a in prof.actions.items()}
            for pid, prof in PROFILES.items()
        },
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def profiles_from_json(text: str | Path) -> dict:
    if isinstance(text, Path):
        text = text.read_text()
    doc = json.loads(text)
    if doc.get("version") != 1:
        raise ValueError(f"unsupported profile table version: {doc.get('version')}")
    profiles = {}
    for pid, table in doc["profiles"].items():
        actions = {g: ProtectionAction(a) for g, a in table.items()}
        prof = ProtectionProfile(pid, actions)
        prof.validate()
        profiles[pid] = prof
    return profiles
