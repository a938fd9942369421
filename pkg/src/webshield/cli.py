"""Command-line entry point wiring every subsystem together.

All keyed randomness flows through one session key and origin, so any
invocation with a pinned ``--session`` is byte-for-byte reproducible.
Exit codes: 0 on success (a fingerprinting detection is a result, not a
failure), 1 on domain errors, 2 on usage errors.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import __version__, formats
from .farble import (
    GeoCoordinate,
    degrade_geolocation,
    farble_audio,
    farble_bitmap,
    spoof_device_ids,
    spoof_gl_strings,
)
from .fpd import FpdMode, analyze_trace, block_directives, default_config, load_fpd_config
from .keyrand import Origin, SessionKey, derive_seed, new_session_key
from .nbs import AddressClass, LearnCache, NbsMode, decide
from .profiles import PROFILES, ProtectionAction, resolve_group_action
from .proxy import ProxyConfig, run_proxy
from .sensorsim import SensorKind, init_device_state, sample
from .timeshield import ShieldConfig, shield_stream

VERSION_TEXT = (
    f"webshield {__version__} "
    f"(fpd-config-schema 1, profile-table-schema 1)"
)


def _parse_session(ctx, param, value):
    if value is None:
        key = new_session_key()
        click.echo(f"session={key.hex()}", err=True)
        return key
    try:
        return SessionKey.from_hex(value)
    except ValueError as exc:
        raise click.BadParameter(str(exc))


def _parse_origin(ctx, param, value):
    if value is None:
        return None
    try:
        return Origin.parse(value)
    except ValueError as exc:
        raise click.BadParameter(str(exc))


session_option = click.option(
    "--session",
    metavar="HEX64",
    callback=_parse_session,
    help="Session key as 64 hex chars; generated (and echoed) if omitted.",
)
origin_option = click.option(
    "--origin",
    metavar="ORIGIN",
    required=True,
    callback=_parse_origin,
    help="Origin the lies are keyed to, e.g. https://site.example.",
)
profile_option = click.option(
    "--profile",
    type=click.Choice(["p1", "p2", "p3"]),
    default="p1",
    show_default=True,
    help="Protection profile.",
)


def _seed(session, origin, tag):
    return derive_seed(session, origin, tag)


def _announce(action: ProtectionAction, group: str):
    click.echo(f"action={action.value} group={group}", err=True)


class _DomainError(click.ClickException):
    exit_code = 1


def _domain(call, *args, **kwargs):
    try:
        return call(*args, **kwargs)
    except ValueError as exc:
        raise _DomainError(str(exc))


@click.group()
@click.version_option(version=__version__, message=VERSION_TEXT)
def main():
    """Anti-fingerprinting engine: farbled values, fake sensors, shielded
    timestamps, fingerprinting detection, and boundary filtering."""


# ----------------------------------------------------------------------
# farble: little-lie transforms over media payloads


@main.group()
def farble():
    """Perturb readable media payloads with per-origin little lies."""


@farble.command("canvas")
@click.option("--in", "in_path", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--out", "out_path", type=click.Path(path_type=Path), required=True)
@session_option
@origin_option
@profile_option
def farble_canvas(in_path, out_path, session, origin, profile):
    """Farble an RGBA bitmap file (LE32 w, LE32 h, RGBA bytes)."""
    bitmap = _domain(formats.read_bitmap, in_path)
    action = resolve_group_action(PROFILES[profile], "canvas")
    _announce(action, "canvas")
    if action is ProtectionAction.BLOCK:
        return
    if action is ProtectionAction.PASS_THROUGH:
        formats.write_bitmap(out_path, bitmap)
        return
    if action is ProtectionAction.FIXED_FAKE:
        white = bytes([255, 255, 255, 255]) * (bitmap.width * bitmap.height)
        formats.write_bitmap(out_path, type(bitmap)(bitmap.width, bitmap.height, white))
        return
    out = _domain(farble_bitmap, _seed(session, origin, "canvas"), bitmap)
    formats.write_bitmap(out_path, out)


@farble.command("audio")
@click.option("--in", "in_path", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--out", "out_path", type=click.Path(path_type=Path), required=True)
@session_option
@origin_option
@profile_option
def farble_audio_cmd(in_path, out_path, session, origin, profile):
    """Farble a raw audio file (LE32 rate, LE32 ch, LE32 frames, f32 LE)."""
    audio = _domain(formats.read_audio, in_path)
    action = resolve_group_action(PROFILES[profile], "audio")
    _announce(action, "audio")
    if action is ProtectionAction.BLOCK:
        return
    if action is ProtectionAction.PASS_THROUGH:
        formats.write_audio(out_path, audio)
        return
    if action is ProtectionAction.FIXED_FAKE:
        silent = type(audio)(audio.sample_rate, [[0.0] * audio.frame_count() for _ in audio.channels])
        formats.write_audio(out_path, silent)
        return
    out = _domain(farble_audio, _seed(session, origin, "audio"), audio)
    formats.write_audio(out_path, out)


@farble.command("geo")
@click.option("--lat", type=float, required=True)
@click.option("--lon", type=float, required=True)
@click.option("--accuracy", type=float, default=10.0, show_default=True)
@click.option("--precision", type=float, default=10000.0, show_default=True,
              help="Grid cell size in meters.")
@session_option
@origin_option
@profile_option
def farble_geo(lat, lon, accuracy, precision, session, origin, profile):
    """Degrade a coordinate to origin-keyed grid precision."""
    coord = GeoCoordinate(lat, lon, accuracy)
    action = resolve_group_action(PROFILES[profile], "geolocation")
    _announce(action, "geolocation")
    if action is ProtectionAction.BLOCK:
        return
    if action is ProtectionAction.PASS_THROUGH:
        out = coord
    else:
        out = _domain(
            degrade_geolocation, _seed(session, origin, "geo"), coord, precision
        )
    click.echo(json.dumps(
        {"latitude": out.latitude, "longitude": out.longitude, "accuracy": out.accuracy}
    ))


# ----------------------------------------------------------------------
# spoof: generated identity surfaces


@main.group()
def spoof():
    """Generate spoofed identity values (GPU strings, device ids)."""


@spoof.command("gl")
@session_option
@origin_option
@profile_option
def spoof_gl(session, origin, profile):
    """Emit the four spoofed GPU identity strings as JSON."""
    action = resolve_group_action(PROFILES[profile], "webgl")
    _announce(action, "webgl")
    if action is ProtectionAction.BLOCK or action is ProtectionAction.PASS_THROUGH:
        return
    if action is ProtectionAction.FIXED_FAKE:
        click.echo(json.dumps({
            "vendor": "Generic Vendor",
            "renderer": "Generic Renderer",
            "unmasked_vendor": "Generic Vendor",
            "unmasked_renderer": "Generic Renderer",
        }))
        return
    strings = spoof_gl_strings(_seed(session, origin, "webgl"))
    click.echo(json.dumps(strings.as_dict()))


@spoof.command("devices")
@click.option("--count", type=int, default=3, show_default=True)
@session_option
@origin_option
@profile_option
def spoof_devices(count, session, origin, profile):
    """Emit spoofed media device identifiers, one per line."""
    action = resolve_group_action(PROFILES[profile], "mediadevices")
    _announce(action, "mediadevices")
    if action is not ProtectionAction.LITTLE_LIE:
        return
    for device_id in _domain(spoof_device_ids, _seed(session, origin, "mediadevices"), count):
        click.echo(device_id)


# ----------------------------------------------------------------------
# sensors


@main.group()
def sensors():
    """Fake sensor streams for the simulated stationary device."""


@sensors.command("gen")
@click.option("--sensor", "kind", type=click.Choice([k.value for k in SensorKind]),
              required=True)
@click.option("--rate", type=float, required=True, help="Sample rate in Hz.")
@click.option("--duration", type=float, required=True, help="Trace length in seconds.")
@click.option("--format", "fmt", type=click.Choice(["csv", "jsonl"]), default="csv",
              show_default=True)
@click.option("--quantum", type=float, default=10.0, show_default=True,
              help="Timestamp shield quantum in ms.")
@session_option
@origin_option
def sensors_gen(kind, rate, duration, fmt, quantum, session, origin):
    """Generate a sensor trace at a fixed rate."""
    if rate <= 0 or duration < 0:
        raise _DomainError("rate must be > 0 and duration >= 0")
    state = init_device_state(_seed(session, origin, "sensor"))
    shield_cfg = ShieldConfig(quantum_ms=quantum)
    kind = SensorKind(kind)
    n = int(rate * duration)
    if fmt == "csv":
        if kind in (SensorKind.ORIENTATION_ABS, SensorKind.ORIENTATION_REL):
            click.echo("t_ms,qw,qx,qy,qz")
        elif kind is SensorKind.AMBIENT_LIGHT:
            click.echo("t_ms,value")
        else:
            click.echo("t_ms,x,y,z")
    for i in range(n):
        t_ms = i * 1000.0 / rate
        reading = sample(state, kind, t_ms, shield_cfg)
        value = reading.value
        if fmt == "jsonl":
            payload = list(value) if isinstance(value, tuple) else value
            click.echo(json.dumps(
                {"t_ms": reading.timestamp_ms, "kind": kind.value, "value": payload}
            ))
        else:
            cells = value if isinstance(value, tuple) else (value,)
            click.echo(",".join([f"{reading.timestamp_ms:.6f}"] + [f"{c:.9g}" for c in cells]))


# ----------------------------------------------------------------------
# time


@main.group()
def time():
    """Timestamp shielding."""


@time.command("shield")
@click.option("--quantum", type=float, default=10.0, show_default=True)
@click.option("--no-randomize", is_flag=True, default=False)
@session_option
@origin_option
def time_shield(quantum, no_randomize, session, origin):
    """Shield newline-separated millisecond timestamps from stdin."""
    try:
        cfg = ShieldConfig(quantum_ms=quantum, randomize=not no_randomize)
    except ValueError as exc:
        raise _DomainError(str(exc))
    seed = _seed(session, origin, "time")

    def parse_lines():
        for line in sys.stdin:
            line = line.strip()
            if not line:
                continue
            try:
                yield float(line)
            except ValueError:
                raise _DomainError(f"not a timestamp: {line!r}") from None

    try:
        for shielded in shield_stream(seed, parse_lines(), cfg):
            click.echo(f"{shielded!r}")
    except ValueError as exc:
        raise _DomainError(str(exc))


# ----------------------------------------------------------------------
# fpd


@main.group()
def fpd():
    """Fingerprinting detection over API-call traces."""


@fpd.command("analyze")
@click.option("--trace", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--config", "config_path", type=click.Path(exists=True, path_type=Path))
@click.option("--mode", type=click.Choice([m.value for m in FpdMode]),
              default="passive", show_default=True)
@click.option("--report", "report_path", type=click.Path(path_type=Path))
def fpd_analyze(trace, config_path, mode, report_path):
    """Analyze a trace file and render the detection report."""
    cfg = _domain(load_fpd_config, config_path) if config_path else default_config()
    _state, verdict, report = _domain(analyze_trace, trace, cfg)
    click.echo(report.to_text())
    if report_path:
        report_path.write_text(report.to_json() + "\n")
    for directive in block_directives(verdict, mode):
        click.echo(f"directive: {directive.value}")


# ----------------------------------------------------------------------
# nbs


@main.group()
def nbs():
    """Network boundary decisions and the filtering proxy."""


@nbs.command("check")
@click.option("--origin-class", default="public", show_default=True,
              type=click.Choice([c.value for c in AddressClass]))
@click.option("--target", required=True, metavar="HOST[:PORT]")
@click.option("--resolved", metavar="IP")
@click.option("--mode", type=click.Choice([m.value for m in NbsMode]),
              default="preresolve", show_default=True)
def nbs_check(origin_class, target, resolved, mode):
    """Decide one request and print the decision."""
    import socket as socket_mod

    mode = NbsMode(mode)
    origin = AddressClass(origin_class)
    if target.startswith("[") and "]" in target:
        host = target[1 : target.index("]")]
    elif target.count(":") == 1:
        host = target.split(":", 1)[0]
    else:
        host = target  # bare hostname, or bracketless IPv6 literal
    if mode is NbsMode.PRE_RESOLVE and resolved is None:
        try:
            resolved = socket_mod.getaddrinfo(host, None)[0][4][0]
        except OSError as exc:
            raise _DomainError(f"resolver failure for {host!r}: {exc}")
    decision = _domain(decide, mode, origin, host, resolved, LearnCache())
    suffix = f": {decision.reason}" if decision.reason else ""
    click.echo(f"{decision.value.value}{suffix}")


@nbs.command("proxy")
@click.option("--listen", default="127.0.0.1:8080", show_default=True,
              metavar="ADDR:PORT")
@click.option("--mode", type=click.Choice([m.value for m in NbsMode]),
              default="preresolve", show_default=True)
@click.option("--origin-class", default="public", show_default=True,
              type=click.Choice([c.value for c in AddressClass]))
@click.option("--log", "log_path", type=click.Path(path_type=Path),
              help="JSONL decision log.")
def nbs_proxy(listen, mode, origin_class, log_path):
    """Run the filtering forward proxy until interrupted."""
    host, _, port_text = listen.rpartition(":")
    try:
        port = int(port_text)
    except ValueError:
        raise click.BadParameter(f"invalid listen address: {listen!r}")
    config = ProxyConfig(
        listen_host=host or "127.0.0.1",
        listen_port=port,
        mode=NbsMode(mode),
        origin_class=AddressClass(origin_class),
        log_path=log_path,
    )
    try:
        service = run_proxy(config)
    except OSError as exc:
        raise _DomainError(f"cannot bind {listen!r}: {exc}")
    bound_host, bound_port = service.address
    click.echo(f"listening on {bound_host}:{bound_port} mode={mode}")
    sys.stdout.flush()

    import signal
    import threading

    stopping = threading.Event()
    for signum in (signal.SIGTERM, signal.SIGINT):
        signal.signal(signum, lambda *_: stopping.set())
    try:
        stopping.wait()
    finally:
        service.stop()  # flushes pending coalesced log windows


if __name__ == "__main__":
    main()
