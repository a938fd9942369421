"""Network boundary decisions: keep public pages out of local networks.

A page served from the public Internet has no business steering the
browser toward loopback, RFC 1918, link-local, or unique-local targets;
that turns the browser into a port scanner or a proxy into the LAN.
Targets are classified into address tiers and a request is a boundary
crossing when it moves strictly inward:

    Public (2)  >  Private / UniqueLocal / LinkLocal (1)  >  Loopback (0)

The unspecified address (0.0.0.0, ::) is always treated as a crossing:
DNS-based blockers return it for filtered domains, so a request there is
already known-bad and blocking it with a clear reason avoids the
confusing loopback false positives those filters otherwise cause.

Two operating modes mirror what a deployment can know before sending:

* pre-resolve: the resolver is consulted first and a crossing request is
  refused before a single byte leaves.
* learn-on-reply: the first request to an unknown hostname goes through,
  the peer address is recorded from the reply, and every later request
  to that hostname is decided from the cache.
"""

from __future__ import annotations

import ipaddress
import threading
import time
from dataclasses import dataclass
from enum import Enum


class AddressClass(Enum):
    LOOPBACK = "loopback"
    PRIVATE = "private"
    LINK_LOCAL = "link_local"
    UNIQUE_LOCAL = "unique_local"
    UNSPECIFIED = "unspecified"
    PUBLIC = "public"


class NbsMode(Enum):
    PRE_RESOLVE = "preresolve"
    LEARN_ON_REPLY = "learn"


class Decision(Enum):
    ALLOW = "Allow"
    ALLOW_AND_LEARN = "AllowAndLearn"
    BLOCK = "Block"


@dataclass(frozen=True)
class BoundaryDecision:
    value: Decision
    reason: str = ""


_V4_RANGES = [
    (ipaddress.ip_network("127.0.0.0/8"), AddressClass.LOOPBACK),
    (ipaddress.ip_network("10.0.0.0/8"), AddressClass.PRIVATE),
    (ipaddress.ip_network("172.16.0.0/12"), AddressClass.PRIVATE),
    (ipaddress.ip_network("192.168.0.0/16"), AddressClass.PRIVATE),
    (ipaddress.ip_network("169.254.0.0/16"), AddressClass.LINK_LOCAL),
]

_V6_RANGES = [
    (ipaddress.ip_network("fe80::/10"), AddressClass.LINK_LOCAL),
    (ipaddress.ip_network("fc00::/7"), AddressClass.UNIQUE_LOCAL),
]

# Depth in the boundary ordering; crossing = src deeper than dst.
# The unspecified address ranks with loopback as a source and is always
# a crossing as a destination.
_RANK = {
    AddressClass.PUBLIC: 2,
    AddressClass.PRIVATE: 1,
    AddressClass.UNIQUE_LOCAL: 1,
    AddressClass.LINK_LOCAL: 1,
    AddressClass.LOOPBACK: 0,
    AddressClass.UNSPECIFIED: 0,
}


def parse_ip(value) -> ipaddress.IPv4Address | ipaddress.IPv6Address:
    try:
        ip = ipaddress.ip_address(value)
    except ValueError as exc:
        raise ValueError(f"malformed IP address: {value!r}") from exc
    # v4-mapped v6 addresses classify as their embedded v4 address
    if isinstance(ip, ipaddress.IPv6Address) and ip.ipv4_mapped is not None:
        return ip.ipv4_mapped
    return ip


def classify_address(value) -> AddressClass:
    """Classify a syntactically valid IPv4/IPv6 address into its tier."""
    ip = parse_ip(value)
    if isinstance(ip, ipaddress.IPv4Address):
        if ip == ipaddress.IPv4Address("0.0.0.0"):
            return AddressClass.UNSPECIFIED
        for network, cls in _V4_RANGES:
            if ip in network:
                return cls
        return AddressClass.PUBLIC
    if ip == ipaddress.IPv6Address("::"):
        return AddressClass.UNSPECIFIED
    if ip == ipaddress.IPv6Address("::1"):
        return AddressClass.LOOPBACK
    for network, cls in _V6_RANGES:
        if ip in network:
            return cls
    return AddressClass.PUBLIC


def crosses_boundary(src: AddressClass, dst: AddressClass) -> bool:
    """True when a request from src to dst moves strictly inward."""
    if dst is AddressClass.UNSPECIFIED:
        return True
    return _RANK[src] > _RANK[dst]


class LearnCache:
    """Hostname -> learned address class, recorded from reply peers.

    Concurrent readers are fine; writes are serialized and the last
    observation for a hostname wins.  Lookups never mutate.
    """

    def __init__(self):
        self._entries: dict = {}
        self._lock = threading.Lock()

    def learn(self, hostname: str, cls: AddressClass) -> None:
        with self._lock:
            self._entries[hostname.lower()] = (cls, time.time())

    def lookup(self, hostname: str) -> AddressClass | None:
        entry = self._entries.get(hostname.lower())
        return entry[0] if entry else None

    def inserted_at(self, hostname: str) -> float | None:
        entry = self._entries.get(hostname.lower())
        return entry[1] if entry else None

    def __len__(self) -> int:
        return len(self._entries)


def observe_reply(cache: LearnCache, hostname: str, ip) -> LearnCache:
    """Record the peer address class observed in a reply."""
    cache.learn(hostname, classify_address(ip))
    return cache


def _literal_ip(host: str):
    candidate = host.strip("[]")
    try:
        return parse_ip(candidate)
    except ValueError:
        return None


def _block_reason(origin: AddressClass, target: AddressClass, host: str) -> str:
    if target is AddressClass.UNSPECIFIED:
        return (
            f"target {host!r} resolves to the unspecified address "
            f"({origin.value} origin); typical of DNS-based blocklist filtering"
        )
    return (
        f"request from {origin.value} origin would cross the network boundary "
        f"into {target.value} target {host!r}"
    )


def decide(
    mode: NbsMode,
    origin_class: AddressClass,
    target_host: str,
    resolved=None,
    cache: LearnCache | None = None,
) -> BoundaryDecision:
    """Decide one request. Pure in its arguments.

    pre-resolve requires the resolved address (resolver consulted before
    anything is sent); learn-on-reply decides literal IPs directly, uses
    the cache for known hostnames, and lets first contacts through to be
    learned.
    """
    if mode is NbsMode.PRE_RESOLVE:
        if resolved is None:
            raise ValueError(
                f"pre-resolve mode needs a resolved address for {target_host!r}"
            )
        target = classify_address(resolved)
        if crosses_boundary(origin_class, target):
            return BoundaryDecision(
                Decision.BLOCK, _block_reason(origin_class, target, target_host)
            )
        return BoundaryDecision(
            Decision.ALLOW, f"{origin_class.value} -> {target.value}: no crossing"
        )

    literal = _literal_ip(target_host)
    if literal is not None:
        target = classify_address(literal)
        if crosses_boundary(origin_class, target):
            return BoundaryDecision(
                Decision.BLOCK, _block_reason(origin_class, target, target_host)
            )
        return BoundaryDecision(
            Decision.ALLOW, f"{origin_class.value} -> {target.value}: no crossing"
        )

    cached = cache.lookup(target_host) if cache is not None else None
    if cached is not None:
        if crosses_boundary(origin_class, cached):
            return BoundaryDecision(
                Decision.BLOCK, _block_reason(origin_class, cached, target_host)
            )
        return BoundaryDecision(
            Decision.ALLOW,
            f"{origin_class.value} -> learned {cached.value}: no crossing",
        )
    return BoundaryDecision(
        Decision.ALLOW_AND_LEARN,
        f"first contact with {target_host!r}; peer address will be learned from the reply",
    )
