"""Node identities, pairwise end-node keys, and the keyed authenticator.

The authenticator is a keyed 64-bit digest over a canonical, injective
serialization of message fields.  Security is a *model* property: a node can
only produce digests for key pairs it actually holds, which is enforced by
KeyRing rather than by computational hardness.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Sequence

DIGEST_BYTES = 8


class KeyAccessError(Exception):
    """A node invoked the authenticator with a key it does not hold."""


def _encode(obj, out: bytearray) -> None:
    # Type-tagged, length-prefixed encoding; injective over nested
    # str/int/None/tuple-or-list values.
    if isinstance(obj, str):
        raw = obj.encode("utf-8")
        out += b"s"
        out += len(raw).to_bytes(4, "big")
        out += raw
    elif isinstance(obj, bool):  # bool before int: bool is an int subclass
        out += b"b1" if obj else b"b0"
    elif isinstance(obj, int):
        raw = str(obj).encode("ascii")
        out += b"i"
        out += len(raw).to_bytes(4, "big")
        out += raw
    elif obj is None:
        out += b"n"
    elif isinstance(obj, (tuple, list)):
        out += b"l"
        out += len(obj).to_bytes(4, "big")
        for item in obj:
            _encode(item, out)
    else:
        raise TypeError(f"unencodable field type: {type(obj).__name__}")


def encode_fields(fields: Sequence) -> bytes:
    """Canonical wire encoding of an ordered field list.

    Distinct field lists never encode identically (length prefixes make the
    encoding injective), so digests over this encoding commit to the exact
    field values, including empty lists vs. missing entries.
    """
    out = bytearray()
    _encode(tuple(fields), out)
    return bytes(out)


def f_k(key: bytes, fields: Sequence) -> int:
    """Keyed digest over the canonical serialization of `fields`."""
    h = hashlib.blake2b(encode_fields(fields), digest_size=DIGEST_BYTES, key=key)
    return int.from_bytes(h.digest(), "big")


def _pair(a: str, b: str) -> tuple[str, str]:
    return (a, b) if a <= b else (b, a)


@dataclass
class KeyTable:
    """Scenario-wide registry of pairwise symmetric keys.

    Key material is derived deterministically from the node pair so that runs
    are reproducible.  Every authenticator computation is logged so tests can
    audit that no accepted digest was produced by a third party.
    """

    _keys: dict[tuple[str, str], bytes] = field(default_factory=dict)
    calls: list[tuple[str, tuple[str, str], int]] = field(default_factory=list)

    def grant(self, a: str, b: str) -> None:
        if a == b:
            raise ValueError("a node cannot share a key with itself")
        p = _pair(a, b)
        self._keys.setdefault(
            p, hashlib.blake2b(f"pairkey|{p[0]}|{p[1]}".encode(), digest_size=32).digest()
        )

    def shares_key(self, a: str, b: str) -> bool:
        return _pair(a, b) in self._keys

    def ring(self, holder: str) -> "KeyRing":
        return KeyRing(self, holder)

    def _mac(self, holder: str, peer: str, fields: Sequence) -> int:
        p = _pair(holder, peer)
        key = self._keys.get(p)
        if key is None:
            raise KeyAccessError(f"{holder} holds no key shared with {peer}")
        digest = f_k(key, fields)
        self.calls.append((holder, p, digest))
        return digest


@dataclass(frozen=True)
class KeyRing:
    """A single node's view of the key table.

    mac() models the authenticator function: it succeeds only for peers the
    holder genuinely shares a key with, which is how forgery infeasibility is
    represented in the simulation.
    """

    table: KeyTable
    holder: str

    def holds(self, peer: str) -> bool:
        return self.table.shares_key(self.holder, peer)

    def mac(self, peer: str, fields: Sequence) -> int:
        return self.table._mac(self.holder, peer, fields)

    def verify(self, peer: str, fields: Sequence, digest: int) -> bool:
        return self.mac(peer, fields) == digest
