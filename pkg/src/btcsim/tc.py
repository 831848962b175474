"""Non-interactive threshold cryptosystem over a small Schnorr group.

The reference backend evaluates ``Eval(s, x) = s * H(x) mod q``. The secret is
dealt with a Shamir polynomial over the exponent field, and shares are verified
against Feldman-style exponent commitments ``g^f(i) mod p``.

The group is deliberately tiny (a 31-bit subgroup inside a 64-bit prime field)
and offers no cryptographic security. It exists so that every algorithm of a
threshold cryptosystem (setup, sharing, partial evaluation, verification and
combination) can be exercised exactly and quickly inside a simulator.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Iterable, Sequence, Union

import numpy as np

__all__ = [
    "BOT",
    "Bottom",
    "ConfigurationError",
    "DESK_SCALE",
    "DomainError",
    "EvalInput",
    "InsufficientSharesError",
    "OutputShare",
    "PublicCommitments",
    "PublicParameters",
    "SecretShareBundle",
    "SecurityToggle",
    "TCOutput",
    "ThresholdError",
    "ThresholdParams",
    "comb",
    "double_share_gen",
    "evaluate",
    "hash_to_field",
    "keys_from_json",
    "keys_to_json",
    "lagrange_at_zero",
    "peval",
    "pver",
    "setup",
    "share_gen",
]


class ThresholdError(Exception):
    """Base class for threshold-cryptosystem failures."""


class ConfigurationError(ThresholdError, ValueError):
    """Parameters or weights are inconsistent."""


class DomainError(ThresholdError, ValueError):
    """A field element is outside ``[0, q)``."""


class InsufficientSharesError(ThresholdError):
    """Fewer than ``t_rec`` distinct valid share units were supplied."""


class Bottom:
    """The distinguished "no value" marker, printed as ``⊥``."""

    _instance: Bottom | None = None

    def __new__(cls) -> Bottom:
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "⊥"

    def __reduce__(self):
        return (Bottom, ())


BOT = Bottom()

Value = Union[bytes, Bottom]


class SecurityToggle(str, Enum):
    DESK_SCALE = "desk_scale"


@dataclass(frozen=True)
class PublicParameters:
    """Group description plus the keyed hash used by evaluation.

    ``q`` is the prime subgroup order (the exponent field), ``p = cofactor*q + 1``
    is the prime modulus and ``g`` generates the order-``q`` subgroup.
    """

    p: int
    q: int
    g: int
    cofactor: int
    hash_key: bytes

    def is_member(self, x: int) -> bool:
        return 0 < x < self.p and pow(x, self.q, self.p) == 1

    def to_dict(self) -> dict:
        return {
            "p": str(self.p),
            "q": str(self.q),
            "g": str(self.g),
            "cofactor": str(self.cofactor),
            "hash_key": self.hash_key.hex(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> PublicParameters:
        return cls(
            p=int(d["p"]),
            q=int(d["q"]),
            g=int(d["g"]),
            cofactor=int(d["cofactor"]),
            hash_key=bytes.fromhex(d["hash_key"]),
        )


# q = 2^31 - 1 keeps every product of two field elements below 2^62, so the
# Lagrange arithmetic can run in numpy int64 without overflow.
DESK_SCALE = PublicParameters(
    p=9223372101279285217,
    q=2147483647,
    g=7338643727502855349,
    cofactor=4294967328,
    hash_key=b"btcsim/h2f/v1",
)


def setup(security_toggle: SecurityToggle | str = SecurityToggle.DESK_SCALE) -> PublicParameters:
    """Return the fixed public parameters for ``security_toggle``."""
    toggle = SecurityToggle(security_toggle)
    if toggle is SecurityToggle.DESK_SCALE:
        return DESK_SCALE
    raise ConfigurationError(f"unknown security toggle {security_toggle!r}")  # pragma: no cover


@lru_cache(maxsize=1 << 16)
def _h2f(key: bytes, q: int, data: bytes) -> int:
    digest = hashlib.blake2b(data, key=key, digest_size=32).digest()
    h = int.from_bytes(digest, "big") % q
    # A zero hash would make every evaluation zero; remap to keep H into Z_q^*.
    return h or 1


def hash_to_field(data: bytes, pp: PublicParameters = DESK_SCALE) -> int:
    """Keyed BLAKE2b of ``data`` reduced into ``[1, q)``."""
    return _h2f(pp.hash_key, pp.q, bytes(data))


@dataclass(frozen=True)
class EvalInput:
    """A round number paired with a message or ``BOT``."""

    round: int
    message: Value

    def __post_init__(self) -> None:
        if self.round < 0 or self.round >= 1 << 64:
            raise DomainError(f"round {self.round} does not fit in 8 bytes")
        if not isinstance(self.message, (bytes, Bottom)):
            raise TypeError("message must be bytes or BOT")

    @property
    def is_bottom(self) -> bool:
        return self.message is BOT

    def encode(self) -> bytes:
        head = self.round.to_bytes(8, "big")
        if self.message is BOT:
            return head + b"\x00"
        return head + b"\x01" + self.message

    @classmethod
    def decode(cls, data: bytes) -> EvalInput:
        if len(data) < 9 or data[8] not in (0, 1):
            raise DomainError("malformed EvalInput encoding")
        r = int.from_bytes(data[:8], "big")
        if data[8] == 0:
            if len(data) != 9:
                raise DomainError("trailing bytes after bottom tag")
            return cls(r, BOT)
        return cls(r, bytes(data[9:]))


@dataclass(frozen=True)
class ThresholdParams:
    n_units: int
    t_sec: int
    t_rec: int

    def __post_init__(self) -> None:
        if not 1 <= self.t_sec <= self.t_rec <= self.n_units:
            raise ConfigurationError(
                f"need 1 <= t_sec <= t_rec <= n_units, got {self.t_sec}, {self.t_rec}, {self.n_units}"
            )

    @property
    def is_tight(self) -> bool:
        return self.t_sec == self.t_rec

    @property
    def is_ramp(self) -> bool:
        return self.t_sec < self.t_rec


@dataclass(frozen=True)
class SecretShareBundle:
    """The share units held by one party."""

    params: ThresholdParams
    owner_units: tuple[int, ...]
    share_values: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.owner_units) != len(self.share_values):
            raise ConfigurationError("owner_units and share_values differ in length")
        if len(set(self.owner_units)) != len(self.owner_units):
            raise ConfigurationError("duplicate unit index in bundle")
        for u in self.owner_units:
            if not 1 <= u <= self.params.n_units:
                raise ConfigurationError(f"unit index {u} out of range")

    @property
    def weight(self) -> int:
        return len(self.owner_units)


@dataclass(frozen=True)
class PublicCommitments:
    """Per-unit commitments ``g^f(i)``; index 0 of ``values`` is unit 1."""

    values: tuple[int, ...]
    pp: PublicParameters = DESK_SCALE
    # Memo of verified (unit, value, h) triples. Excluded from equality.
    _accepted: dict = field(default_factory=dict, compare=False, repr=False, hash=False)

    @property
    def n_units(self) -> int:
        return len(self.values)

    def commitment(self, unit: int) -> int:
        return self.values[unit - 1]

    def check_members(self) -> bool:
        return all(self.pp.is_member(c) for c in self.values)


@dataclass(frozen=True)
class OutputShare:
    unit_index: int
    value: int
    input: EvalInput


@dataclass(frozen=True)
class TCOutput:
    value: int
    input: EvalInput


def _check_field(x: int, pp: PublicParameters) -> None:
    if not 0 <= x < pp.q:
        raise DomainError(f"{x} is not a field element mod {pp.q}")


def _coefficients(seed: int, domain: bytes, count: int, q: int) -> list[int]:
    """Deterministic field elements from a BLAKE2b counter stream."""
    seed_bytes = (seed % (1 << 64)).to_bytes(8, "big")
    out = []
    ctr = 0
    while len(out) < count:
        block = hashlib.blake2b(
            domain + b"|" + seed_bytes + ctr.to_bytes(8, "big"),
            key=b"btcsim/dealer/v1",
            digest_size=16,
        ).digest()
        out.append(int.from_bytes(block, "big") % q)
        ctr += 1
    return out


def _poly_eval(coeffs: Sequence[int], x: int, q: int) -> int:
    acc = 0
    for c in reversed(coeffs):
        acc = (acc * x + c) % q
    return acc


def _unit_ranges(weights: Sequence[int]) -> list[tuple[int, ...]]:
    ranges = []
    nxt = 1
    for w in weights:
        if w < 0:
            raise ConfigurationError("weights must be non-negative")
        ranges.append(tuple(range(nxt, nxt + w)))
        nxt += w
    return ranges


def _share(
    secret: int,
    params: ThresholdParams,
    weights: Sequence[int],
    seed: int,
    domain: bytes,
    pp: PublicParameters,
) -> tuple[PublicCommitments, list[SecretShareBundle]]:
    _check_field(secret, pp)
    if sum(weights) != params.n_units:
        raise ConfigurationError(
            f"weights sum to {sum(weights)} but params expect {params.n_units} units"
        )
    coeffs = [secret] + _coefficients(seed, domain, params.t_rec - 1, pp.q)
    shares = [_poly_eval(coeffs, i, pp.q) for i in range(1, params.n_units + 1)]
    commitments = PublicCommitments(tuple(pow(pp.g, s, pp.p) for s in shares), pp)
    bundles = [
        SecretShareBundle(params, units, tuple(shares[u - 1] for u in units))
        for units in _unit_ranges(weights)
    ]
    return commitments, bundles


def share_gen(
    secret: int,
    params: ThresholdParams,
    weights: Sequence[int],
    rng_seed: int,
    pp: PublicParameters = DESK_SCALE,
) -> tuple[PublicCommitments, list[SecretShareBundle]]:
    """Deal ``secret`` with a degree ``t_rec - 1`` polynomial.

    Party ``k`` receives ``weights[k]`` consecutive unit indices, starting at 1
    for party 0. The result is a deterministic function of the arguments.
    """
    return _share(secret, params, weights, rng_seed, b"single", pp)


def double_share_gen(
    secret: int,
    params_slow: ThresholdParams,
    params_fast: ThresholdParams,
    weights: Sequence[int],
    seed: int,
    pp: PublicParameters = DESK_SCALE,
) -> tuple[
    tuple[PublicCommitments, list[SecretShareBundle]],
    tuple[PublicCommitments, list[SecretShareBundle]],
]:
    """Share one secret twice, with independent randomness per sharing."""
    if params_slow.n_units != params_fast.n_units:
        raise ConfigurationError("both sharings must cover the same number of units")
    slow = _share(secret, params_slow, weights, seed, b"slow", pp)
    fast = _share(secret, params_fast, weights, seed, b"fast", pp)
    return slow, fast


def evaluate(secret: int, inp: EvalInput, pp: PublicParameters = DESK_SCALE) -> TCOutput:
    """The reference function ``secret * H(enc(inp)) mod q``."""
    _check_field(secret, pp)
    return TCOutput(secret * hash_to_field(inp.encode(), pp) % pp.q, inp)


def peval(
    bundle: SecretShareBundle, inp: EvalInput, pp: PublicParameters = DESK_SCALE
) -> tuple[OutputShare, ...]:
    """One output share per unit held in ``bundle``."""
    h = hash_to_field(inp.encode(), pp)
    q = pp.q
    return tuple(
        OutputShare(u, s * h % q, inp) for u, s in zip(bundle.owner_units, bundle.share_values)
    )


def pver(commitments: PublicCommitments, inp: EvalInput, share: OutputShare) -> bool:
    """Accept iff ``g^value == C_unit^H(inp)`` and the share is bound to ``inp``."""
    pp = commitments.pp
    u = share.unit_index
    if share.input != inp or not 1 <= u <= commitments.n_units:
        return False
    v = share.value
    if not 0 <= v < pp.q:
        return False
    h = hash_to_field(inp.encode(), pp)
    key = (u, v, h)
    cached = commitments._accepted.get(key)
    if cached is not None:
        return cached
    ok = pow(pp.g, v, pp.p) == pow(commitments.values[u - 1], h, pp.p)
    commitments._accepted[key] = ok
    return ok


@lru_cache(maxsize=4096)
def _lagrange_cached(xs: tuple[int, ...], q: int) -> tuple[int, ...]:
    k = len(xs)
    if k == 1:
        return (1,)
    x = np.asarray(xs, dtype=np.int64)
    diff = (x[None, :] - x[:, None]) % q  # diff[j, m] = x_m - x_j
    np.fill_diagonal(diff, 1)
    # Pairwise product reduction along each row keeps every product < 2^62.
    while diff.shape[1] > 1:
        if diff.shape[1] % 2:
            diff = np.concatenate([diff, np.ones((k, 1), dtype=np.int64)], axis=1)
        diff = diff[:, 0::2] * diff[:, 1::2] % q
    denoms = [int(d) for d in diff[:, 0]]
    total = 1
    for xm in xs:
        total = total * xm % q
    return tuple(
        total * pow(xj, -1, q) % q * pow(dj, -1, q) % q for xj, dj in zip(xs, denoms)
    )


def lagrange_at_zero(xs: Sequence[int], q: int = DESK_SCALE.q) -> tuple[int, ...]:
    """Coefficients ``l_j`` with ``f(0) = sum(l_j * f(x_j))`` for distinct nonzero ``xs``."""
    xs = tuple(int(v) for v in xs)
    if len(set(xs)) != len(xs):
        raise DomainError("interpolation points must be distinct")
    if any(v % q == 0 for v in xs):
        raise DomainError("interpolation point 0 is not allowed")
    return _lagrange_cached(xs, q)


def comb(
    share_set: Iterable[OutputShare],
    commitments: PublicCommitments,
    inp: EvalInput,
    t_rec: int,
    *,
    verified: bool = False,
) -> TCOutput:
    """Combine shares into ``Eval(secret, inp)``.

    Shares failing ``pver`` are discarded first (unless ``verified`` says the
    caller already did so). The interpolation uses the ``t_rec`` smallest unit
    indices among the survivors; any other choice gives the same value.
    """
    by_unit: dict[int, int] = {}
    for sh in share_set:
        if sh.unit_index in by_unit:
            continue
        if verified or pver(commitments, inp, sh):
            by_unit[sh.unit_index] = sh.value
    if len(by_unit) < t_rec:
        raise InsufficientSharesError(
            f"{len(by_unit)} valid units available, {t_rec} required"
        )
    units = sorted(by_unit)[:t_rec]
    q = commitments.pp.q
    lam = _lagrange_cached(tuple(units), q)
    value = sum(l * by_unit[u] for l, u in zip(lam, units)) % q
    return TCOutput(value, inp)


# --- serialization ---------------------------------------------------------

KEY_FORMAT = "btcsim-keys/1"


def _params_dict(p: ThresholdParams) -> dict:
    return {"n_units": p.n_units, "t_sec": p.t_sec, "t_rec": p.t_rec}


def keys_to_json(
    commitments: PublicCommitments,
    bundles: Sequence[SecretShareBundle],
    *,
    label: str = "",
) -> str:
    """Serialize one sharing. Field and group elements are decimal strings."""
    params = bundles[0].params if bundles else None
    doc = {
        "format": KEY_FORMAT,
        "label": label,
        "group": commitments.pp.to_dict(),
        "params": _params_dict(params) if params else None,
        "commitments": [str(c) for c in commitments.values],
        "bundles": [
            {"owner_units": list(b.owner_units), "share_values": [str(v) for v in b.share_values]}
            for b in bundles
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def keys_from_json(text: str) -> tuple[PublicCommitments, list[SecretShareBundle]]:
    doc = json.loads(text)
    if doc.get("format") != KEY_FORMAT:
        raise ConfigurationError(f"unsupported key format {doc.get('format')!r}")
    pp = PublicParameters.from_dict(doc["group"])
    commitments = PublicCommitments(tuple(int(c) for c in doc["commitments"]), pp)
    params = ThresholdParams(**doc["params"])
    bundles = [
        SecretShareBundle(
            params, tuple(b["owner_units"]), tuple(int(v) for v in b["share_values"])
        )
        for b in doc["bundles"]
    ]
    return commitments, bundles
