"""Threshold evaluation layered on consensus finalization.

Three constructions share one output pipeline (finalized rounds wait in a FIFO
and leave it only once their threshold output is known, so outputs follow
round order):

``SlowPath``
    Reveal the share for ``(r, m)`` after finalizing it. One extra message delay.
``TightPath``
    Reveal the share when prefinalizing, with ``t_sec = t_rec = t_fin``, so the
    share travels next to the PREFIN message. No extra delay.
``FastPath``
    Two sharings of one secret. The fast sharing (``t_sec' = t_fin``) is revealed
    at prefinalize, the slow sharing at finalize as a fallback.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import NamedTuple, Sequence

from .consensus import ALL, ConsensusConfig
from .rounding import WeightProfile, feasible_interval
from .tc import (
    EvalInput,
    OutputShare,
    PublicCommitments,
    SecretShareBundle,
    TCOutput,
    ThresholdParams,
    Value,
    comb,
    double_share_gen,
    evaluate,
    hash_to_field,
    share_gen,
)

__all__ = [
    "BtcOutput",
    "BtcParty",
    "DealtKeys",
    "FAST_SHARE",
    "FastPath",
    "PathConfig",
    "PathConfigError",
    "SHARE",
    "SLOW_SHARE",
    "ShareMsg",
    "SlowPath",
    "TightPath",
    "deal",
    "make_protocol",
    "outputs_agree",
    "share_kind_path",
]

SHARE = "SHARE"
FAST_SHARE = "FAST-SHARE"
SLOW_SHARE = "SLOW-SHARE"

PROTOCOLS = ("slow", "tight", "fast")


class PathConfigError(ValueError):
    """Threshold configuration violates a protocol's setup inequalities."""


class ShareMsg(NamedTuple):
    kind: str
    round: int
    value: Value
    sender: int
    shares: tuple


@dataclass(frozen=True)
class BtcOutput:
    round: int
    value: Value
    tc_output: TCOutput
    path: str  # "slow", "fast" or "tight"
    finalize_time: int
    output_time: int

    @property
    def latency(self) -> int:
        return self.output_time - self.finalize_time


@dataclass(frozen=True)
class PathConfig:
    """Which protocol runs, with stake thresholds and the unit-level sharing.

    Stake pairs are ``(t_sec, t_rec)``. Units are handed out by ``weights``;
    ``w_slow`` and ``w_fast`` are the unit counts needed to combine on each
    sharing. The tight protocol uses ``weights = stakes`` and ``w_slow = t_fin``.
    """

    protocol: str
    consensus: ConsensusConfig
    weights: tuple[int, ...]
    slow_pair: tuple[int, int]
    w_slow: int
    fast_pair: tuple[int, int] | None = None
    w_fast: int | None = None
    checked: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "weights", tuple(int(w) for w in self.weights))
        if self.checked:
            self.validate()

    # -- constructors ------------------------------------------------------

    @classmethod
    def tight(cls, consensus: ConsensusConfig) -> PathConfig:
        t_fin = consensus.t_fin
        return cls("tight", consensus, consensus.party_stakes, (t_fin, t_fin), t_fin)

    @classmethod
    def slow(
        cls,
        consensus: ConsensusConfig,
        t_sec: int,
        t_rec: int,
        profile: WeightProfile | None = None,
    ) -> PathConfig:
        if profile is None:
            return cls("slow", consensus, consensus.party_stakes, (t_sec, t_rec), t_rec)
        return cls("slow", consensus, profile.weights, (t_sec, t_rec), profile.w_slow)

    @classmethod
    def fast(
        cls,
        consensus: ConsensusConfig,
        slow_pair: tuple[int, int],
        fast_pair: tuple[int, int],
        profile: WeightProfile | None = None,
    ) -> PathConfig:
        if profile is None:
            return cls(
                "fast",
                consensus,
                consensus.party_stakes,
                tuple(slow_pair),
                slow_pair[1],
                tuple(fast_pair),
                fast_pair[1],
            )
        if profile.w_fast is None:
            raise PathConfigError("fast path needs a dual weight profile")
        return cls(
            "fast",
            consensus,
            profile.weights,
            tuple(slow_pair),
            profile.w_slow,
            tuple(fast_pair),
            profile.w_fast,
        )

    # -- checks --------------------------------------------------------------

    @property
    def total_weight(self) -> int:
        return sum(self.weights)

    def validate(self) -> None:
        c = self.consensus
        n, t, t_fin = c.total_stake, c.fault_bound, c.t_fin
        stakes = c.party_stakes
        if self.protocol not in PROTOCOLS:
            raise PathConfigError(f"unknown protocol {self.protocol!r}")
        if len(self.weights) != c.n_parties or any(w < 0 for w in self.weights):
            raise PathConfigError("need one non-negative weight per party")
        if self.total_weight <= 0:
            raise PathConfigError("total weight must be positive")
        ts, tr = self.slow_pair
        if self.protocol == "tight":
            if not ts == tr == t_fin:
                raise PathConfigError("tight protocol needs t_sec = t_rec = t_fin")
            if self.weights != stakes or self.w_slow != t_fin:
                raise PathConfigError("tight protocol shares by stake with threshold t_fin")
        elif not t + 1 <= ts <= tr <= n - t:
            raise PathConfigError(
                f"slow pair ({ts}, {tr}) must satisfy t+1 <= t_sec <= t_rec <= n-t"
            )
        self._check_units(stakes, self.slow_pair, self.w_slow, "slow")
        if self.protocol == "fast":
            if self.fast_pair is None or self.w_fast is None:
                raise PathConfigError("fast protocol needs a fast pair and w_fast")
            fs, fr = self.fast_pair
            if not fs == t_fin < fr <= n:
                raise PathConfigError(
                    f"fast pair ({fs}, {fr}) must satisfy t_sec' = t_fin < t_rec' <= n"
                )
            self._check_units(stakes, self.fast_pair, self.w_fast, "fast")

    def _check_units(self, stakes, pair, w, name) -> None:
        if not 1 <= w <= self.total_weight:
            raise PathConfigError(f"{name} unit threshold {w} out of range")
        ts, tr = pair
        if self.weights == tuple(stakes):
            # Sharing by stake: any threshold between the two stake thresholds works.
            ok = ts <= w <= tr
        elif ts == tr:
            ok = False
        else:
            lo, hi = feasible_interval(stakes, self.weights, ts, tr)
            ok = lo <= w <= hi
        if not ok:
            raise PathConfigError(
                f"{name} weights/threshold do not meet the subset guarantees for ({ts}, {tr})"
            )

    @property
    def slow_params(self) -> ThresholdParams:
        return ThresholdParams(self.total_weight, self.w_slow, self.w_slow)

    @property
    def fast_params(self) -> ThresholdParams | None:
        if self.w_fast is None:
            return None
        return ThresholdParams(self.total_weight, self.w_fast, self.w_fast)


@dataclass(frozen=True)
class DealtKeys:
    """Dealer output: the secret and one or two sharings of it."""

    secret: int
    slow_commitments: PublicCommitments
    slow_bundles: tuple[SecretShareBundle, ...]
    fast_commitments: PublicCommitments | None = None
    fast_bundles: tuple[SecretShareBundle, ...] | None = None

    def oracle(self, r: int, value: Value) -> TCOutput:
        return evaluate(self.secret, EvalInput(r, value), self.slow_commitments.pp)


def deal(path: PathConfig, secret: int, seed: int) -> DealtKeys:
    """Run the trusted dealer for ``path``."""
    if path.protocol == "fast":
        (sc, sb), (fc, fb) = double_share_gen(
            secret, path.slow_params, path.fast_params, path.weights, seed
        )
        return DealtKeys(secret, sc, tuple(sb), fc, tuple(fb))
    sc, sb = share_gen(secret, path.slow_params, path.weights, seed)
    return DealtKeys(secret, sc, tuple(sb))


class _Accumulator:
    """Verified share units for one (round, value) on one sharing."""

    __slots__ = ("units", "senders")

    def __init__(self) -> None:
        self.units: dict[int, int] = {}
        self.senders: set[int] = set()


class BtcParty:
    """Shared state and output pipeline of every construction."""

    path_name = "slow"

    def __init__(self, party: int, path: PathConfig, keys: DealtKeys) -> None:
        self.party = party
        self.path = path
        self.keys = keys
        self.m_map: dict[int, Value] = {}
        self.sigma: dict[int, tuple[Value, TCOutput, str]] = {}
        self.queue: deque[int] = deque()
        self.fin_time: dict[int, int] = {}
        self.outputs: list[BtcOutput] = []
        self.next_out = 0
        self.invalid_shares = 0
        self._acc: dict[int, dict[tuple[str, Value], _Accumulator]] = {}
        self._inputs: dict[tuple[int, Value], tuple[EvalInput, int]] = {}
        self._pp = keys.slow_commitments.pp

    # -- helpers -------------------------------------------------------------

    def _input(self, r: int, value: Value) -> tuple[EvalInput, int]:
        key = (r, value)
        got = self._inputs.get(key)
        if got is None:
            inp = EvalInput(r, value)
            got = self._inputs[key] = (inp, hash_to_field(inp.encode(), self._pp))
        return got

    def _shares(self, bundle: SecretShareBundle, r: int, value: Value) -> tuple:
        inp, h = self._input(r, value)
        q = self._pp.q
        return tuple(
            OutputShare(u, s * h % q, inp)
            for u, s in zip(bundle.owner_units, bundle.share_values)
        )

    def _send(self, sends: list, kind: str, r: int, value: Value, bundle) -> None:
        sends.append((ALL, ShareMsg(kind, r, value, self.party, self._shares(bundle, r, value))))

    def _accept(
        self,
        msg: ShareMsg,
        commitments: PublicCommitments,
        threshold: int,
        tag: str,
        now: int,
    ) -> None:
        r = msg.round
        if r < self.next_out or r in self.sigma:
            return
        per_round = self._acc.get(r)
        if per_round is None:
            per_round = self._acc[r] = {}
        key = (tag, msg.value)
        acc = per_round.get(key)
        if acc is None:
            acc = per_round[key] = _Accumulator()
        if msg.sender in acc.senders:
            return
        acc.senders.add(msg.sender)
        inp, h = self._input(r, msg.value)
        pp = commitments.pp
        p, g = pp.p, pp.g
        cache = commitments._accepted
        cvals = commitments.values
        n_units = len(cvals)
        units = acc.units
        for sh in msg.shares:
            u, v = sh.unit_index, sh.value
            if u in units:
                continue
            if sh.input != inp or not 1 <= u <= n_units or not 0 <= v < pp.q:
                self.invalid_shares += 1
                continue
            ck = (u, v, h)
            ok = cache.get(ck)
            if ok is None:
                ok = cache[ck] = pow(g, v, p) == pow(cvals[u - 1], h, p)
            if not ok:
                self.invalid_shares += 1
                continue
            units[u] = v
        if len(units) >= threshold:
            out = comb(
                (OutputShare(u, v, inp) for u, v in units.items()),
                commitments,
                inp,
                threshold,
                verified=True,
            )
            self.sigma[r] = (msg.value, out, tag)
            self._acc.pop(r, None)

    def _record_finalize(self, r: int, value: Value, now: int) -> bool:
        if r in self.m_map or r < self.next_out:
            return False
        self.m_map[r] = value
        self.fin_time[r] = now
        self.queue.append(r)
        return True

    def drain(self, now: int) -> list[BtcOutput]:
        """Emit every queued round whose output is known, in queue order."""
        emitted = []
        q = self.queue
        while q and q[0] in self.sigma:
            r = q.popleft()
            value, out, tag = self.sigma.pop(r)
            m = self.m_map.pop(r)
            if value != m:
                raise AssertionError(
                    f"party {self.party} combined round {r} on a value other than the finalized one"
                )
            rec = BtcOutput(r, m, out, tag, self.fin_time.pop(r), now)
            self.outputs.append(rec)
            emitted.append(rec)
            self.next_out = r + 1
            self._acc.pop(r, None)
            for key in [k for k in self._inputs if k[0] <= r]:
                del self._inputs[key]
        return emitted

    # -- hooks (overridden) --------------------------------------------------

    def on_prefinalize(self, r: int, value: Value, now: int, sends: list) -> None:
        pass

    def on_finalize(self, r: int, value: Value, now: int, sends: list) -> None:
        raise NotImplementedError

    def on_share(self, msg: ShareMsg, now: int) -> None:
        raise NotImplementedError


class SlowPath(BtcParty):
    path_name = "slow"

    def __init__(self, party: int, path: PathConfig, keys: DealtKeys) -> None:
        super().__init__(party, path, keys)
        self._bundle = keys.slow_bundles[party]

    def on_finalize(self, r: int, value: Value, now: int, sends: list) -> None:
        if self._record_finalize(r, value, now):
            self._send(sends, SHARE, r, value, self._bundle)

    def on_share(self, msg: ShareMsg, now: int) -> None:
        if msg.kind == SHARE:
            self._accept(msg, self.keys.slow_commitments, self.path.w_slow, self.path_name, now)


class TightPath(SlowPath):
    path_name = "tight"

    def __init__(self, party: int, path: PathConfig, keys: DealtKeys) -> None:
        super().__init__(party, path, keys)
        self._sent: set[tuple[int, Value]] = set()

    def _share_once(self, r: int, value: Value, sends: list) -> None:
        if (r, value) not in self._sent:
            self._sent.add((r, value))
            self._send(sends, SHARE, r, value, self._bundle)

    def on_prefinalize(self, r: int, value: Value, now: int, sends: list) -> None:
        if r >= self.next_out:
            self._share_once(r, value, sends)

    def on_finalize(self, r: int, value: Value, now: int, sends: list) -> None:
        if self._record_finalize(r, value, now):
            self._share_once(r, value, sends)

    def drain(self, now: int) -> list[BtcOutput]:
        out = super().drain(now)
        if out:
            self._sent = {k for k in self._sent if k[0] >= self.next_out}
        return out


class FastPath(BtcParty):
    path_name = "fast"

    def __init__(self, party: int, path: PathConfig, keys: DealtKeys) -> None:
        super().__init__(party, path, keys)
        if keys.fast_bundles is None or keys.fast_commitments is None:
            raise PathConfigError("fast path needs a double sharing")
        self._slow_bundle = keys.slow_bundles[party]
        self._fast_bundle = keys.fast_bundles[party]
        self._fast_sent: set[tuple[int, Value]] = set()

    def on_prefinalize(self, r: int, value: Value, now: int, sends: list) -> None:
        if r >= self.next_out and (r, value) not in self._fast_sent:
            self._fast_sent.add((r, value))
            self._send(sends, FAST_SHARE, r, value, self._fast_bundle)

    def on_finalize(self, r: int, value: Value, now: int, sends: list) -> None:
        # The slow share goes out even if the fast sharing already combined here.
        if self._record_finalize(r, value, now):
            self._send(sends, SLOW_SHARE, r, value, self._slow_bundle)

    def on_share(self, msg: ShareMsg, now: int) -> None:
        kind = msg.kind
        if kind == FAST_SHARE:
            self._accept(msg, self.keys.fast_commitments, self.path.w_fast, "fast", now)
        elif kind == SLOW_SHARE:
            self._accept(msg, self.keys.slow_commitments, self.path.w_slow, "slow", now)

    def drain(self, now: int) -> list[BtcOutput]:
        out = super().drain(now)
        if out:
            self._fast_sent = {k for k in self._fast_sent if k[0] >= self.next_out}
        return out


_CLASSES = {"slow": SlowPath, "tight": TightPath, "fast": FastPath}


def make_protocol(party: int, path: PathConfig, keys: DealtKeys) -> BtcParty:
    return _CLASSES[path.protocol](party, path, keys)


def share_kind_path(kind: str) -> str:
    """Which sharing a share message belongs to: ``"fast"`` or ``"slow"``."""
    return "fast" if kind == FAST_SHARE else "slow"


def outputs_agree(streams: Sequence[Sequence[BtcOutput]]) -> bool:
    """True when every pair of output streams agrees on the rounds they share."""
    seen: dict[int, tuple] = {}
    for stream in streams:
        for o in stream:
            key = (o.value, o.tc_output.value)
            if seen.setdefault(o.round, key) != key:
                return False
    return True


