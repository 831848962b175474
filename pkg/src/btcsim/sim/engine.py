"""Deterministic discrete-event execution of consensus plus a threshold protocol.

Events live in one heap ordered by ``(time, sequence number)``. A delivery
hands one envelope (every message one sender produced for one recipient in a
single event step) to the recipient, which runs its consensus machine and
protocol layer and may produce new sends. Timers are local events that skip
the network.
"""

from __future__ import annotations

import hashlib
import heapq
import json
from dataclasses import dataclass, field
from typing import Callable

from ..consensus import (
    ALL,
    PROPOSE,
    TIMEOUT,
    VOTE,
    ConsensusConfig,
    ConsensusMachine,
    ConsensusMsg,
    Equivocation,
    FinalizeEvent,
    PrefinalizeEvent,
    ProtocolViolation,
    QcFormed,
    Step,
    VoteBook,
)
from ..protocols import (
    FAST_SHARE,
    BtcOutput,
    DealtKeys,
    PathConfig,
    ShareMsg,
    deal,
    make_protocol,
    share_kind_path,
)
from ..tc import BOT, OutputShare, Value
from .adversary import AdversaryPolicy
from .ledger import FlowLedger
from .network import DelayModel

__all__ = ["ExecutionTrace", "SimSetup", "World", "run", "value_label"]

TRACE_LEVELS = ("none", "events", "full")


def value_label(v: Value | None) -> str:
    if v is None:
        return "-"
    if v is BOT:
        return "⊥"
    try:
        s = v.decode("ascii")
        if s.isprintable() and len(s) <= 32:
            return s
    except UnicodeDecodeError:
        pass
    return "0x" + hashlib.blake2b(v, digest_size=8).hexdigest()


@dataclass
class SimSetup:
    """Everything needed for one execution. Times are integer microseconds."""

    consensus: ConsensusConfig
    path: PathConfig
    delay: DelayModel
    n_rounds: int
    delta_bound: int | None = None
    gst: int = 0
    adversary: AdversaryPolicy = field(default_factory=AdversaryPolicy)
    seed: int = 0
    horizon: int | None = None
    trace_level: str = "events"
    secret: int | None = None
    payload: Callable[[int, int], bytes] | None = None
    name: str = ""

    def __post_init__(self) -> None:
        if self.delta_bound is None:
            self.delta_bound = self.delay.max_delay
        if self.trace_level not in TRACE_LEVELS:
            raise ValueError(f"trace level must be one of {TRACE_LEVELS}")
        if self.n_rounds < 0:
            raise ValueError("round count must be non-negative")
        if self.path.consensus is not self.consensus and self.path.consensus != self.consensus:
            raise ValueError("path config was built for a different consensus config")
        self.adversary.validate(self.consensus.party_stakes, self.consensus.fault_bound)
        if self.horizon is None:
            per_round = 4 * self.delta_bound + self.consensus.round_timeout
            self.horizon = self.gst + (self.n_rounds + 2) * per_round
        if self.secret is None:
            self.secret = _derive_secret(self.seed)


def _derive_secret(seed: int) -> int:
    from ..tc import DESK_SCALE

    d = hashlib.blake2b(b"btcsim/secret|%d" % seed, digest_size=16).digest()
    return int.from_bytes(d, "big") % DESK_SCALE.q


@dataclass
class ExecutionTrace:
    """Result of one run: timelines, ledger and optional event records."""

    name: str
    seed: int
    protocol: str
    n_rounds: int
    honest: tuple[int, ...]
    corrupt: tuple[int, ...]
    finalizations: dict[int, dict[int, tuple[Value, int]]]
    outputs: dict[int, list[BtcOutput]]
    ledger: FlowLedger
    records: list[dict]
    violations: list[str]
    metrics: dict
    round_min_delay: dict[int, int]
    honest_qcs: dict[int, set]
    keys: DealtKeys
    delta_bound: int
    horizon: int

    def gft(self, r: int) -> int | None:
        return self.ledger.gft(r)

    def grt(self, r: int) -> int | None:
        return self.ledger.grt(r)

    def finalized_value(self, r: int) -> Value | None:
        for p in self.honest:
            got = self.finalizations[p].get(r)
            if got is not None:
                return got[0]
        return None

    def latency(self, r: int) -> int | None:
        """Max over honest parties of output time minus finalize time."""
        best = None
        for p in self.honest:
            for o in self.outputs[p]:
                if o.round == r:
                    lat = o.output_time - o.finalize_time
                    best = lat if best is None or lat > best else best
                    break
        return best

    def latencies(self) -> dict[int, int]:
        out: dict[int, int] = {}
        for p in self.honest:
            for o in self.outputs[p]:
                lat = o.output_time - o.finalize_time
                if lat > out.get(o.round, -1):
                    out[o.round] = lat
        return dict(sorted(out.items()))

    def output_paths(self, r: int) -> dict[int, str]:
        return {p: o.path for p in self.honest for o in self.outputs[p] if o.round == r}

    def rounds_defined(self) -> list[int]:
        return sorted(self.ledger.gft_at)

    def summary_rows(self) -> list[dict]:
        lats = self.latencies()
        rows = []
        for r in range(self.n_rounds):
            gft, grt = self.gft(r), self.grt(r)
            paths = sorted(set(self.output_paths(r).values()))
            rows.append(
                {
                    "round": r,
                    "value": value_label(self.ledger.gft_value(r)),
                    "gft_us": gft,
                    "grt_us": grt,
                    "latency_us": lats.get(r),
                    "paths": paths,
                }
            )
        return rows

    def to_records(self) -> list[dict]:
        head = {
            "ev": "header",
            "name": self.name,
            "seed": self.seed,
            "protocol": self.protocol,
            "rounds": self.n_rounds,
            "honest": list(self.honest),
            "corrupt": list(self.corrupt),
            "delta_bound_us": self.delta_bound,
        }
        tail = [{"ev": "ledger", **row} for row in self.summary_rows()]
        tail.append({"ev": "violations", "items": list(self.violations)})
        return [head, *self.records, *tail]

    def to_ndjson(self) -> str:
        return "".join(
            json.dumps(rec, sort_keys=True, ensure_ascii=False) + "\n" for rec in self.to_records()
        )

    def digest(self) -> str:
        return hashlib.sha256(self.to_ndjson().encode()).hexdigest()


def _alt_value(v: bytes) -> bytes:
    return v[:-1] if v.endswith(b"*") else v + b"*"


class World:
    """Drives one execution. Use :func:`run` unless stepping by hand."""

    def __init__(self, setup: SimSetup, keys: DealtKeys | None = None) -> None:
        self.setup = setup
        cc = setup.consensus
        self.n = cc.n_parties
        self.stakes = cc.party_stakes
        self.keys = keys if keys is not None else deal(setup.path, setup.secret, setup.seed)
        self.votebook = VoteBook()
        kw = {"n_rounds": setup.n_rounds}
        if setup.payload is not None:
            kw["payload"] = setup.payload
        self.cons = [ConsensusMachine(i, cc, self.votebook, **kw) for i in range(self.n)]
        self.btc = [make_protocol(i, setup.path, self.keys) for i in range(self.n)]
        adv = setup.adversary
        self.adv = adv
        self.corrupt = adv.corrupt
        self.honest = tuple(i for i in range(self.n) if i not in adv.corrupt)
        self.crash = {p: adv.crash_time(p) for p in adv.corrupt if adv.crash_time(p) is not None}
        self.rules = setup.adversary.schedule
        thresholds = {"slow": setup.path.w_slow}
        if setup.path.protocol == "fast":
            thresholds["fast"] = setup.path.w_fast
        self.ledger = FlowLedger(
            self.stakes, setup.path.weights, adv.corrupt, cc.t_fin, thresholds
        )
        self.heap: list = []
        self.seq = 0
        self.level = setup.trace_level
        self.records: list[dict] = []
        self.violations: list[str] = list(self.ledger.anomalies)
        self.finalizations: dict[int, dict[int, tuple[Value, int]]] = {i: {} for i in range(self.n)}
        self.round_min_delay: dict[int, int] = {}
        self.honest_qcs: dict[int, set] = {}
        self.metrics = {
            "deliveries": 0,
            "envelopes": 0,
            "invalid_shares": 0,
            "equivocations": 0,
            "clamped": 0,
        }
        self.now = 0
        self._delta = setup.delta_bound
        self._gst = setup.gst
        self._honest_min: dict[int, int] = {}
        self._revealed_early: set = set()

    # -- recording -------------------------------------------------------------

    def _rec(self, **fields) -> None:
        self.records.append(fields)

    # -- sending -----------------------------------------------------------------

    def _link_delay(self, kind: str, r: int, sender: int, rcpt: int, now: int) -> int:
        d = None
        for rule in self.rules:
            if rule.matches(kind, sender, rcpt, r):
                d = rule.delay
                break
        if d is None:
            d = self._delta if now < self._gst else self.setup.delay.delay(sender, rcpt, now)
        if now >= self._gst and d > self._delta:
            d = self._delta
            self.metrics["clamped"] += 1
        return d

    def _push(self, t: int, rcpt: int, sender: int, msgs: tuple) -> None:
        heapq.heappush(self.heap, (t, self.seq, rcpt, sender, msgs))
        self.seq += 1

    def _transform_corrupt(self, sender: int, sends: list, now: int) -> list:
        adv = self.adv
        bs = adv.behaviors.get(sender, ())
        if not bs:
            return sends
        out = []
        q = self.keys.slow_commitments.pp.q
        for dest, m in sends:
            if type(m) is ShareMsg:
                sp = share_kind_path(m.kind)
                drop = False
                targets = None
                for b in bs:
                    if not b.covers(m.round) or b.path not in (sp, "all"):
                        continue
                    if b.kind == "withhold":
                        drop = True
                    elif b.kind == "selective_send":
                        targets = b.targets if targets is None else targets & b.targets
                    elif b.kind == "invalid_shares":
                        m = m._replace(
                            shares=tuple(
                                OutputShare(s.unit_index, (s.value + 1) % q, s.input) for s in m.shares
                            )
                        )
                if drop:
                    continue
                if targets is not None:
                    out.extend((t, m) for t in sorted(targets))
                    continue
                out.append((dest, m))
                continue
            eq = [b for b in bs if b.kind == "equivocate" and b.covers(m.round)]
            if eq and m.kind == PROPOSE and isinstance(m.value, bytes):
                half = (self.n + 1) // 2
                alt = m._replace(value=_alt_value(m.value))
                out.extend((i, m) for i in range(half))
                out.extend((i, alt) for i in range(half, self.n))
                self.metrics["equivocations"] += 1
                continue
            if eq and m.kind == VOTE and isinstance(m.value, bytes):
                alt = m._replace(value=_alt_value(m.value))
                self.votebook.sign(sender, m.round, alt.value)
                out.append((dest, m))
                out.append((dest, alt))
                continue
            out.append((dest, m))
        return out

    def _emit(self, sender: int, sends: list, now: int) -> None:
        if not sends:
            return
        corrupt = sender in self.corrupt
        if corrupt:
            ct = self.crash.get(sender)
            if ct is not None and now >= ct:
                return
            sends = self._transform_corrupt(sender, sends, now)
            if not sends:
                return
        else:
            ledger = self.ledger
            for _, m in sends:
                if type(m) is ShareMsg:
                    ledger.reveal(sender, m.round, m.value, share_kind_path(m.kind), now)
        full = self.level == "full"
        if full:
            for dest, m in sends:
                self._rec(
                    t=now, party=sender, ev="send", kind=m.kind, round=m.round,
                    value=value_label(m.value), to="all" if dest == ALL else dest,
                )
        n = self.n
        if all(d == ALL for d, _ in sends):
            per_rcpt = None
            msgs = tuple(m for _, m in sends)
        else:
            per_rcpt = {}
            for d, m in sends:
                for r in (range(n) if d == ALL else (d,)):
                    per_rcpt.setdefault(r, []).append(m)
        heap = self.heap
        push = heapq.heappush
        seq = self.seq
        post = now >= self._gst
        mind = None
        if per_rcpt is None and post and not self.rules:
            row = self.setup.delay.row(sender)
            if row is not None:
                delta = self._delta
                for rcpt in range(n):
                    d = row[rcpt]
                    if d > delta:
                        d = delta
                        self.metrics["clamped"] += 1
                    push(heap, (now + d, seq, rcpt, sender, msgs))
                    seq += 1
                self.seq = seq
                if not corrupt:
                    mind = self._honest_min.get(sender)
                    if mind is None:
                        mind = self._honest_min[sender] = min(row[i] for i in self.honest)
                    self._note_delay(msgs, mind)
                return
        targets = per_rcpt.items() if per_rcpt is not None else ((r, msgs) for r in range(n))
        for rcpt, ms in targets:
            ms = tuple(ms)
            if self.rules or not post:
                groups: dict[int, list] = {}
                for m in ms:
                    d = self._link_delay(m.kind, m.round, sender, rcpt, now)
                    groups.setdefault(d, []).append(m)
                for d, gm in sorted(groups.items()):
                    self._push(now + d, rcpt, sender, tuple(gm))
                    mind = d if mind is None or d < mind else mind
            else:
                d = self._link_delay(ms[0].kind, ms[0].round, sender, rcpt, now)
                self._push(now + d, rcpt, sender, ms)
                mind = d if mind is None or d < mind else mind
        if not corrupt and mind is not None:
            self._note_delay(tuple(m for _, m in sends), mind)

    def _note_delay(self, msgs: tuple, d: int) -> None:
        rmd = self.round_min_delay
        for m in msgs:
            r = m.round
            cur = rmd.get(r)
            if cur is None or d < cur:
                rmd[r] = d

    # -- processing ----------------------------------------------------------------

    def _process_step(self, party: int, step: Step, now: int, shares: list) -> None:
        """Run hooks for consensus events, feed shares, drain outputs, send."""
        btc = self.btc[party]
        sends = step.sends
        honest = party not in self.corrupt
        level = self.level
        finalized_any = False
        for ev in step.events:
            tp = type(ev)
            if tp is PrefinalizeEvent:
                btc.on_prefinalize(ev.round, ev.value, now, sends)
                if honest:
                    self.ledger.prefinalize(party, ev.round, ev.value, now)
                if level != "none":
                    self._rec(t=now, party=party, ev="prefinalize", round=ev.round,
                              value=value_label(ev.value))
            elif tp is FinalizeEvent:
                btc.on_finalize(ev.round, ev.value, now, sends)
                self.finalizations[party][ev.round] = (ev.value, now)
                finalized_any = True
                if level != "none":
                    self._rec(t=now, party=party, ev="finalize", round=ev.round,
                              value=value_label(ev.value))
            elif tp is QcFormed:
                if honest:
                    vals = self.honest_qcs.setdefault(ev.round, set())
                    vals.add(ev.value)
                    if len(vals) > 1:
                        self.violations.append(f"round {ev.round}: two certificates formed")
                if level != "none":
                    self._rec(t=now, party=party, ev="qc", round=ev.round,
                              value=value_label(ev.value))
            elif tp is Equivocation:
                if level != "none":
                    self._rec(t=now, party=party, ev="equivocation", round=ev.round,
                              value=value_label(ev.second))
            elif tp is ProtocolViolation:
                self.violations.append(f"party {party} round {ev.round}: {ev.detail}")
                if level != "none":
                    self._rec(t=now, party=party, ev="violation", round=ev.round,
                              value=ev.detail)
        reconstructed = False
        if shares:
            if len(shares) > 1:
                shares.sort(key=lambda m: m.kind != FAST_SHARE)
            for m in shares:
                before = len(btc.sigma)
                btc.on_share(m, now)
                if len(btc.sigma) > before:
                    reconstructed = True
                    if level != "none":
                        _, _, tag = btc.sigma[m.round]
                        self._rec(t=now, party=party, ev="reconstruct", round=m.round,
                                  value=value_label(m.value), path=tag)
        if reconstructed or finalized_any:
            for o in btc.drain(now):
                if level != "none":
                    self._rec(t=now, party=party, ev="output", round=o.round,
                              value=value_label(o.value), path=o.path,
                              latency_us=o.output_time - o.finalize_time)
        for r, fire in step.timers:
            self._push(fire, party, party, (ConsensusMsg(TIMEOUT, r, None, party),))
        if sends:
            self._emit(party, sends, now)

    def _early_reveal(self, party: int, msgs: tuple, now: int) -> list:
        extra = []
        bs = self.adv.behaviors_of(party, "early_reveal")
        if not bs:
            return extra
        btc = self.btc[party]
        for m in msgs:
            if type(m) is ConsensusMsg and m.kind == PROPOSE and isinstance(m.value, bytes):
                if not any(b.covers(m.round) for b in bs):
                    continue
                key = ("early", m.round, m.value)
                if key in self._revealed_early:
                    continue
                self._revealed_early.add(key)
                keys = self.keys
                btc_sends: list = []
                btc._send(btc_sends, "SHARE" if self.setup.path.protocol != "fast" else "SLOW-SHARE",
                          m.round, m.value, keys.slow_bundles[party])
                if keys.fast_bundles is not None:
                    btc._send(btc_sends, FAST_SHARE, m.round, m.value, keys.fast_bundles[party])
                extra.extend(btc_sends)
        return extra

    def deliver(self, rcpt: int, sender: int, msgs: tuple, now: int) -> None:
        self.metrics["envelopes"] += 1
        self.metrics["deliveries"] += len(msgs)
        if self.level == "full":
            for m in msgs:
                self._rec(t=now, party=rcpt, ev="deliver", kind=m.kind, round=m.round,
                          value=value_label(m.value), sender=sender)
        cons = self.cons[rcpt]
        step = Step()
        shares = []
        for m in msgs:
            if type(m) is ShareMsg:
                shares.append(m)
            else:
                if m.kind == TIMEOUT and self.level != "none":
                    r = m.round
                    rs = cons.rounds.get(r)
                    if cons.finalized(r) is None and (rs is None or rs.idle):
                        self._rec(t=now, party=rcpt, ev="timeout", round=r, value="-")
                cons.on_message(m, now, step)
        if rcpt in self.corrupt:
            step.sends.extend(self._early_reveal(rcpt, msgs, now))
        self._process_step(rcpt, step, now, shares)

    # -- main loop -------------------------------------------------------------------

    def start(self) -> None:
        for i in range(self.n):
            step = self.cons[i].start(0)
            self._process_step(i, step, 0, [])

    def run(self) -> ExecutionTrace:
        self.start()
        heap = self.heap
        pop = heapq.heappop
        horizon = self.setup.horizon
        crash = self.crash
        deliver = self.deliver
        while heap:
            t, _, rcpt, sender, msgs = pop(heap)
            if t > horizon:
                break
            self.now = t
            if crash:
                ct = crash.get(rcpt)
                if ct is not None and t >= ct:
                    continue
            deliver(rcpt, sender, msgs, t)
        return self.trace()

    def trace(self) -> ExecutionTrace:
        for p in range(self.n):
            self.metrics["invalid_shares"] += self.btc[p].invalid_shares if p in self.honest else 0
        self.violations.extend(
            f"round {r}: adversary could combine {value_label(v)} on {s} without finalization"
            for r, v, s in self.ledger.secrecy_breaches()
        )
        self.violations.extend(a for a in self.ledger.anomalies if a not in self.violations)
        return ExecutionTrace(
            name=self.setup.name,
            seed=self.setup.seed,
            protocol=self.setup.path.protocol,
            n_rounds=self.setup.n_rounds,
            honest=self.honest,
            corrupt=tuple(sorted(self.corrupt)),
            finalizations={p: self.finalizations[p] for p in self.honest},
            outputs={p: self.btc[p].outputs for p in self.honest},
            ledger=self.ledger,
            records=self.records,
            violations=self.violations,
            metrics=self.metrics,
            round_min_delay=dict(sorted(self.round_min_delay.items())),
            honest_qcs=self.honest_qcs,
            keys=self.keys,
            delta_bound=self._delta,
            horizon=self.setup.horizon,
        )


def run(setup: SimSetup) -> ExecutionTrace:
    """Execute ``setup`` to completion (or its horizon)."""
    return World(setup).run()
