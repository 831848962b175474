"""Multi-shot Byzantine broadcast with a finalization threshold.

Each round ``r`` has a designated broadcaster (``r mod N``) and runs a two-phase
exchange::

    PROPOSE(r, m) -> VOTE(r, m) -> quorum certificate -> prefinalize(r, m)
    -> PREFIN(r, m) -> finalize(r, m) once t_fin stake of PREFIN(r, m) arrived

A local timer per round lets an idle party prefinalize ``BOT`` instead, so a
round with a silent broadcaster finalizes ``BOT``. All thresholds are exact
integer stake sums.

Honest parties prefinalize at most one message per round and never move from
``BOT`` to a message; with ``2*t_fin > n + t`` two different values can never
both gather ``t_fin`` stake, which gives agreement.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Union

from .tc import BOT, Bottom

__all__ = [
    "ALL",
    "ConsensusConfig",
    "ConsensusError",
    "ConsensusMachine",
    "ConsensusMsg",
    "Equivocation",
    "FinalizeEvent",
    "PREFIN",
    "PROPOSE",
    "PrefinalizeEvent",
    "ProtocolViolation",
    "QcFormed",
    "QuorumCert",
    "RoundState",
    "Step",
    "TIMEOUT",
    "VOTE",
    "VoteBook",
    "default_payload",
]

Value = Union[bytes, Bottom]

PROPOSE = "PROPOSE"
VOTE = "VOTE"
PREFIN = "PREFIN"
TIMEOUT = "TIMEOUT"

ALL = -1  # destination meaning "every party, including the sender"


class ConsensusError(Exception):
    """Misuse of the consensus API."""


@dataclass(frozen=True)
class ConsensusConfig:
    """Stake distribution and thresholds.

    ``fault_bound`` defaults to the largest ``t`` with ``3t < n``. ``t_fin``
    defaults to the vote quorum ``floor((n + t) / 2) + 1``, which equals
    ``2t + 1`` when ``n = 3t + 1``. ``round_timeout`` is in simulated
    microseconds.
    """

    party_stakes: tuple[int, ...]
    fault_bound: int | None = None
    t_fin: int | None = None
    round_timeout: int = 1_000_000

    def __post_init__(self) -> None:
        stakes = tuple(int(s) for s in self.party_stakes)
        object.__setattr__(self, "party_stakes", stakes)
        if not stakes or any(s <= 0 for s in stakes):
            raise ValueError("party stakes must be positive")
        n = sum(stakes)
        t = (n - 1) // 3 if self.fault_bound is None else int(self.fault_bound)
        object.__setattr__(self, "fault_bound", t)
        if t < 0 or 3 * t >= n:
            raise ValueError(f"fault bound {t} must satisfy 0 <= 3t < n = {n}")
        t_fin = self.quorum if self.t_fin is None else int(self.t_fin)
        object.__setattr__(self, "t_fin", t_fin)
        if not t + 1 <= t_fin <= n - t:
            raise ValueError(f"t_fin={t_fin} must lie in [t+1, n-t] = [{t + 1}, {n - t}]")
        if 2 * t_fin <= n + t:
            raise ValueError(f"t_fin={t_fin} too small for agreement: need 2*t_fin > n + t")
        if self.round_timeout <= 0:
            raise ValueError("round_timeout must be positive")

    @property
    def n_parties(self) -> int:
        return len(self.party_stakes)

    @property
    def total_stake(self) -> int:
        return sum(self.party_stakes)

    @property
    def quorum(self) -> int:
        return (self.total_stake + self.fault_bound) // 2 + 1

    def leader(self, r: int) -> int:
        return r % self.n_parties


class QuorumCert(NamedTuple):
    round: int
    value: bytes
    voters: frozenset


class ConsensusMsg(NamedTuple):
    kind: str
    round: int
    value: Value | None
    sender: int
    qc: QuorumCert | None = None


class PrefinalizeEvent(NamedTuple):
    party: int
    round: int
    value: Value
    time: int


class FinalizeEvent(NamedTuple):
    party: int
    round: int
    value: Value
    time: int


class QcFormed(NamedTuple):
    party: int
    round: int
    value: bytes
    time: int


class Equivocation(NamedTuple):
    party: int
    round: int
    first: bytes
    second: bytes
    time: int


class ProtocolViolation(NamedTuple):
    party: int
    round: int
    detail: str
    time: int


@dataclass
class Step:
    """Everything one event produced: sends, hook events and timer requests."""

    sends: list = field(default_factory=list)  # (dest, message); dest ALL = broadcast
    events: list = field(default_factory=list)
    timers: list = field(default_factory=list)  # (round, fire_time)


class VoteBook:
    """Registry of cast votes, standing in for vote signatures.

    A certificate is valid only if every listed voter really voted for that
    value, so corrupt parties cannot fabricate certificates from honest stake.
    """

    def __init__(self) -> None:
        self._votes: set[tuple[int, int, bytes]] = set()

    def sign(self, voter: int, r: int, value: bytes) -> None:
        self._votes.add((voter, r, value))

    def signed(self, voter: int, r: int, value: bytes) -> bool:
        return (voter, r, value) in self._votes

    def verify(self, qc: QuorumCert, config: ConsensusConfig) -> bool:
        stakes = config.party_stakes
        if not all(self.signed(v, qc.round, qc.value) for v in qc.voters):
            return False
        return sum(stakes[v] for v in qc.voters) >= config.quorum


def default_payload(r: int, leader: int) -> bytes:
    return b"blk%d" % r


@dataclass(slots=True)
class RoundState:
    round: int
    proposal: bytes | None = None
    voted: bool = False
    votes: dict = field(default_factory=dict)  # value -> set of voters
    vote_stake: dict = field(default_factory=dict)
    qc: QuorumCert | None = None
    prefin_value: bytes | None = None
    prefin_bot: bool = False
    prefins: dict = field(default_factory=dict)  # value -> set of senders
    prefin_stake: dict = field(default_factory=dict)
    finalized: Value | None = None

    @property
    def qc_formed(self) -> bool:
        return self.qc is not None

    @property
    def prefinalized(self) -> Value | None:
        """The latest prefinalized value."""
        if self.prefin_bot:
            return BOT
        return self.prefin_value

    @property
    def idle(self) -> bool:
        return self.prefin_value is None and not self.prefin_bot


class ConsensusMachine:
    """One party's consensus state. Drive it with :meth:`start` and :meth:`on_message`."""

    def __init__(
        self,
        party: int,
        config: ConsensusConfig,
        votebook: VoteBook | None = None,
        *,
        payload: Callable[[int, int], bytes] = default_payload,
        n_rounds: int | None = None,
    ) -> None:
        self.party = party
        self.config = config
        self.votebook = votebook if votebook is not None else VoteBook()
        self.payload = payload
        self.n_rounds = n_rounds
        self.rounds: dict[int, RoundState] = {}
        self.closed: set[int] = set()
        self.current = -1
        self.next_final = 0
        self._decided: dict[int, Value] = {}
        self.log: list[tuple[int, Value]] = []
        self.final_values: dict[int, Value] = {}
        self._stakes = config.party_stakes
        self._quorum = config.quorum
        self._t_fin = config.t_fin

    # -- rounds ------------------------------------------------------------

    def state(self, r: int) -> RoundState:
        rs = self.rounds.get(r)
        if rs is None:
            rs = self.rounds[r] = RoundState(r)
        return rs

    def start(self, now: int) -> Step:
        step = Step()
        self._enter(0, now, step)
        return step

    def _enter(self, r: int, now: int, step: Step) -> None:
        if self.n_rounds is not None and r >= self.n_rounds:
            return
        self.current = r
        step.timers.append((r, now + self.config.round_timeout))
        if self.config.leader(r) == self.party:
            step.sends.extend(self.bcast(r, self.payload(r, self.party)))

    def bcast(self, r: int, message: bytes) -> list:
        if self.config.leader(r) != self.party:
            raise ConsensusError(f"party {self.party} is not the broadcaster of round {r}")
        return [(ALL, ConsensusMsg(PROPOSE, r, message, self.party))]

    # -- events ------------------------------------------------------------

    def on_message(self, msg: ConsensusMsg, now: int, step: Step | None = None) -> Step:
        if step is None:
            step = Step()
        r = msg.round
        if r in self.closed:
            return step
        kind = msg.kind
        if kind == VOTE:
            self._on_vote(msg, now, step)
        elif kind == PREFIN:
            self._on_prefin(msg, now, step)
        elif kind == PROPOSE:
            self._on_propose(msg, now, step)
        elif kind == TIMEOUT:
            self._on_timeout(r, now, step)
        else:
            raise ConsensusError(f"unknown message kind {kind!r}")
        return step

    def _on_propose(self, msg: ConsensusMsg, now: int, step: Step) -> None:
        r = msg.round
        if msg.sender != self.config.leader(r) or not isinstance(msg.value, bytes):
            return
        rs = self.state(r)
        if rs.proposal is not None:
            if msg.value != rs.proposal:
                step.events.append(Equivocation(self.party, r, rs.proposal, msg.value, now))
            return
        rs.proposal = msg.value
        if rs.voted or rs.prefin_bot or rs.finalized is not None:
            return
        rs.voted = True
        self.votebook.sign(self.party, r, msg.value)
        step.sends.append((ALL, ConsensusMsg(VOTE, r, msg.value, self.party)))

    def _on_vote(self, msg: ConsensusMsg, now: int, step: Step) -> None:
        r = msg.round
        rs = self.state(r)
        if rs.qc is not None or not isinstance(msg.value, bytes):
            return
        v = msg.value
        voters = rs.votes.get(v)
        if voters is None:
            voters = rs.votes[v] = set()
        if msg.sender in voters:
            return
        voters.add(msg.sender)
        stake = rs.vote_stake.get(v, 0) + self._stakes[msg.sender]
        rs.vote_stake[v] = stake
        if stake >= self._quorum:
            rs.qc = QuorumCert(r, v, frozenset(voters))
            rs.votes = {}
            step.events.append(QcFormed(self.party, r, v, now))
            if rs.idle:
                self._prefinalize_and_send(rs, v, now, step)

    def _on_prefin(self, msg: ConsensusMsg, now: int, step: Step) -> None:
        r = msg.round
        rs = self.state(r)
        v = msg.value
        if v is None:
            return
        if (
            rs.idle
            and rs.finalized is None
            and msg.qc is not None
            and isinstance(v, bytes)
            and msg.qc.round == r
            and msg.qc.value == v
            and self.votebook.verify(msg.qc, self.config)
        ):
            # Adopt a certificate learned from another party's PREFIN.
            rs.qc = msg.qc
            rs.votes = {}
            self._prefinalize_and_send(rs, v, now, step)
        if rs.finalized is not None or r in self._decided:
            return
        senders = rs.prefins.get(v)
        if senders is None:
            senders = rs.prefins[v] = set()
        if msg.sender in senders:
            return
        senders.add(msg.sender)
        stake = rs.prefin_stake.get(v, 0) + self._stakes[msg.sender]
        rs.prefin_stake[v] = stake
        if stake >= self._t_fin:
            self._decide(rs, v, now, step)

    def _on_timeout(self, r: int, now: int, step: Step) -> None:
        rs = self.state(r)
        if rs.idle and rs.finalized is None and r not in self._decided:
            self._prefinalize_and_send(rs, BOT, now, step)

    # -- prefinalize / finalize ---------------------------------------------

    def prefinalize(self, r: int, value: Value, now: int, step: Step | None = None) -> bool:
        """Record a prefinalization, enforcing the per-round rules.

        A message may be prefinalized at most once and never after ``BOT``;
        ``BOT`` may follow a message. Refused calls log a violation event.
        """
        if step is None:
            step = Step()
        rs = self.state(r)
        if value is BOT:
            if rs.prefin_bot:
                return False
            rs.prefin_bot = True
        else:
            if rs.prefin_bot:
                step.events.append(ProtocolViolation(self.party, r, "message after bottom", now))
                return False
            if rs.prefin_value is not None:
                if rs.prefin_value != value:
                    step.events.append(
                        ProtocolViolation(self.party, r, "second message prefinalized", now)
                    )
                return False
            rs.prefin_value = value
        step.events.append(PrefinalizeEvent(self.party, r, value, now))
        return True

    def _prefinalize_and_send(self, rs: RoundState, value: Value, now: int, step: Step) -> None:
        if self.prefinalize(rs.round, value, now, step):
            qc = rs.qc if value is not BOT else None
            step.sends.append((ALL, ConsensusMsg(PREFIN, rs.round, value, self.party, qc)))
            if rs.finalized is not None:
                self._maybe_close(rs.round)

    def _decide(self, rs: RoundState, value: Value, now: int, step: Step) -> None:
        self._decided[rs.round] = value
        rs.prefins = {}
        # Emit finalizations strictly in round order.
        while self.next_final in self._decided:
            r = self.next_final
            v = self._decided.pop(r)
            st = self.state(r)
            st.finalized = v
            self.log.append((r, v))
            self.final_values[r] = v
            step.events.append(FinalizeEvent(self.party, r, v, now))
            self.next_final = r + 1
            self._maybe_close(r)
            self._enter(r + 1, now, step)

    def _maybe_close(self, r: int) -> None:
        rs = self.rounds.get(r)
        if rs is not None and rs.finalized is not None and not rs.idle:
            del self.rounds[r]
            self.closed.add(r)

    def finalized(self, r: int) -> Value | None:
        return self.final_values.get(r)
