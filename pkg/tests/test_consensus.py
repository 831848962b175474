from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from btcsim.consensus import (
    ALL,
    PREFIN,
    PROPOSE,
    TIMEOUT,
    VOTE,
    ConsensusConfig,
    ConsensusError,
    ConsensusMachine,
    ConsensusMsg,
    Equivocation,
    FinalizeEvent,
    PrefinalizeEvent,
    ProtocolViolation,
    QuorumCert,
    Step,
    VoteBook,
)
from btcsim.tc import BOT


def machines(stakes=(1, 1, 1, 1), n_rounds=3, **kw):
    cc = ConsensusConfig(tuple(stakes), **kw)
    book = VoteBook()
    return cc, book, [ConsensusMachine(i, cc, book, n_rounds=n_rounds) for i in range(len(stakes))]


def pump(ms, pending, rng=None, drop=lambda dest, m: False, max_steps=100_000):
    """Deliver queued (dest, msg) pairs until quiet. Returns every event."""
    events = []
    steps = 0
    while pending and steps < max_steps:
        steps += 1
        i = rng.randrange(len(pending)) if rng else 0
        dest, m = pending.pop(i)
        if drop(dest, m):
            continue
        step = ms[dest].on_message(m, 0)
        events.extend(step.events)
        for d, out in step.sends:
            pending.extend((j, out) for j in (range(len(ms)) if d == ALL else [d]))
    return events


def start_all(ms):
    pending = []
    for m in ms:
        for d, out in m.start(0).sends:
            pending.extend((j, out) for j in (range(len(ms)) if d == ALL else [d]))
    return pending


# -- configuration ------------------------------------------------------------------


def test_defaults_for_four_unit_stakes():
    cc = ConsensusConfig((1, 1, 1, 1))
    assert (cc.fault_bound, cc.t_fin, cc.quorum, cc.total_stake) == (1, 3, 3, 4)
    assert [cc.leader(r) for r in range(6)] == [0, 1, 2, 3, 0, 1]


@pytest.mark.parametrize(
    "kw",
    [
        {"fault_bound": 2},  # 3t >= n
        {"t_fin": 1},  # below t + 1
        {"t_fin": 4},  # above n - t
    ],
)
def test_invalid_configs_are_rejected(kw):
    with pytest.raises(ValueError):
        ConsensusConfig((1, 1, 1, 1), **kw)


def test_t_fin_must_exceed_half_of_n_plus_t():
    with pytest.raises(ValueError):
        ConsensusConfig((1,) * 7, fault_bound=2, t_fin=4)
    assert ConsensusConfig((1,) * 7, fault_bound=2, t_fin=5).t_fin == 5


def test_nonpositive_stakes_rejected():
    with pytest.raises(ValueError):
        ConsensusConfig((1, 0, 1))


# -- happy path ----------------------------------------------------------------------


def test_all_parties_finalize_every_round_in_order():
    _, _, ms = machines(n_rounds=5)
    events = pump(ms, start_all(ms))
    for m in ms:
        assert m.log == [(r, b"blk%d" % r) for r in range(5)]
    fin = [e for e in events if isinstance(e, FinalizeEvent)]
    assert len(fin) == 20


def test_only_the_broadcaster_may_propose():
    _, _, ms = machines()
    assert ms[0].bcast(0, b"x")[0][1].kind == PROPOSE
    with pytest.raises(ConsensusError):
        ms[1].bcast(0, b"x")


def test_proposal_from_non_leader_is_ignored():
    _, _, ms = machines()
    step = ms[2].on_message(ConsensusMsg(PROPOSE, 0, b"fake", 3), 0)
    assert step.sends == []


def test_unknown_message_kind_raises():
    _, _, ms = machines()
    with pytest.raises(ConsensusError):
        ms[0].on_message(ConsensusMsg("BOGUS", 0, b"x", 1), 0)


# -- prefinalize rules ----------------------------------------------------------------


def test_second_message_and_message_after_bottom_are_refused():
    _, _, ms = machines()
    m = ms[0]
    step = Step()
    assert m.prefinalize(0, b"a", 0, step)
    assert not m.prefinalize(0, b"b", 0, step)
    assert any(isinstance(e, ProtocolViolation) for e in step.events)
    assert m.prefinalize(0, BOT, 0, step)  # bottom may follow a message
    step2 = Step()
    assert m.prefinalize(1, BOT, 0, step2)
    assert not m.prefinalize(1, b"late", 0, step2)
    assert isinstance(step2.events[-1], ProtocolViolation)


def test_repeating_the_same_message_is_a_no_op():
    _, _, ms = machines()
    step = Step()
    assert ms[0].prefinalize(0, b"a", 0, step)
    assert not ms[0].prefinalize(0, b"a", 0, step)
    assert [type(e) for e in step.events] == [PrefinalizeEvent]


# -- timeouts and certificates -----------------------------------------------------------


def test_silent_leader_round_finalizes_bottom():
    _, _, ms = machines(n_rounds=2)
    pending = [p for p in start_all(ms) if p[1].sender != 0]  # leader 0 stays silent
    for i in range(4):
        pending.append((i, ConsensusMsg(TIMEOUT, 0, None, i)))
    pump(ms, pending)
    for m in ms:
        assert m.log[0] == (0, BOT)
        assert m.log[1] == (1, b"blk1")


def test_timeout_after_prefinalize_does_nothing():
    _, _, ms = machines(n_rounds=1)
    pump(ms, start_all(ms))
    assert ms[0].on_message(ConsensusMsg(TIMEOUT, 0, None, 0), 0).events == []


def test_idle_party_adopts_certificate_from_prefin():
    cc, book, ms = machines()
    for i in range(3):
        book.sign(i, 0, b"v")
    qc = QuorumCert(0, b"v", frozenset({0, 1, 2}))
    step = ms[3].on_message(ConsensusMsg(PREFIN, 0, b"v", 1, qc), 0)
    assert any(isinstance(e, PrefinalizeEvent) and e.value == b"v" for e in step.events)


def test_forged_certificate_is_not_adopted():
    _, _, ms = machines()
    qc = QuorumCert(0, b"v", frozenset({0, 1, 2}))  # nobody actually signed
    step = ms[3].on_message(ConsensusMsg(PREFIN, 0, b"v", 1, qc), 0)
    assert not any(isinstance(e, PrefinalizeEvent) for e in step.events)


def test_votebook_rejects_light_certificates():
    cc, book, _ = machines()
    book.sign(0, 0, b"v")
    book.sign(1, 0, b"v")
    assert not book.verify(QuorumCert(0, b"v", frozenset({0, 1})), cc)
    book.sign(2, 0, b"v")
    assert book.verify(QuorumCert(0, b"v", frozenset({0, 1, 2})), cc)


def test_conflicting_proposal_is_reported():
    _, _, ms = machines()
    ms[1].on_message(ConsensusMsg(PROPOSE, 0, b"a", 0), 0)
    step = ms[1].on_message(ConsensusMsg(PROPOSE, 0, b"b", 0), 0)
    assert isinstance(step.events[0], Equivocation)
    assert step.sends == []


def test_weighted_quorum_uses_stake():
    cc, book, ms = machines(stakes=(4, 1, 1, 1))
    assert cc.quorum == (7 + 2) // 2 + 1
    step = Step()
    ms[1].on_message(ConsensusMsg(VOTE, 0, b"v", 0), 0, step)
    ms[1].on_message(ConsensusMsg(VOTE, 0, b"v", 1), 0, step)
    assert any(isinstance(e, PrefinalizeEvent) for e in step.events)


# -- properties ---------------------------------------------------------------------------


@settings(max_examples=60, deadline=None)
@given(rnd=st.randoms(use_true_random=False), equivocate=st.booleans())
def test_agreement_and_order_under_any_delivery_order(rnd, equivocate):
    cc, book, ms = machines(n_rounds=3)
    pending = start_all(ms)
    if equivocate:
        # Party 0 is corrupt: it sends a second proposal for round 0 to half the parties.
        pending.extend((j, ConsensusMsg(PROPOSE, 0, b"evil", 0)) for j in (2, 3))
        pending.insert(0, (2, ConsensusMsg(PROPOSE, 0, b"evil", 0)))
    for i in range(4):
        for r in range(3):
            pending.append((i, ConsensusMsg(TIMEOUT, r, None, i)))
    pump(ms, pending, rng=rnd)
    honest = ms[1:] if equivocate else ms
    for r in range(3):
        vals = {m.finalized(r) for m in honest if m.finalized(r) is not None}
        assert len(vals) <= 1
    for m in honest:
        rounds = [r for r, _ in m.log]
        assert rounds == list(range(len(rounds)))
