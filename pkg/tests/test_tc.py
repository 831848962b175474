from __future__ import annotations

import hashlib
import itertools
import json
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from btcsim.tc import (
    BOT,
    DESK_SCALE,
    ConfigurationError,
    DomainError,
    EvalInput,
    InsufficientSharesError,
    OutputShare,
    PublicParameters,
    ThresholdParams,
    comb,
    double_share_gen,
    evaluate,
    hash_to_field,
    keys_from_json,
    keys_to_json,
    lagrange_at_zero,
    peval,
    pver,
    setup,
    share_gen,
)

VECTORS = json.loads((Path(__file__).parent / "fixtures" / "tc_vectors.json").read_text())
Q, P, G = DESK_SCALE.q, DESK_SCALE.p, DESK_SCALE.g


# -- independent oracles -------------------------------------------------------


def oracle_h2f(data: bytes) -> int:
    d = hashlib.blake2b(data, key=b"btcsim/h2f/v1", digest_size=32).digest()
    x = int.from_bytes(d, "big") % Q
    return x or 1


def oracle_interpolate_at_zero(points: dict[int, int]) -> int:
    """Textbook Lagrange interpolation at 0 with Python big ints."""
    total = 0
    for i, yi in points.items():
        num, den = 1, 1
        for j in points:
            if j != i:
                num = num * (-j) % Q
                den = den * (i - j) % Q
        total += yi * num * pow(den, -1, Q)
    return total % Q


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    for a in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        if n % a == 0:
            return n == a
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


# -- group and hashing ---------------------------------------------------------------


def test_group_parameters_form_a_prime_order_subgroup():
    assert is_prime(P) and is_prime(Q)
    assert (P - 1) % Q == 0
    assert G != 1 and pow(G, Q, P) == 1
    assert setup() is DESK_SCALE
    assert {k: str(v) for k, v in VECTORS["group"].items()} == {
        "p": str(P), "q": str(Q), "g": str(G)
    }


def test_public_parameters_round_trip():
    assert PublicParameters.from_dict(DESK_SCALE.to_dict()) == DESK_SCALE
    assert DESK_SCALE.is_member(G) and not DESK_SCALE.is_member(0)


@pytest.mark.parametrize("vec", VECTORS["hash_to_field"], ids=lambda v: v["data_hex"] or "empty")
def test_hash_to_field_matches_regression_vectors(vec):
    data = bytes.fromhex(vec["data_hex"])
    assert hash_to_field(data) == vec["value"] == oracle_h2f(data)


def test_hash_of_empty_input_is_pinned():
    assert hash_to_field(b"") == 136207031


@given(st.binary(max_size=64))
def test_hash_to_field_is_a_nonzero_field_element(data):
    h = hash_to_field(data)
    assert 1 <= h < Q and h == oracle_h2f(data)


# -- inputs -------------------------------------------------------------------------------


@pytest.mark.parametrize("vec", VECTORS["encode"], ids=lambda v: str(v["round"]))
def test_eval_input_encoding_vectors(vec):
    msg = BOT if vec["message_hex"] is None else bytes.fromhex(vec["message_hex"])
    inp = EvalInput(vec["round"], msg)
    assert inp.encode().hex() == vec["encoded_hex"]
    assert EvalInput.decode(inp.encode()) == inp


@given(st.integers(0, 2**63 - 1), st.one_of(st.none(), st.binary(max_size=40)))
def test_eval_input_round_trip(r, m):
    inp = EvalInput(r, BOT if m is None else m)
    assert EvalInput.decode(inp.encode()) == inp


def test_bottom_and_empty_message_encode_differently():
    assert EvalInput(1, BOT).encode() != EvalInput(1, b"").encode()
    assert EvalInput(1, BOT).is_bottom and not EvalInput(1, b"").is_bottom


def test_eval_input_rejects_bad_values():
    with pytest.raises(DomainError):
        EvalInput(-1, b"x")
    with pytest.raises(DomainError):
        EvalInput.decode(b"\x00" * 8 + b"\x07")


def test_eval_regression_vector():
    v = VECTORS["eval"]
    inp = EvalInput(v["round"], bytes.fromhex(v["message_hex"]))
    out = evaluate(v["secret"], inp)
    assert out.value == v["value"] == v["secret"] * oracle_h2f(inp.encode()) % Q


# -- sharing ----------------------------------------------------------------------------


def test_share_gen_regression_vector():
    v = VECTORS["share_gen"]
    params = ThresholdParams(v["n_units"], v["t"], v["t"])
    coms, bundles = share_gen(v["secret"], params, v["weights"], v["seed"])
    assert [str(c) for c in coms.values] == v["commitments"]
    assert [[str(s) for s in b.share_values] for b in bundles] == v["shares"]


def test_units_are_contiguous_by_party():
    _, bundles = share_gen(5, ThresholdParams(6, 2, 4), [2, 0, 3, 1], 0)
    assert [b.owner_units for b in bundles] == [(1, 2), (), (3, 4, 5), (6,)]


def test_shares_match_feldman_commitments():
    coms, bundles = share_gen(99, ThresholdParams(5, 3, 3), [1] * 5, 3)
    for b in bundles:
        for u, s in zip(b.owner_units, b.share_values):
            assert pow(G, s, P) == coms.values[u - 1]


@settings(max_examples=40, deadline=None)
@given(
    secret=st.integers(0, Q - 1),
    n=st.integers(1, 7),
    data=st.data(),
    seed=st.integers(0, 2**32),
)
def test_any_t_rec_units_interpolate_to_the_secret(secret, n, data, seed):
    t_rec = data.draw(st.integers(1, n))
    t_sec = data.draw(st.integers(1, t_rec))
    _, bundles = share_gen(secret, ThresholdParams(n, t_sec, t_rec), [1] * n, seed)
    pts = {b.owner_units[0]: b.share_values[0] for b in bundles}
    subset = data.draw(st.lists(st.sampled_from(sorted(pts)), min_size=t_rec, max_size=t_rec, unique=True))
    assert oracle_interpolate_at_zero({u: pts[u] for u in subset}) == secret


@settings(max_examples=40, deadline=None)
@given(xs=st.lists(st.integers(1, 1000), min_size=1, max_size=8, unique=True))
def test_lagrange_coefficients_match_big_int_oracle(xs):
    lam = lagrange_at_zero(xs, Q)
    for i, x in enumerate(xs):
        num, den = 1, 1
        for y in xs:
            if y != x:
                num = num * (-y) % Q
                den = den * (x - y) % Q
        assert lam[i] == num * pow(den, -1, Q) % Q


def test_threshold_params_validation():
    with pytest.raises(ConfigurationError):
        ThresholdParams(3, 3, 2)
    with pytest.raises(ConfigurationError):
        ThresholdParams(3, 0, 2)
    with pytest.raises(ConfigurationError):
        ThresholdParams(3, 2, 4)
    assert ThresholdParams(4, 2, 3).is_ramp and ThresholdParams(4, 3, 3).is_tight


def test_share_gen_rejects_mismatched_weights():
    with pytest.raises(ConfigurationError):
        share_gen(1, ThresholdParams(4, 2, 2), [1, 1], 0)


def test_double_sharing_uses_independent_polynomials():
    (sc, sb), (fc, fb) = double_share_gen(
        77, ThresholdParams(4, 3, 3), ThresholdParams(4, 4, 4), [1, 1, 1, 1], 5
    )
    assert sc.values != fc.values
    inp = EvalInput(0, b"x")
    want = evaluate(77, inp)
    assert comb([s for b in sb for s in peval(b, inp)][:3], sc, inp, 3) == want
    assert comb([s for b in fb for s in peval(b, inp)], fc, inp, 4) == want


# -- partial evaluation and combination ------------------------------------------------


def _deal(n=5, t=3, secret=1234, weights=None, seed=0):
    weights = weights or [1] * n
    params = ThresholdParams(sum(weights), t, t)
    return share_gen(secret, params, weights, seed)


def test_every_subset_combines_to_eval():
    coms, bundles = _deal(n=5, t=3)
    inp = EvalInput(4, b"hello")
    shares = [s for b in bundles for s in peval(b, inp)]
    want = evaluate(1234, inp)
    for subset in itertools.combinations(shares, 3):
        assert comb(subset, coms, inp, 3) == want


def test_pver_accepts_honest_and_rejects_tampered_shares():
    coms, bundles = _deal()
    inp = EvalInput(1, b"m")
    sh = peval(bundles[0], inp)[0]
    assert pver(coms, inp, sh)
    assert not pver(coms, inp, OutputShare(sh.unit_index, (sh.value + 1) % Q, inp))
    assert not pver(coms, EvalInput(2, b"m"), sh)
    assert not pver(coms, inp, OutputShare(99, sh.value, inp))


def test_comb_ignores_invalid_shares_and_reports_shortfall():
    coms, bundles = _deal(n=4, t=3)
    inp = EvalInput(1, b"m")
    shares = [s for b in bundles for s in peval(b, inp)]
    bad = OutputShare(shares[0].unit_index, (shares[0].value + 5) % Q, inp)
    assert comb([bad, *shares[1:]], coms, inp, 3) == evaluate(1234, inp)
    with pytest.raises(InsufficientSharesError):
        comb([bad, *shares[1:3]], coms, inp, 3)


def test_comb_below_threshold_raises():
    coms, bundles = _deal(n=4, t=3)
    inp = EvalInput(0, BOT)
    with pytest.raises(InsufficientSharesError):
        comb([s for b in bundles[:2] for s in peval(b, inp)], coms, inp, 3)


def test_weighted_parties_contribute_all_their_units():
    coms, bundles = _deal(weights=[3, 1, 2], t=4, secret=555)
    inp = EvalInput(9, b"w")
    shares = [s for b in (bundles[0], bundles[1]) for s in peval(b, inp)]
    assert comb(shares, coms, inp, 4) == evaluate(555, inp)


def test_keys_json_round_trip():
    coms, bundles = _deal()
    text = keys_to_json(coms, bundles, label="demo")
    coms2, bundles2 = keys_from_json(text)
    assert coms2.values == coms.values and bundles2 == list(bundles)
    with pytest.raises(ConfigurationError):
        keys_from_json(json.dumps({"format": "other"}))
