"""Tag derivation, splitting, and seal/open behavior."""

import hashlib
import random

import pytest
from cryptography.hazmat.primitives.kdf.scrypt import Scrypt

from hoot.errors import ConfigError
from hoot.tagcrypt import (
    FAST_KDF,
    Hoot,
    KdfConfig,
    KdfMode,
    LongTag,
    PlainTag,
    SessionKeys,
    ShortTag,
    derive_long_tag,
    derive_tag_material,
    open_hoot,
    seal,
    split_tag,
)

# Published SHA-1 test vectors.
SHA1_VECTORS = {
    "abc": "a9993e364706816aba3e25717850c26c9cd0d89d",
    "abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq": "84983e441c3bd26ebaae4aa1f95129e5e54670f1",
    "a": "86f7e437faa5a7fce15d1ddcb9eaeaea377667b8",
}


@pytest.mark.parametrize("text,digest", sorted(SHA1_VECTORS.items()))
def test_fast_hash_matches_sha1_vectors(text, digest):
    long_tag = derive_long_tag(PlainTag(text), FAST_KDF)
    assert long_tag.bits == 160
    assert long_tag.data.hex() == digest


def test_derivation_is_deterministic():
    cfg = FAST_KDF
    a = derive_long_tag(PlainTag("free-egypt-9rqt"), cfg)
    b = derive_long_tag(PlainTag("free-egypt-9rqt"), cfg)
    assert a == b


def test_memory_hard_deterministic_and_distinct_from_fast():
    cfg = KdfConfig(mode=KdfMode.MEMORY_HARD, work=2**14)
    a = derive_long_tag(PlainTag("abc"), cfg)
    b = derive_long_tag(PlainTag("abc"), cfg)
    assert a == b
    assert a.bits == 160
    assert a.data != derive_long_tag(PlainTag("abc"), FAST_KDF).data


def test_memory_hard_agrees_with_independent_scrypt():
    # Cross-check the scrypt invocation (parameter mapping, fixed salt,
    # output length) against a second library's implementation.
    cfg = KdfConfig(mode=KdfMode.MEMORY_HARD, work=2**14, memory=2**21, parallelism=1)
    n, r, p = cfg.scrypt_params()
    expected = Scrypt(salt=b"hoot.tag.v1", length=20, n=n, r=r, p=p).derive(b"abc")
    assert derive_long_tag(PlainTag("abc"), cfg).data == expected


def test_scrypt_parameter_mapping():
    cfg = KdfConfig(mode=KdfMode.MEMORY_HARD, work=2**10, memory=2**20, parallelism=2)
    assert cfg.scrypt_params() == (2**10, 8, 2)
    # memory below one block floors r at 1
    small = KdfConfig(mode=KdfMode.MEMORY_HARD, work=2**15, memory=2**20)
    assert small.scrypt_params() == (2**15, 1, 1)


def test_fast_hash_expansion_keeps_digest_prefix():
    wide = derive_long_tag(PlainTag("abc"), KdfConfig(output_bits=192))
    narrow = derive_long_tag(PlainTag("abc"), FAST_KDF)
    assert wide.bits == 192
    assert wide.data[:20] == narrow.data
    again = derive_long_tag(PlainTag("abc"), KdfConfig(output_bits=256))
    assert again.data[:24] == wide.data


def test_kdf_config_validation():
    with pytest.raises(ConfigError):
        KdfConfig(output_bits=100)
    with pytest.raises(ConfigError):
        KdfConfig(mode=KdfMode.MEMORY_HARD, work=1000)  # not a power of two
    with pytest.raises(ConfigError):
        KdfConfig(mode=KdfMode.MEMORY_HARD, parallelism=0)


def test_split_k32_consumes_whole_digest():
    long_tag = derive_long_tag(PlainTag("abc"))
    material = split_tag(long_tag, 32)
    assert material.short_tag == ShortTag(int.from_bytes(long_tag.data[:4], "big"), 32)
    assert material.tag_key == long_tag.data[4:20]


def test_split_k24_definitional_slice():
    long_tag = LongTag(bytes(range(20)), 160)
    material = split_tag(long_tag, 24)
    assert material.short_tag.value == int.from_bytes(bytes(range(3)), "big")
    # tag key is bits 24..151: bytes 3..18 inclusive
    assert material.tag_key == bytes(range(3, 19))


def test_split_insufficient_bits():
    with pytest.raises(ValueError):
        split_tag(LongTag(bytes(15), 120), 24)


def test_split_bit_disjointness():
    base = derive_long_tag(PlainTag("abc"))
    k = 24
    reference = split_tag(base, k)
    for bit in range(0, k + 128, 7):
        flipped = bytearray(base.data)
        flipped[bit // 8] ^= 0x80 >> (bit % 8)
        material = split_tag(LongTag(bytes(flipped), 160), k)
        if bit < k:
            assert material.short_tag != reference.short_tag
            assert material.tag_key == reference.tag_key
        else:
            assert material.short_tag == reference.short_tag
            assert material.tag_key != reference.tag_key


@pytest.mark.parametrize("k", [12, 18, 24, 32])
def test_seal_open_round_trip(k):
    rng = random.Random(k)
    tag = PlainTag(f"round-trip-{k}")
    for size in (0, 1, 16, 39):
        message = rng.randbytes(size)
        hoot = seal(message, [tag], k=k, rng=rng)
        assert open_hoot(hoot, tag, k=k) == message


def test_open_wrong_tag_is_no_match():
    hoot = seal(b"secret", [PlainTag("ours")], rng=random.Random(1))
    assert open_hoot(hoot, PlainTag("theirs")) is None


def test_open_with_wrong_k_is_no_match():
    tag = PlainTag("ours")
    hoot = seal(b"secret", [tag], k=24, rng=random.Random(1))
    assert open_hoot(hoot, tag, k=18) is None


def test_bit_flips_are_rejected():
    tag = PlainTag("ours")
    rng = random.Random(2)
    hoot = seal(b"attack at noon", [tag], rng=rng)
    for index in range(len(hoot.ciphertext)):
        damaged = bytearray(hoot.ciphertext)
        damaged[index] ^= 1
        assert open_hoot(Hoot(hoot.short_tags, hoot.key_blocks, hoot.mac, bytes(damaged)), tag) is None
    broken_mac = bytearray(hoot.mac)
    broken_mac[0] ^= 1
    assert open_hoot(Hoot(hoot.short_tags, hoot.key_blocks, bytes(broken_mac), hoot.ciphertext), tag) is None
    broken_block = bytearray(hoot.key_blocks[0])
    broken_block[-1] ^= 1
    assert open_hoot(Hoot(hoot.short_tags, (bytes(broken_block),), hoot.mac, hoot.ciphertext), tag) is None


def test_multi_tag_shares_one_ciphertext():
    tags = [PlainTag("group-one"), PlainTag("group-two")]
    hoot = seal(b"joint statement", tags, rng=random.Random(3))
    assert len(hoot.short_tags) == 2
    assert len(hoot.key_blocks) == 2
    assert open_hoot(hoot, tags[0]) == b"joint statement"
    assert open_hoot(hoot, tags[1]) == b"joint statement"


def test_sealing_is_nondeterministic():
    tag = PlainTag("repeat-group")
    seen_ct, seen_blocks, seen_macs = set(), set(), set()
    for _ in range(10_000):
        hoot = seal(b"same message", [tag])
        seen_ct.add(hoot.ciphertext)
        seen_blocks.add(hoot.key_blocks[0])
        seen_macs.add(hoot.mac)
    assert len(seen_ct) == 10_000
    assert len(seen_blocks) == 10_000
    assert len(seen_macs) == 10_000


def test_seeded_rng_reproduces_seals():
    tag = PlainTag("seeded")
    a = seal(b"m", [tag], rng=random.Random(9))
    b = seal(b"m", [tag], rng=random.Random(9))
    assert a == b


def test_seal_requires_tags():
    with pytest.raises(ValueError):
        seal(b"m", [])


def test_plain_tag_validation():
    for bad in ("", "has space", "tab\there", "#leading", "x" * 300):
        with pytest.raises(ValueError):
            PlainTag(bad)
    assert PlainTag("ok-tag_123").encoded() == b"ok-tag_123"


def test_session_keys_and_hoot_validation():
    with pytest.raises(ValueError):
        SessionKeys(b"short", bytes(16))
    good = seal(b"m", [PlainTag("t")], rng=random.Random(0))
    with pytest.raises(ValueError):
        Hoot((), (), good.mac, b"")
    with pytest.raises(ValueError):
        Hoot(good.short_tags, (b"tiny",), good.mac, b"")
    with pytest.raises(ValueError):
        Hoot(good.short_tags, good.key_blocks, b"tiny", b"")


def test_derive_tag_material_convenience():
    material = derive_tag_material(PlainTag("abc"), FAST_KDF, 12)
    digest = hashlib.sha1(b"abc").digest()
    assert material.short_tag.value == int.from_bytes(digest[:2], "big") >> 4
