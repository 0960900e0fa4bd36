"""Text rendering of sealed messages as hashtag-searchable lines.

This module is the normative wire format. A wire message is one line of
ASCII text, at most ``glyph_budget`` glyphs (140 by default):

    wire    := tag (" " tag)* " " payload
    tag     := "#" base32                  one token per addressed group
    payload := base64                      unpadded, standard alphabet

Short tags are rendered as ceil(k/5) lowercase base32 glyphs (alphabet
"abcdefghijklmnopqrstuvwxyz234567", 5 bits per glyph, bits most
significant first, unused trailing bits zero). Lowercase base32 is used
because hashtag search layers fold case; the payload is not searched,
so standard case-sensitive base64 (A-Z a-z 0-9 + /) applies there, at 6
bits per glyph and without padding. The payload bytes are:

    key_block[0] || ... || key_block[n-1] || mac || ciphertext

with one 40-byte key block per hashtag token, a 20-byte MAC, and the
remainder the message ciphertext. The number of key blocks is inferred
from the number of hashtag tokens; there is no explicit count field.
"""

from __future__ import annotations

import base64
import binascii
from dataclasses import dataclass

from .errors import CapacityError, ConfigError, ParseError
from .tagcrypt import (
    DEFAULT_K,
    FAST_KDF,
    KdfConfig,
    MAX_K,
    MIN_K,
    Hoot,
    ShortTag,
    seal,
)

BASE32_ALPHABET = "abcdefghijklmnopqrstuvwxyz234567"
_BASE32_INDEX = {glyph: index for index, glyph in enumerate(BASE32_ALPHABET)}
_BASE64_GLYPHS = frozenset("ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/")

DEFAULT_GLYPH_BUDGET = 140


@dataclass(frozen=True)
class WireParams:
    """Bit widths and budget that fix the wire arithmetic.

    ``tag_glyph_bits`` exists for capacity arithmetic over alternative
    tag encodings; the codec itself only renders 5-bit base32 tags.
    """

    k: int = DEFAULT_K
    mac_bits: int = 160
    key_block_bits: int = 320
    glyph_budget: int = DEFAULT_GLYPH_BUDGET
    tag_glyph_bits: int = 5

    def __post_init__(self):
        if not MIN_K <= self.k <= MAX_K:
            raise ConfigError(f"k={self.k} outside supported range {MIN_K}..{MAX_K}")
        if self.mac_bits % 8 or self.key_block_bits % 8:
            raise ConfigError("mac and key block widths must be whole bytes")
        if self.glyph_budget < 1 or self.tag_glyph_bits < 1:
            raise ConfigError("glyph budget and tag glyph width must be positive")

    @property
    def tag_glyphs(self) -> int:
        return -(-self.k // self.tag_glyph_bits)


DEFAULT_PARAMS = WireParams()


def encode_short_tag(tag: ShortTag) -> str:
    """Render a short tag as lowercase base32, without the '#'."""
    glyphs = -(-tag.k // 5)
    padded = tag.value << (glyphs * 5 - tag.k)
    return "".join(BASE32_ALPHABET[(padded >> (5 * i)) & 0x1F] for i in range(glyphs - 1, -1, -1))


def decode_short_tag(text: str, k: int) -> ShortTag:
    """Inverse of encode_short_tag; case-insensitive on input."""
    glyphs = -(-k // 5)
    folded = text.lower()
    if len(folded) != glyphs:
        raise ParseError(f"short tag token needs {glyphs} glyphs for k={k}, got {len(folded)}", kind="bad-tag")
    value = 0
    for glyph in folded:
        index = _BASE32_INDEX.get(glyph)
        if index is None:
            raise ParseError(f"glyph {glyph!r} is not base32", kind="bad-tag")
        value = (value << 5) | index
    pad = glyphs * 5 - k
    if value & ((1 << pad) - 1):
        raise ParseError("short tag padding bits must be zero", kind="bad-tag")
    return ShortTag(value >> pad, k)


def header_glyphs(params: WireParams, n_tags: int) -> int:
    """Glyphs taken by the hashtag tokens, separators, and payload gap."""
    return n_tags * (2 + params.tag_glyphs)


def payload_glyphs(params: WireParams, n_tags: int, message_len: int) -> int:
    bits = n_tags * params.key_block_bits + params.mac_bits + 8 * message_len
    return -(-bits // 6)


def total_glyphs(params: WireParams, n_tags: int, message_len: int) -> int:
    return header_glyphs(params, n_tags) + payload_glyphs(params, n_tags, message_len)


def capacity(params: WireParams, n_tags: int) -> int:
    """Largest message byte count that encodes within the glyph budget.

    Returns 0 when not even an empty message fits (many tags, small
    budget); encode() consistently rejects anything above the returned
    value and accepts anything at or below it whenever the header
    itself fits.
    """
    if n_tags < 1:
        raise ValueError("capacity needs at least one tag")
    payload_budget_bits = 6 * (params.glyph_budget - header_glyphs(params, n_tags))
    free = payload_budget_bits - n_tags * params.key_block_bits - params.mac_bits
    best = max(0, free // 8)
    while best > 0 and total_glyphs(params, n_tags, best) > params.glyph_budget:
        best -= 1
    return best


def encode(hoot: Hoot, params: WireParams = DEFAULT_PARAMS) -> str:
    """Render a hoot as one hashtag-searchable line."""
    if params.tag_glyph_bits != 5:
        raise ConfigError("only 5-bit base32 tag rendering is implemented")
    n = len(hoot.short_tags)
    for tag in hoot.short_tags:
        if tag.k != params.k:
            raise ConfigError(f"hoot carries k={tag.k} tags but params expect k={params.k}")
    for block in hoot.key_blocks:
        if len(block) * 8 != params.key_block_bits:
            raise ConfigError("hoot key block width does not match params")
    needed = total_glyphs(params, n, len(hoot.ciphertext))
    if needed > params.glyph_budget:
        raise CapacityError(
            f"{needed} glyphs exceed the budget of {params.glyph_budget}; "
            f"capacity for {n} tag(s) is {capacity(params, n)} bytes",
            needed=needed,
            budget=params.glyph_budget,
            capacity=capacity(params, n),
        )
    tokens = " ".join("#" + encode_short_tag(tag) for tag in hoot.short_tags)
    body = b"".join(hoot.key_blocks) + hoot.mac + hoot.ciphertext
    payload = base64.b64encode(body).rstrip(b"=").decode("ascii")
    return tokens + " " + payload


def parse(text: str, params: WireParams = DEFAULT_PARAMS) -> Hoot:
    """Parse a wire line back into a hoot.

    Raises ParseError with a ``kind`` of "no-tag", "bad-tag",
    "payload-length", or "bad-alphabet".
    """
    tokens = text.strip().split(" ")
    tags: list[ShortTag] = []
    index = 0
    while index < len(tokens) and tokens[index].startswith("#"):
        tags.append(decode_short_tag(tokens[index][1:], params.k))
        index += 1
    if not tags:
        raise ParseError("no hashtag token found", kind="no-tag")
    if index == len(tokens) or tokens[index] == "":
        raise ParseError("missing payload after hashtag tokens", kind="payload-length")
    if len(tokens) - index > 1:
        raise ParseError("whitespace inside payload", kind="bad-alphabet")
    payload = tokens[index]
    bad = set(payload) - _BASE64_GLYPHS
    if bad:
        raise ParseError(f"payload glyphs {sorted(bad)!r} outside the base64 alphabet", kind="bad-alphabet")
    if len(payload) % 4 == 1:
        raise ParseError("payload length is not a valid unpadded base64 length", kind="payload-length")
    try:
        body = base64.b64decode(payload + "=" * (-len(payload) % 4))
    except binascii.Error as exc:
        raise ParseError(f"payload does not decode: {exc}", kind="payload-length") from exc
    if base64.b64encode(body).rstrip(b"=").decode("ascii") != payload:
        # non-zero trailing bits: a truncated or reframed payload
        raise ParseError("payload is not a canonical unpadded base64 encoding", kind="payload-length")
    block_bytes = params.key_block_bits // 8
    mac_bytes = params.mac_bits // 8
    fixed = len(tags) * block_bytes + mac_bytes
    if len(body) < fixed:
        raise ParseError(
            f"payload holds {len(body)} bytes but {len(tags)} tag(s) require at least {fixed}",
            kind="payload-length",
        )
    blocks = tuple(body[i * block_bytes : (i + 1) * block_bytes] for i in range(len(tags)))
    mac = body[len(tags) * block_bytes : fixed]
    ciphertext = body[fixed:]
    return Hoot(tuple(tags), blocks, mac, ciphertext)


def seal_to_wire(
    message: bytes,
    plain_tags,
    cfg: KdfConfig = FAST_KDF,
    params: WireParams = DEFAULT_PARAMS,
    *,
    rng=None,
) -> str:
    """Seal and render in one step, enforcing the glyph budget.

    The capacity check runs before any key material is derived, so an
    over-long message fails fast with the exact limit in the error.
    """
    plain_tags = list(plain_tags)
    if not plain_tags:
        raise ValueError("seal needs at least one plain tag")
    limit = capacity(params, len(plain_tags))
    if len(message) > limit:
        raise CapacityError(
            f"message of {len(message)} bytes exceeds capacity {limit} for {len(plain_tags)} tag(s)",
            needed=total_glyphs(params, len(plain_tags), len(message)),
            budget=params.glyph_budget,
            capacity=limit,
        )
    return encode(seal(message, plain_tags, cfg, k=params.k, rng=rng), params)
