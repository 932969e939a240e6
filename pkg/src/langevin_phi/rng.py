"""Counter-based random numbers addressed by (particle, step, draw).

Every draw is a pure function of ``(seed, tag, particle, step, draw)``:
the 64-bit seed and a purpose tag form the Philox4x64-10 key, and
``(draw // 4, particle, step, 0)`` forms the counter. Each 256-bit block
yields four uniforms, so a run is bit-reproducible whatever order (or
thread) particles are processed in.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _backend
from ._backend import njit

# Random123 Philox4x64 constants
_M0 = np.uint64(0xD2E7470EE14C6C93)
_M1 = np.uint64(0xCA5A826395121157)
_W0 = np.uint64(0x9E3779B97F4A7C15)
_W1 = np.uint64(0xBB67AE8584CAA73B)
_MASK32 = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)
_S11 = np.uint64(11)
_TWO_M53 = 2.0**-53
_TWO_PI = 2.0 * np.pi
_U64 = (1 << 64) - 1

# purpose tags, one independent key per use site
TAG_INIT = 1
TAG_ULA = 2
TAG_FORWARD = 3
TAG_RGO_PROPOSAL = 4
TAG_RGO_ACCEPT = 5
TAG_RGO_EXACT = 6
TAG_USER = 7


# --------------------------------------------------------------------------
# numba (scalar) kernels


@njit
def _mulhilo_scalar(a, b):
    a_lo = a & _MASK32
    a_hi = a >> _S32
    b_lo = b & _MASK32
    b_hi = b >> _S32
    p0 = a_lo * b_lo
    p1 = a_lo * b_hi
    p2 = a_hi * b_lo
    p3 = a_hi * b_hi
    carry = ((p0 >> _S32) + (p1 & _MASK32) + (p2 & _MASK32)) >> _S32
    hi = p3 + (p1 >> _S32) + (p2 >> _S32) + carry
    return hi, a * b


@njit
def philox_block_scalar(c0, c1, c2, c3, k0, k1):
    """One Philox4x64-10 block for a single counter/key (all ``np.uint64``)."""
    for r in range(10):
        if r > 0:
            k0 = k0 + _W0
            k1 = k1 + _W1
        hi0, lo0 = _mulhilo_scalar(_M0, c0)
        hi1, lo1 = _mulhilo_scalar(_M1, c2)
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
    return c0, c1, c2, c3


@njit
def uniform_at(k0, k1, particle, step, draw):
    """Uniform in [0, 1) at one address."""
    block = philox_block_scalar(
        np.uint64(draw // 4), np.uint64(particle), np.uint64(step), np.uint64(0), k0, k1
    )
    lane = block[draw % 4]
    return float(lane >> _S11) * _TWO_M53


@njit
def normal_at(k0, k1, particle, step, draw):
    """Standard normal at one address (Box-Muller on a lane pair of the block)."""
    block = philox_block_scalar(
        np.uint64(draw // 4), np.uint64(particle), np.uint64(step), np.uint64(0), k0, k1
    )
    slot = draw % 4
    pair = slot // 2
    u1 = float(block[2 * pair] >> _S11) * _TWO_M53
    u2 = float(block[2 * pair + 1] >> _S11) * _TWO_M53
    radius = np.sqrt(-2.0 * np.log(1.0 - u1))
    if slot % 2 == 0:
        return radius * np.cos(_TWO_PI * u2)
    return radius * np.sin(_TWO_PI * u2)


@njit
def _fill_numba(k0, k1, particles, step, offset, count, normal):
    n = particles.shape[0]
    out = np.empty((n, count))
    for i in range(n):
        for j in range(count):
            if normal:
                out[i, j] = normal_at(k0, k1, particles[i], step, offset + j)
            else:
                out[i, j] = uniform_at(k0, k1, particles[i], step, offset + j)
    return out


# --------------------------------------------------------------------------
# numpy (vectorized) kernels


def _mulhilo_vec(a, b):
    a_lo = a & _MASK32
    a_hi = a >> _S32
    b_lo = b & _MASK32
    b_hi = b >> _S32
    p0 = a_lo * b_lo
    p1 = a_lo * b_hi
    p2 = a_hi * b_lo
    p3 = a_hi * b_hi
    carry = ((p0 >> _S32) + (p1 & _MASK32) + (p2 & _MASK32)) >> _S32
    hi = p3 + (p1 >> _S32) + (p2 >> _S32) + carry
    return hi, a * b


def philox_block_vec(c0, c1, c2, c3, k0, k1):
    """Vectorized Philox4x64-10 over broadcastable ``uint64`` counter arrays."""
    c0, c1, c2, c3 = np.broadcast_arrays(
        *(np.asarray(c, dtype=np.uint64) for c in (c0, c1, c2, c3))
    )
    k0 = np.uint64(k0)
    k1 = np.uint64(k1)
    with np.errstate(over="ignore"):
        for r in range(10):
            if r > 0:
                k0 = k0 + _W0
                k1 = k1 + _W1
            hi0, lo0 = _mulhilo_vec(_M0, c0)
            hi1, lo1 = _mulhilo_vec(_M1, c2)
            c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
    return c0, c1, c2, c3


def _fill_numpy(k0, k1, particles, step, offset, count, normal):
    draws = offset + np.arange(count, dtype=np.int64)
    blocks = (draws // 4).astype(np.uint64)
    slots = draws % 4
    pcol = particles.astype(np.uint64)[:, None]
    lanes = philox_block_vec(blocks[None, :], pcol, np.uint64(step), np.uint64(0), k0, k1)
    lanes = np.stack(lanes, axis=-1)  # (n, count, 4)
    if not normal:
        pick = np.take_along_axis(lanes, slots[None, :, None], axis=-1)[..., 0]
        return (pick >> _S11).astype(np.float64) * _TWO_M53
    pair = slots // 2
    first = np.take_along_axis(lanes, (2 * pair)[None, :, None], axis=-1)[..., 0]
    second = np.take_along_axis(lanes, (2 * pair + 1)[None, :, None], axis=-1)[..., 0]
    u1 = (first >> _S11).astype(np.float64) * _TWO_M53
    u2 = (second >> _S11).astype(np.float64) * _TWO_M53
    radius = np.sqrt(-2.0 * np.log(1.0 - u1))
    return np.where(slots % 2 == 0, radius * np.cos(_TWO_PI * u2), radius * np.sin(_TWO_PI * u2))


def _fill(k0, k1, particles, step, offset, count, normal, backend=None):
    backend = backend or _backend.BACKEND
    particles = np.ascontiguousarray(particles, dtype=np.int64)
    if count == 0 or particles.size == 0:
        return np.empty((particles.size, count))
    if backend == "numba":
        return _fill_numba(
            np.uint64(k0), np.uint64(k1), particles, np.int64(step), np.int64(offset),
            np.int64(count), normal,
        )
    return _fill_numpy(np.uint64(k0), np.uint64(k1), particles, step, offset, count, normal)


@dataclass(frozen=True)
class RngStream:
    """A seeded family of counter-addressed streams.

    ``seed`` is reduced modulo 2**64. Draws are requested for a set of
    particle indices at one step; ``offset`` selects the first draw index.
    """

    seed: int

    def key(self, tag: int) -> tuple[np.uint64, np.uint64]:
        return np.uint64(self.seed & _U64), np.uint64(tag)

    def normals(self, tag, particles, step, count, offset=0, backend=None):
        """Standard normals, shape ``(len(particles), count)``."""
        k0, k1 = self.key(tag)
        return _fill(k0, k1, particles, step, offset, count, True, backend)

    def uniforms(self, tag, particles, step, count, offset=0, backend=None):
        """Uniforms on [0, 1), shape ``(len(particles), count)``."""
        k0, k1 = self.key(tag)
        return _fill(k0, k1, particles, step, offset, count, False, backend)
