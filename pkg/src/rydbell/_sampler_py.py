"""Vectorized numpy sampling kernel.

This is the fallback implementation selected when the compiled extension is
unavailable. Both backends implement exactly the same counter-based draw
scheme, bit for bit:

    point_key = mix64(master_seed ^ (point_index * POINT_SALT))
    shot_key  = mix64(point_key ^ (shot_index * SHOT_SALT))
    word_k    = mix64(shot_key ^ (k * DRAW_SALT))        # k-th draw of a shot
    uniform   = (word_k >> 11) * 2**-53                  # in [0, 1)

where mix64 is the SplitMix64 finalizer. Draw 0 selects the joint outcome
against the cumulative table; draw 1 decides afterpulsing. Because every
uniform is a pure function of (master_seed, point, shot, k), any split of
the shot range across workers reproduces identical counts.
"""

from __future__ import annotations

import numpy as np

MASK64 = 0xFFFFFFFFFFFFFFFF
SHOT_SALT = 0x9E3779B97F4A7C15
POINT_SALT = 0xD1342543DE82EF95
DRAW_SALT = 0xDA942042E4DD58B5
_INV_2_53 = 1.0 / 9007199254740992.0

_NP_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_NP_MULT1 = np.uint64(0xBF58476D1CE4E5B9)
_NP_MULT2 = np.uint64(0x94D049BB133111EB)


def mix64(z: int) -> int:
    """SplitMix64 finalizer on plain python ints (scalar path)."""
    z = (z + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def _mix64_array(z: np.ndarray) -> np.ndarray:
    z = z + _NP_GAMMA
    z = (z ^ (z >> np.uint64(30))) * _NP_MULT1
    z = (z ^ (z >> np.uint64(27))) * _NP_MULT2
    return z ^ (z >> np.uint64(31))


def point_key(master_seed: int, point_index: int) -> int:
    return mix64(master_seed ^ ((point_index * POINT_SALT) & MASK64))


def shot_keys(pkey: int, shot_start: int, n_shots: int) -> np.ndarray:
    shots = np.arange(shot_start, shot_start + n_shots, dtype=np.uint64)
    return _mix64_array(np.uint64(pkey) ^ (shots * _NP_GAMMA))


def uniforms(skeys: np.ndarray, draw_index: int) -> np.ndarray:
    salt = np.uint64((draw_index * DRAW_SALT) & MASK64)
    words = _mix64_array(skeys ^ salt)
    return (words >> np.uint64(11)).astype(np.float64) * _INV_2_53


def sample_block(
    cum: np.ndarray,
    master_seed: int,
    point_index: int,
    shot_start: int,
    n_shots: int,
    multiplexed: bool,
    afterpulse_prob: float,
    counts: np.ndarray,
) -> int:
    """Sample one contiguous shot range, accumulating into ``counts`` (int64[9]).

    Returns the number of afterpulse-induced clicks.
    """
    pkey = point_key(master_seed, point_index)
    skeys = shot_keys(pkey, shot_start, n_shots)
    u0 = uniforms(skeys, 0)
    outcome = np.searchsorted(cum, u0, side="right")
    np.minimum(outcome, 8, out=outcome)

    n_afterpulse = 0
    if multiplexed and afterpulse_prob > 0.0:
        a, b = outcome // 3, outcome % 3
        candidates = np.flatnonzero((a < 2) & (b == 2))
        if candidates.size:
            u1 = uniforms(skeys[candidates], 1)
            fired = candidates[u1 < afterpulse_prob]
            outcome[fired] = 4 * (outcome[fired] // 3)  # (a, none) -> (a, a)
            n_afterpulse = int(fired.size)

    counts += np.bincount(outcome, minlength=9).astype(np.int64)
    return n_afterpulse
