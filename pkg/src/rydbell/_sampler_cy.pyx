# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled sampling kernel; bit-identical to the numpy fallback.

See _sampler_py for the draw scheme. Keep the two implementations in exact
arithmetic lockstep: any change here must be mirrored there.
"""

from libc.stdint cimport int64_t, uint64_t


cdef extern from *:
    """
    static const double RYDBELL_INV_2_53 = 1.0 / 9007199254740992.0;
    """
    const double RYDBELL_INV_2_53


cdef inline uint64_t _mix64(uint64_t z) nogil:
    z = z + <uint64_t>0x9E3779B97F4A7C15ULL
    z = (z ^ (z >> 30)) * <uint64_t>0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * <uint64_t>0x94D049BB133111EBULL
    return z ^ (z >> 31)


def sample_block(
    double[::1] cum,
    unsigned long long master_seed,
    unsigned long long point_index,
    unsigned long long shot_start,
    long long n_shots,
    bint multiplexed,
    double afterpulse_prob,
    int64_t[::1] counts,
):
    """Sample one contiguous shot range, accumulating into counts (int64[9]).

    Returns the number of afterpulse-induced clicks.
    """
    cdef uint64_t pkey = _mix64(master_seed ^ (point_index * <uint64_t>0xD1342543DE82EF95ULL))
    cdef uint64_t skey, word
    cdef uint64_t draw_salt = <uint64_t>0xDA942042E4DD58B5ULL
    cdef uint64_t shot_salt = <uint64_t>0x9E3779B97F4A7C15ULL
    cdef double u
    cdef long long i
    cdef int j, a, b
    cdef long long n_afterpulse = 0
    cdef bint use_ap = multiplexed and afterpulse_prob > 0.0

    with nogil:
        for i in range(n_shots):
            skey = _mix64(pkey ^ ((shot_start + <uint64_t>i) * shot_salt))
            word = _mix64(skey)  # draw 0: xor with 0*DRAW_SALT is a no-op
            u = <double>(word >> 11) * RYDBELL_INV_2_53
            j = 0
            while j < 8 and u >= cum[j]:
                j += 1
            if use_ap:
                a = j // 3
                b = j - 3 * a
                if a < 2 and b == 2:
                    word = _mix64(skey ^ draw_salt)
                    u = <double>(word >> 11) * RYDBELL_INV_2_53
                    if u < afterpulse_prob:
                        j = 4 * a
                        n_afterpulse += 1
            counts[j] += 1
    return n_afterpulse
