# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled counter-based normal generator for replication-parallel sampling.

Each replication ``r`` owns the Philox-4x64-10 stream with key ``(seed, 0)``
and 256-bit start counter ``r << 128``, so any worker can regenerate any
replication independently and the output never depends on how replications
are scheduled.  The stream and the normal transform are bit-identical to

    Generator(Philox(key=seed, counter=r << 128)).standard_normal(n)

which the pure-numpy fallback evaluates literally; tests assert equality.
"""

import numpy as np

cimport numpy as cnp
from libc.stdint cimport uint32_t, uint64_t
from numpy.random cimport bitgen_t
from numpy.random.c_distributions cimport random_standard_normal_fill

cdef extern from *:
    ctypedef unsigned long long uint128 "__uint128_t"

cnp.import_array()

DEF PHILOX_ROUNDS = 10

cdef uint64_t M0 = 0xD2E7470EE14C6C93u
cdef uint64_t M1 = 0xCA5A826395121157u
cdef uint64_t W0 = 0x9E3779B97F4A7C15u
cdef uint64_t W1 = 0xBB67AE8584CAA73Bu


cdef struct philox_state:
    uint64_t ctr[4]
    uint64_t key[2]
    uint64_t buf[4]
    int buf_pos
    int has_uint32
    uint64_t uinteger


cdef inline void _philox_block(philox_state *s) noexcept nogil:
    # numpy semantics: bump the 256-bit counter (with carry), then encrypt it
    cdef uint64_t c0, c1, c2, c3, k0, k1, hi0, lo0, hi1, lo1
    cdef uint128 p
    cdef int r
    s.ctr[0] += 1
    if s.ctr[0] == 0:
        s.ctr[1] += 1
        if s.ctr[1] == 0:
            s.ctr[2] += 1
            if s.ctr[2] == 0:
                s.ctr[3] += 1
    c0 = s.ctr[0]; c1 = s.ctr[1]; c2 = s.ctr[2]; c3 = s.ctr[3]
    k0 = s.key[0]; k1 = s.key[1]
    for r in range(PHILOX_ROUNDS):
        p = (<uint128> M0) * c0
        hi0 = <uint64_t> (p >> 64); lo0 = <uint64_t> p
        p = (<uint128> M1) * c2
        hi1 = <uint64_t> (p >> 64); lo1 = <uint64_t> p
        c0 = hi1 ^ c1 ^ k0
        c1 = lo1
        c2 = hi0 ^ c3 ^ k1
        c3 = lo0
        k0 += W0
        k1 += W1
    s.buf[0] = c0; s.buf[1] = c1; s.buf[2] = c2; s.buf[3] = c3
    s.buf_pos = 0


cdef uint64_t _next64(void *st) noexcept nogil:
    cdef philox_state *s = <philox_state *> st
    if s.buf_pos >= 4:
        _philox_block(s)
    s.buf_pos += 1
    return s.buf[s.buf_pos - 1]


cdef uint32_t _next32(void *st) noexcept nogil:
    cdef philox_state *s = <philox_state *> st
    cdef uint64_t v
    if s.has_uint32:
        s.has_uint32 = 0
        return <uint32_t> s.uinteger
    v = _next64(st)
    s.has_uint32 = 1
    s.uinteger = v >> 32
    return <uint32_t> (v & 0xFFFFFFFFu)


cdef double _next_double(void *st) noexcept nogil:
    return (_next64(st) >> 11) * (1.0 / 9007199254740992.0)


cdef inline void _rep_init(philox_state *s, uint64_t seed, uint64_t rep) noexcept nogil:
    s.ctr[0] = 0; s.ctr[1] = 0; s.ctr[2] = rep; s.ctr[3] = 0
    s.key[0] = seed; s.key[1] = 0
    s.buf_pos = 4
    s.has_uint32 = 0
    s.uinteger = 0


def fill_normals(object seed, object rep0, double[:, ::1] out not None):
    """Fill row i of ``out`` with the standard normals of replication rep0+i."""
    cdef uint64_t s64 = <uint64_t> int(seed)
    cdef uint64_t r0 = <uint64_t> int(rep0)
    cdef Py_ssize_t reps = out.shape[0]
    cdef Py_ssize_t npts = out.shape[1]
    cdef Py_ssize_t i
    cdef philox_state st
    cdef bitgen_t bg
    bg.state = <void *> &st
    bg.next_uint64 = _next64
    bg.next_uint32 = _next32
    bg.next_double = _next_double
    bg.next_raw = _next64
    with nogil:
        for i in range(reps):
            _rep_init(&st, s64, r0 + <uint64_t> i)
            random_standard_normal_fill(&bg, npts, &out[i, 0])


def raw_stream(object seed, object rep, Py_ssize_t count):
    """Raw uint64 stream of one replication (test hook against numpy Philox)."""
    cdef cnp.ndarray[cnp.uint64_t, ndim=1] out = np.empty(count, dtype=np.uint64)
    cdef philox_state st
    cdef Py_ssize_t i
    _rep_init(&st, <uint64_t> int(seed), <uint64_t> int(rep))
    for i in range(count):
        out[i] = _next64(<void *> &st)
    return out
