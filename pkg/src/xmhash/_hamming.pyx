# cython: boundscheck=False, wraparound=False, cdivision=True
"""Hot XOR/popcount kernels for bit-packed Hamming ranking."""

from libc.stdint cimport uint64_t, int64_t

cdef extern from *:
    """
    #if defined(__GNUC__) || defined(__clang__)
    #  define XMHASH_POPCNT(x) __builtin_popcountll(x)
    #else
    static inline int XMHASH_POPCNT(unsigned long long x) {
        int c = 0;
        while (x) { x &= x - 1; ++c; }
        return c;
    }
    #endif
    """
    int XMHASH_POPCNT(unsigned long long x) nogil


def query_distances(const uint64_t[::1] query, const uint64_t[:, ::1] db, int64_t[::1] out):
    """Hamming distances from one packed query to every database row."""
    cdef Py_ssize_t i, w
    cdef Py_ssize_t n = db.shape[0]
    cdef Py_ssize_t n_words = db.shape[1]
    cdef int64_t d
    if query.shape[0] != n_words or out.shape[0] != n:
        raise ValueError("shape mismatch")
    with nogil:
        for i in range(n):
            d = 0
            for w in range(n_words):
                d += XMHASH_POPCNT(query[w] ^ db[i, w])
            out[i] = d


def pairwise_distances(const uint64_t[:, ::1] queries, const uint64_t[:, ::1] db,
                       int64_t[:, ::1] out):
    """Hamming distances between every query row and every database row."""
    cdef Py_ssize_t qi, i, w
    cdef Py_ssize_t nq = queries.shape[0]
    cdef Py_ssize_t n = db.shape[0]
    cdef Py_ssize_t n_words = db.shape[1]
    cdef int64_t d
    if queries.shape[1] != n_words or out.shape[0] != nq or out.shape[1] != n:
        raise ValueError("shape mismatch")
    with nogil:
        for qi in range(nq):
            for i in range(n):
                d = 0
                for w in range(n_words):
                    d += XMHASH_POPCNT(queries[qi, w] ^ db[i, w])
                out[qi, i] = d
