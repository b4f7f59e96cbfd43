"""Brute-force top-n over splitmix64 vectors; mirrors index::corpus."""
import math
import struct

MASK = (1 << 64) - 1


def splitmix(seed):
    state = seed
    while True:
        state = (state + 0x9E3779B97F4A7C15) & MASK
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
        yield z ^ (z >> 31)


def f32(x):
    return struct.unpack("<f", struct.pack("<f", x))[0]


def unit_vectors(seed, count, dim):
    g = splitmix(seed)
    out = []
    for _ in range(count):
        raw = [2.0 * ((next(g) >> 11) / float(1 << 53)) - 1.0 for _ in range(dim)]
        s = 0.0
        for v in raw:
            s += v * v
        norm = math.sqrt(s)
        out.append([f32(v / norm) for v in raw])
    return out


def dot(a, b):
    s = 0.0
    for x, y in zip(a, b):
        s += x * y
    return s


def main():
    vecs = unit_vectors(7, 2001, 32)
    corpus, query = vecs[:2000], vecs[2000]
    scored = sorted(((dot(query, v), "e%04d" % i) for i, v in enumerate(corpus)), key=lambda t: (-t[0], t[1]))
    for score, node in scored[:20]:
        print(f'("{node}", {score!r}),')


if __name__ == "__main__":
    main()
