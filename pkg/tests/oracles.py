"""Brute-force references built on integers and long words only.

Nothing here touches the clopen algebra of the library, so agreement with
it is a genuine second route.
"""
from itertools import product


def odo_value(word, base):
    return sum(int(c) * base ** i for i, c in enumerate(word))


def odo_word(v, base, n):
    out = []
    for _ in range(n):
        v, d = divmod(v, base)
        out.append(str(d))
    return "".join(out)


def odo_image(words, base, k):
    """Image of a set of depth-n cylinder words under adding k."""
    n = len(next(iter(words)))
    mod = base ** n
    return {odo_word((odo_value(w, base) + k) % mod, base, n) for w in words}


def odo_return_times(domain, target, base, depth):
    """First k >= 1 with x + k in target, for every depth-``depth`` cylinder
    of the domain.  Both word sets must have depth at most ``depth``."""
    mod = base ** depth
    out = {}
    for digits in product(range(base), repeat=depth):
        w = "".join(map(str, digits))
        if not any(w.startswith(d) for d in domain):
            continue
        v = odo_value(w, base)
        k = 1
        while not any(odo_word((v + k) % mod, base, depth).startswith(t) for t in target):
            k += 1
        out[w] = k
    return out


def substitution_word(rules, seed, length):
    w = seed
    while len(w) < length:
        w = "".join(rules[c] for c in w)
    return w


def factors(word, n):
    return {word[i:i + n] for i in range(len(word) - n + 1)}


def occurrence_gaps(word, u):
    """Distances between consecutive occurrences of ``u`` in ``word``."""
    pos = [i for i in range(len(word) - len(u) + 1) if word.startswith(u, i)]
    return [b - a for a, b in zip(pos, pos[1:])]


def brute_cokernel_rank(A):
    """Rank of an integer matrix over Q by fraction-free elimination on a copy."""
    from fractions import Fraction
    M = [[Fraction(x) for x in row] for row in A]
    r = 0
    cols = len(M[0]) if M else 0
    for c in range(cols):
        p = next((i for i in range(r, len(M)) if M[i][c]), None)
        if p is None:
            continue
        M[r], M[p] = M[p], M[r]
        for i in range(len(M)):
            if i != r and M[i][c]:
                q = M[i][c] / M[r][c]
                M[i] = [a - q * b for a, b in zip(M[i], M[r])]
        r += 1
    return r
