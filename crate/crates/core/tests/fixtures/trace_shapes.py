"""Independent truth table for the six canonical violation trace shapes.

Each trace is a lasso of (cv, ca) letters. Formulas are evaluated at
position 0 by scanning witness positions along the unrolled word, which is
unrelated to the fixpoint evaluator in the crate. The printed table is
frozen into the acceptance test.
"""

TRACES = {
    "not_provided": ([(0, 0), (1, 0)], [(0, 0)]),
    "provided": ([], [(1, 1)]),
    "too_early": ([(0, 1), (1, 1)], [(1, 0)]),
    "too_late": ([(0, 0), (1, 0)], [(1, 1)]),
    "applied_too_long": ([(1, 1)], [(0, 1)]),
    "stopped_too_soon": ([(1, 1)], [(1, 0)]),
}


def word(prefix, loop, i):
    if i < len(prefix):
        return prefix[i]
    return loop[(i - len(prefix)) % len(loop)]


def horizon(prefix, loop):
    # every suffix is determined by a position below this bound
    return len(prefix) + len(loop)


def G(p, prefix, loop, i):
    return all(p(j) for j in range(i, i + horizon(prefix, loop) + len(loop)))


def F(p, prefix, loop, i):
    return any(p(j) for j in range(i, i + horizon(prefix, loop) + len(loop)))


def R(a, b, prefix, loop, i):
    # b holds up to and including the first a, or forever
    for j in range(i, i + horizon(prefix, loop) + len(loop)):
        if not b(j):
            return False
        if a(j):
            return True
    return True


def formulas(prefix, loop):
    cv = lambda i: bool(word(prefix, loop, i)[0])
    ca = lambda i: bool(word(prefix, loop, i)[1])
    imp = lambda a, b: (not a) or b
    g = lambda p, i: G(p, prefix, loop, i)
    f = lambda p, i: F(p, prefix, loop, i)
    r = lambda a, b, i: R(a, b, prefix, loop, i)
    obl = lambda i: r(ca, cv, i) and f(ca, i)
    return {
        "provided": g(lambda i: imp(cv(i), not ca(i)), 0),
        "not_provided": imp(cv(0), obl(0))
        and g(lambda i: imp(not cv(i) and cv(i + 1), obl(i + 1)), 0),
        "too_late": imp(cv(0), ca(0))
        and g(lambda i: imp(not cv(i), imp(cv(i + 1), ca(i + 1))), 0),
        "too_early": g(lambda i: imp(not cv(i) and cv(i + 1), not ca(i)), 0),
        "applied_too_long": g(
            lambda i: imp(cv(i) and ca(i), imp(not cv(i + 1), not ca(i + 1))), 0
        ),
        "stopped_too_soon": g(
            lambda i: imp(cv(i) and ca(i), imp(not ca(i + 1), not cv(i + 1))), 0
        ),
    }


ORDER = ["provided", "not_provided", "too_early", "too_late", "applied_too_long", "stopped_too_soon"]

if __name__ == "__main__":
    for name in ORDER:
        prefix, loop = TRACES[name]
        row = formulas(prefix, loop)
        print(name, [int(row[k]) for k in ORDER])
