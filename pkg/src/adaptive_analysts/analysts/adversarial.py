"""Adversarial analysts that hide the whole transcript in their state.

Three constructions, all with explicit finite precision and exact integer
or rational arithmetic:

* ``ReservedValueAdversary`` keeps only the last answer (window 1), yet every
  answer carries the full history because each query reserves the high-order
  bits of its value for the previous payload.
* ``InterleavingAnalyst`` stores ``h_t = s * c(a_{t-1}, h_{t-1})`` where ``c``
  interleaves decimal digits and ``s = min(lam, L)``.
* ``StackingAnalyst`` writes each answer into fresh state coordinates.

Running out of precision raises ``PrecisionExhausted`` instead of silently
corrupting the decoded transcript.
"""

from decimal import Decimal
from fractions import Fraction

import numpy as np

from .._validation import check_int, check_positive
from ..queries import CoordinateQuery, QueryFn

__all__ = [
    "PrecisionExhausted",
    "interleave",
    "de_interleave",
    "InterleavingAnalyst",
    "ReservedValueQuery",
    "ReservedValueAdversary",
    "StackingAnalyst",
]


class PrecisionExhausted(ValueError):
    """The declared digit or bit budget cannot hold the construction."""


def to_fraction(x):
    """Exact rational value of ``x``; floats are read through their shortest repr."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    if isinstance(x, Decimal):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(Decimal(x))
    return Fraction(Decimal(repr(float(x))))


def decimal_length(x):
    """Smallest ``k`` with ``x * 10**k`` an integer."""
    x = to_fraction(x)
    den = x.denominator
    twos = fives = 0
    while den % 2 == 0:
        den //= 2
        twos += 1
    while den % 5 == 0:
        den //= 5
        fives += 1
    if den != 1:
        raise ValueError(f"{x} has no terminating decimal expansion")
    return max(twos, fives)


def _int_digits(x, k):
    # split conversion sidesteps the interpreter's int -> str length limit
    if k <= 1000:
        return str(x).zfill(k)
    half = k // 2
    hi, lo = divmod(x, 10**half)
    return _int_digits(hi, k - half) + _int_digits(lo, half)


def _digits(x, k, name):
    x = to_fraction(x)
    if not 0 <= x < 1:
        raise ValueError(f"{name} must lie in [0, 1), got {float(x)!r}")
    scaled = x * 10**k
    if scaled.denominator != 1:
        raise PrecisionExhausted(f"{name} needs more than {k} decimal digits")
    return _int_digits(scaled.numerator, k)


def _as_decimal(digit_str):
    return Decimal("0." + digit_str) if digit_str else Decimal(0)


def interleave(a, h, digits):
    """``0.a1 h1 a2 h2 ...`` truncated at ``2 * digits`` places, computed exactly.

    Parameters
    ----------
    a, h : float, str, Decimal or Fraction in [0, 1)
    digits : int
        Decimal digits taken from each input; inputs with more digits are
        rejected rather than truncated.

    Returns
    -------
    Decimal
    """
    digits = check_int(digits, "digits", minimum=1)
    da, dh = _digits(a, digits, "a"), _digits(h, digits, "h")
    return _as_decimal("".join(x + y for x, y in zip(da, dh)))


def de_interleave(c, digits=None):
    """Inverse of :func:`interleave`; returns ``(a, h)`` as Decimals."""
    c = to_fraction(c)
    if digits is None:
        digits = max(1, -(-decimal_length(c) // 2))
    s = _digits(c, 2 * digits, "c")
    return _as_decimal(s[0::2]), _as_decimal(s[1::2])


class InterleavingAnalyst:
    """``h_t = s * c(a_{t-1} / 10, h_{t-1})`` with ``s = min(lam, L)``.

    Answers are read at ``answer_digits`` decimal places; dividing by 10 makes
    room for the answer 1. The state is an exact rational number. On a grid
    (``delta`` given) it is rounded to a multiple of ``delta`` after every
    step, which destroys the stored digits.

    Parameters
    ----------
    lam, L : float
        Declared contraction and answer constants.
    answer_digits : int
    max_digits : int
        Budget for the decimal length of the state.
    delta : float or None
    """

    family = "interleaving"
    klass = "adversarial"
    d_q = 1

    def __init__(self, lam=0.9, L=1.0, *, answer_digits=6, max_digits=200_000, delta=None):
        if not 0 < lam <= 1:
            raise ValueError(f"lam must lie in (0, 1], got {lam!r}")
        self.lam = lam
        self.L = check_positive(L, "L")
        self.answer_digits = check_int(answer_digits, "answer_digits", minimum=1)
        self.max_digits = check_int(max_digits, "max_digits", minimum=1)
        self.delta = delta
        self.scale = to_fraction(min(lam, L))
        self.grid = None if delta is None else to_fraction(delta)

    def quantize_answer(self, a):
        """Answer as read by the analyst: rounded to ``answer_digits`` places."""
        a = to_fraction(a)
        if not 0 <= a <= 1:
            raise ValueError(f"answers must lie in [0, 1], got {float(a)!r}")
        unit = 10**self.answer_digits
        return Fraction(round(a * unit), unit)

    def initial_state(self):
        return Fraction(0)

    def step(self, h, a):
        a_part = self.quantize_answer(a) / 10
        width = max(self.answer_digits + 1, decimal_length(h))
        if 2 * width + 1 > self.max_digits:
            raise PrecisionExhausted(
                f"state needs {2 * width + 1} decimal digits, budget is {self.max_digits}"
            )
        nxt = self.scale * to_fraction(interleave(a_part, h, width))
        if self.grid is not None:
            nxt = round(nxt / self.grid) * self.grid
        return nxt

    def run(self, answers):
        h = self.initial_state()
        states = [h]
        for a in answers:
            h = self.step(h, a)
            states.append(h)
        return states

    def decode_transcript(self, h, t):
        """Recover the last ``t`` answers (oldest first) from the state alone."""
        out = []
        for _ in range(check_int(t, "t", minimum=0)):
            try:
                a_part, h = de_interleave(to_fraction(h) / self.scale)
            except (ValueError, PrecisionExhausted):
                # off-grid value with no terminating expansion: information is gone
                return None
            out.append(to_fraction(a_part) * 10)
            h = to_fraction(h)
        return out[::-1]

    def query(self, t, h):
        return CoordinateQuery([0])

    def to_dict(self):
        return {"family": self.family, "klass": self.klass, "lam": self.lam, "L": self.L,
                "answer_digits": self.answer_digits, "delta": self.delta}


class ReservedValueQuery(QueryFn):
    """``(P * 2^b + (2^b - 1) g(x)) / 2^(b t)`` for a boolean base query ``g``.

    The high bits carry the payload ``P`` of earlier answers; the low ``b``
    bits are left for the new answer.
    """

    family = "reserved_value"

    def __init__(self, payload, t, bits, base):
        self.payload = int(payload)
        self.t = check_int(t, "t", minimum=1)
        self.bits = check_int(bits, "bits", minimum=1)
        self.base = base

    @property
    def d_q(self):
        return 1

    def params(self):
        return {"payload": str(self.payload), "t": self.t, "bits": self.bits,
                "base": self.base.id}

    def exact_mean(self, points):
        """Exact rational empirical mean."""
        count = int(np.rint(self.base(points)[:, 0].sum()))
        n = points.shape[0]
        unit = 2**self.bits
        num = Fraction(self.payload * unit) + Fraction((unit - 1) * count, n)
        return num / 2 ** (self.bits * self.t)

    def _evaluate(self, points):
        return np.array([[float(self.exact_mean(p[None]))] for p in points])


class ReservedValueAdversary:
    """Window-one analyst that recovers the whole transcript.

    ``psi_t(h, a) = a``: the state is the last answer only. The query for
    round ``t`` is a :class:`ReservedValueQuery` whose payload is read off
    the state, so each answer extends the stored transcript by ``bits`` bits.

    Parameters
    ----------
    bits : int
        Fixed-point precision of each underlying answer.
    precision_bits : int
        Precision of the answers the mechanism returns; exceeded when
        ``bits * t > precision_bits``.
    base_queries : callable, optional
        ``(t, decoded_history) -> QueryFn`` boolean query; defaults to
        coordinate ``(t - 1) mod width``.
    """

    family = "reserved_value"
    klass = "adversarial"
    window = 1

    def __init__(self, bits=16, precision_bits=1024, base_queries=None, width=1):
        self.bits = check_int(bits, "bits", minimum=1)
        self.precision_bits = check_int(precision_bits, "precision_bits", minimum=1)
        self.base_queries = base_queries
        self.width = check_int(width, "width", minimum=1)

    def base_query(self, t, history):
        if self.base_queries is not None:
            return self.base_queries(t, history)
        return CoordinateQuery([(t - 1) % self.width])

    def payload(self, h, t):
        """Integer payload held by state ``h`` at round ``t``."""
        scaled = to_fraction(h) * 2 ** (self.bits * (t - 1))
        return round(scaled)

    def query(self, t, h):
        if self.bits * t > self.precision_bits:
            raise PrecisionExhausted(
                f"round {t} needs {self.bits * t} bits, budget is {self.precision_bits}"
            )
        P = self.payload(h, t)
        return ReservedValueQuery(P, t, self.bits, self.base_query(t, self.decode(P, t - 1)))

    def answer(self, query, points):
        """Fixed-point empirical mechanism at ``precision_bits``."""
        unit = 2**self.precision_bits
        return Fraction(round(query.exact_mean(points) * unit), unit)

    def step(self, h, a, t):
        return to_fraction(a)

    def decode(self, payload, t):
        mask = 2**self.bits - 1
        return [(payload >> (self.bits * (t - 1 - i))) & mask for i in range(t)]

    def decode_transcript(self, h, t):
        """All ``t`` fixed-point answers from the state after round ``t``."""
        return self.decode(self.payload(h, t + 1), t)

    def true_answer(self, base, points):
        """The ``bits``-bit empirical answer of a base query, computed directly."""
        count = int(np.rint(base(points)[:, 0].sum()))
        return round(Fraction((2**self.bits - 1) * count, points.shape[0]))

    def to_dict(self):
        return {"family": self.family, "klass": self.klass, "bits": self.bits,
                "precision_bits": self.precision_bits, "window": self.window}


class StackingAnalyst:
    """Writes ``L * a_{t-1}`` into coordinates ``(t-1) d_q .. t d_q - 1``.

    The state has ``t_max * d_q`` coordinates; a longer run raises
    ``PrecisionExhausted``.
    """

    family = "stacking"
    klass = "adversarial"

    def __init__(self, d_q=1, L=1.0, t_max=1000):
        self.d_q = check_int(d_q, "d_q", minimum=1)
        self.L = check_positive(L, "L")
        self.t_max = check_int(t_max, "t_max", minimum=1)

    @property
    def d(self):
        return self.t_max * self.d_q

    def initial_state(self):
        return np.zeros(self.d)

    def step(self, h, a, t):
        t = check_int(t, "t", minimum=1)
        if t > self.t_max:
            raise PrecisionExhausted(f"state holds {self.t_max} answers, round {t} needs more")
        a = np.asarray(a, dtype=float).reshape(self.d_q)
        out = np.array(h, dtype=float)
        out[(t - 1) * self.d_q : t * self.d_q] = self.L * a
        return out

    def run(self, answers):
        h = self.initial_state()
        for t, a in enumerate(answers, start=1):
            h = self.step(h, a, t)
        return h

    def decode_transcript(self, h, t):
        return (np.asarray(h)[: t * self.d_q] / self.L).reshape(t, self.d_q)

    def query(self, t, h):
        return CoordinateQuery(list(range(self.d_q)))

    def to_dict(self):
        return {"family": self.family, "klass": self.klass, "d_q": self.d_q, "L": self.L,
                "t_max": self.t_max}
