"""Back-and-forth refinement state: bounded caches of propagated residuals.

At each time step the heads emit a spatial residual S_t plus the two
temporal differences F_t (toward t+1) and P_t (toward t-1).  Subtracting
a run of consecutive differences from a residual carries it to another
time step:

    forward  (origin m < target t):  S_m - (F_m + F_{m+1} + ... + F_{t-1})
    backward (origin k > target t):  S_k - (P_k + P_{k-1} + ... + P_{t+1})

With exact ground-truth residuals both sums telescope to S_target, which
is the property the whole scheme rides on.

:class:`RefinementBuffers` maintains, for a moving refinement target t,
the N propagated residuals from past origins t-1..t-N and the N from
future origins t+1..t+N, using only bounded incremental state (no access
to full histories).  Because refinement targets advance forward in time,
future-origin entries are observed *before* the targets that consume
them: the buffer's target cursor trails the newest observed step by N,
and each future entry precomputes its ladder of propagated values down
to the deepest target that will ever read it.

:func:`oracle_direct` recomputes any entry from scratch out of a
:class:`SequenceLedger`; it is the reference the incremental machine is
proven against, and it applies the per-step subtractions in the same
order, so agreement is exact in both float32 and float64.

Slots whose origin falls outside the observed sequence hold zeros (the
state at sequence start, and again while draining past the end).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "propagate_adjacent_forward",
    "propagate_adjacent_backward",
    "accumulate_forward",
    "accumulate_backward",
    "SequenceLedger",
    "oracle_direct",
    "RefinementBuffers",
]


def _check_same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")


def propagate_adjacent_forward(s_prev: np.ndarray, f_prev: np.ndarray) -> np.ndarray:
    """Carry the previous step's residual one step forward: S_{t-1} - F_{t-1}."""
    _check_same_shape(s_prev, f_prev)
    return s_prev - f_prev


def propagate_adjacent_backward(s_next: np.ndarray, p_next: np.ndarray) -> np.ndarray:
    """Carry the next step's residual one step back: S_{t+1} - P_{t+1}."""
    _check_same_shape(s_next, p_next)
    return s_next - p_next


def accumulate_forward(s_origin: np.ndarray, future_diffs: list[np.ndarray]) -> np.ndarray:
    """Propagate a residual forward across several steps.

    ``future_diffs`` are the F tensors of the steps crossed, in
    chronological order starting at the origin step.  They are subtracted
    sequentially in that order, matching the incremental buffer updates.
    """
    if not future_diffs:
        raise ValueError("need at least one temporal difference to accumulate")
    acc = s_origin
    for f in future_diffs:
        _check_same_shape(acc, f)
        acc = acc - f
    return acc


def accumulate_backward(s_origin: np.ndarray, past_diffs: list[np.ndarray]) -> np.ndarray:
    """Propagate a residual backward across several steps.

    ``past_diffs`` are the P tensors of the steps crossed, ordered from
    the origin step downward, subtracted sequentially in that order.
    """
    if not past_diffs:
        raise ValueError("need at least one temporal difference to accumulate")
    acc = s_origin
    for p in past_diffs:
        _check_same_shape(acc, p)
        acc = acc - p
    return acc


@dataclass
class SequenceLedger:
    """Per-step histories of head outputs, indexed by time step.

    Only the testing/verification path retains this; the buffers
    themselves never see more than a bounded window of it.
    """

    s: dict[int, np.ndarray] = field(default_factory=dict)
    f: dict[int, np.ndarray] = field(default_factory=dict)
    p: dict[int, np.ndarray] = field(default_factory=dict)

    def record(self, t: int, s: np.ndarray, f: np.ndarray, p: np.ndarray) -> None:
        self.s[t] = s
        self.f[t] = f
        self.p[t] = p

    def steps(self) -> list[int]:
        return sorted(self.s)


def oracle_direct(ledger: SequenceLedger, origin: int, target: int) -> np.ndarray:
    """Recompute a propagated residual directly from stored histories.

    No incremental state: the chain of subtractions is replayed from the
    origin's residual every call.  Forward propagation (origin < target)
    subtracts F_origin .. F_{target-1} in ascending order; backward
    propagation subtracts P_origin .. P_{target+1} in descending order.
    """
    if origin == target:
        raise ValueError("origin and target must differ")
    if origin not in ledger.s:
        raise KeyError(f"no residual recorded for step {origin}")
    acc = ledger.s[origin]
    if origin < target:
        for w in range(origin, target):
            if w not in ledger.f:
                raise KeyError(f"no future-difference recorded for step {w}")
            acc = acc - ledger.f[w]
    else:
        for w in range(origin, target, -1):
            if w not in ledger.p:
                raise KeyError(f"no past-difference recorded for step {w}")
            acc = acc - ledger.p[w]
    return acc


class _FutureEntry:
    """One future-origin residual with its precomputed propagation ladder.

    ``ladder[d]`` (d = 1..n) is the entry propagated back d steps, i.e.
    the value a target d steps below the origin reads.  Rungs that would
    cross unobserved steps stay None; the consumption schedule never
    touches them.
    """

    __slots__ = ("origin", "valid", "ladder")

    def __init__(self, origin: int, valid: bool, ladder: list[np.ndarray | None]):
        self.origin = origin
        self.valid = valid
        self.ladder = ladder


class RefinementBuffers:
    """FIFO caches of propagated residuals around a moving target step.

    After ``update`` has advanced the target to t, slot l of the past
    side holds the residual of origin t-l propagated forward to t, and
    slot l of the future side holds the residual of origin t+l
    propagated back to t — zeros where the origin was never observed.

    One ``update`` call advances the target by one step.  Its arguments
    live in two time frames: the past-side pair is the residual and
    future-difference of the step the target is leaving, while the
    future-side pair is the residual and past-difference of the newest
    observed step (N+1 ahead of the new target).  Pass None at sequence
    boundaries.  Incremental state is bounded: N past tensors, N future
    ladders, and the last N-1 past-differences.
    """

    def __init__(self, n: int, shape: tuple[int, ...], *, start_t: int = 0, dtype=np.float64):
        if n < 1:
            raise ValueError(f"buffer size must be >= 1, got {n}")
        self.n = n
        self.shape = tuple(shape)
        self.dtype = np.dtype(dtype)
        self.t = start_t
        self._past: list[np.ndarray] = [self._zero() for _ in range(n)]
        self._past_valid: list[bool] = [False] * n
        self._future: deque[_FutureEntry] = deque(
            _FutureEntry(start_t + l, False, [None] * (n + 1)) for l in range(1, n + 1)
        )
        self._recent_p: deque[np.ndarray | None] = deque(maxlen=max(n - 1, 1))

    def _zero(self) -> np.ndarray:
        return np.zeros(self.shape, dtype=self.dtype)

    def _coerce(self, x: np.ndarray, what: str) -> np.ndarray:
        if x.shape != self.shape:
            raise ValueError(f"{what} has shape {x.shape}, buffer entries are {self.shape}")
        return np.asarray(x, dtype=self.dtype)

    # -- views ---------------------------------------------------------

    def past_entries(self) -> list[np.ndarray]:
        """Slot l=1..n: origin t-l propagated to t (zeros if unobserved)."""
        return [e.copy() for e in self._past]

    def past_valid(self) -> list[bool]:
        return list(self._past_valid)

    def future_entries(self) -> list[np.ndarray]:
        """Slot l=1..n: origin t+l propagated to t (zeros if unobserved)."""
        out = []
        for l, entry in enumerate(self._future, start=1):
            rung = entry.ladder[l] if entry.valid else None
            out.append(self._zero() if rung is None else rung.copy())
        return out

    def future_valid(self) -> list[bool]:
        return [e.valid and e.ladder[l] is not None for l, e in enumerate(self._future, start=1)]

    # -- update --------------------------------------------------------

    def update(
        self,
        s_past_origin: np.ndarray | None,
        s_future_origin: np.ndarray | None,
        f_past: np.ndarray | None,
        p_future: np.ndarray | None,
    ) -> None:
        """Advance the target one step, shifting, evicting and inserting.

        Past side: every kept entry moves with the target by subtracting
        the leaving step's future-difference, the deepest entry is
        evicted, and the leaving step itself enters as the fresh adjacent
        propagation.  Future side: the entry whose origin the target
        reaches is evicted and the newest observed step enters with its
        ladder built by repeated adjacent backward propagation.
        """
        if (s_past_origin is None) != (f_past is None):
            raise ValueError("s_past_origin and f_past must both be given or both be None")
        if (s_future_origin is None) != (p_future is None):
            raise ValueError("s_future_origin and p_future must both be given or both be None")
        if s_past_origin is not None:
            s_past_origin = self._coerce(s_past_origin, "s_past_origin")
            f_past = self._coerce(f_past, "f_past")
        if s_future_origin is not None:
            s_future_origin = self._coerce(s_future_origin, "s_future_origin")
            p_future = self._coerce(p_future, "p_future")

        # past: shift kept entries across the leaving step, insert it fresh
        if f_past is None and any(self._past_valid[: self.n - 1]):
            raise ValueError("cannot shift observed past entries without the leaving step's F")
        self._past.pop()
        self._past_valid.pop()
        if f_past is not None:
            self._past = [e - f_past if v else e for e, v in zip(self._past, self._past_valid)]
            self._past.insert(0, s_past_origin - f_past)
            self._past_valid.insert(0, True)
        else:
            self._past.insert(0, self._zero())
            self._past_valid.insert(0, False)

        # future: evict the reached origin, insert the newest observed step
        self._future.popleft()
        new_origin = self.t + 1 + self.n
        if s_future_origin is not None:
            ladder: list[np.ndarray | None] = [None] * (self.n + 1)
            acc = propagate_adjacent_backward(s_future_origin, p_future)
            ladder[1] = acc
            for d in range(2, self.n + 1):
                prev_p = self._recent_p[-(d - 1)] if len(self._recent_p) >= d - 1 else None
                if prev_p is None:
                    break
                acc = acc - prev_p
                ladder[d] = acc
            self._future.append(_FutureEntry(new_origin, True, ladder))
        else:
            self._future.append(_FutureEntry(new_origin, False, [None] * (self.n + 1)))
        if self.n > 1:
            self._recent_p.append(p_future)

        self.t += 1
