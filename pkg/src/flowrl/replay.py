"""Fixed-capacity uniform experience replay.

A preallocated ring of (s, a, r, s', done) records.  Single writer, single
reader: the buffer itself does no locking.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

Array = np.ndarray


@dataclass(frozen=True)
class Transition:
    s: Array
    a: Array
    r: float
    s_next: Array
    done: float

    def __post_init__(self):
        s = np.asarray(self.s, dtype=np.float64).reshape(-1)
        a = np.asarray(self.a, dtype=np.float64).reshape(-1)
        s_next = np.asarray(self.s_next, dtype=np.float64).reshape(-1)
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "s_next", s_next)
        object.__setattr__(self, "r", float(self.r))
        object.__setattr__(self, "done", float(self.done))
        if s.shape != s_next.shape:
            raise ValueError(f"s dim {s.shape} != s_next dim {s_next.shape}")
        if not np.isfinite(self.r):
            raise ValueError("reward must be finite")
        if not (np.isfinite(s).all() and np.isfinite(a).all() and np.isfinite(s_next).all()):
            raise ValueError("transition contains non-finite entries")
        if self.done not in (0.0, 1.0):
            raise ValueError(f"done must be 0 or 1, got {self.done}")


@dataclass
class TransitionBatch:
    """Column-stacked transitions as float64 arrays."""

    s: Array
    a: Array
    r: Array
    s_next: Array
    done: Array

    def __len__(self):
        return self.s.shape[0]


class ReplayBuffer:
    """Ring buffer with strictly FIFO overwrite; storage allocated lazily
    from the first pushed transition's dimensions."""

    def __init__(self, capacity: int, action_low=None, action_high=None):
        if capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {capacity}")
        self.capacity = int(capacity)
        self.action_low = None if action_low is None else np.asarray(action_low, dtype=np.float64)
        self.action_high = None if action_high is None else np.asarray(action_high, dtype=np.float64)
        self._s = None
        self._a = None
        self._r = None
        self._s_next = None
        self._done = None
        self._cursor = 0
        self._size = 0

    @property
    def size(self) -> int:
        return self._size

    def __len__(self):
        return self._size

    def _allocate(self, state_dim: int, action_dim: int) -> None:
        self._s = np.zeros((self.capacity, state_dim))
        self._a = np.zeros((self.capacity, action_dim))
        self._r = np.zeros(self.capacity)
        self._s_next = np.zeros((self.capacity, state_dim))
        self._done = np.zeros(self.capacity)

    def push(self, t: Transition) -> None:
        """Append one transition, overwriting the oldest entry at capacity."""
        if self.action_low is not None:
            eps = 1e-12
            if np.any(t.a < self.action_low - eps) or np.any(t.a > self.action_high + eps):
                raise ValueError(f"action {t.a} outside bounds "
                                 f"[{self.action_low}, {self.action_high}]")
        if self._s is None:
            self._allocate(t.s.shape[0], t.a.shape[0])
        elif t.s.shape[0] != self._s.shape[1] or t.a.shape[0] != self._a.shape[1]:
            raise ValueError("transition dimensions do not match buffer contents")

        i = self._cursor
        self._s[i] = t.s
        self._a[i] = t.a
        self._r[i] = t.r
        self._s_next[i] = t.s_next
        self._done[i] = t.done
        self._cursor = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def sample_uniform(self, batch_size: int, rng: np.random.Generator) -> TransitionBatch:
        """Uniform sampling with replacement; deterministic given the rng state."""
        if self._size == 0:
            raise ValueError("cannot sample from an empty buffer")
        if batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {batch_size}")
        idx = rng.integers(0, self._size, size=batch_size)
        return TransitionBatch(s=self._s[idx].copy(), a=self._a[idx].copy(),
                               r=self._r[idx].copy(), s_next=self._s_next[idx].copy(),
                               done=self._done[idx].copy())

    def stored(self, i: int) -> Transition:
        """The i-th oldest stored transition (0 = oldest); test/debug helper."""
        if not (0 <= i < self._size):
            raise IndexError(i)
        start = (self._cursor - self._size) % self.capacity
        j = (start + i) % self.capacity
        return Transition(s=self._s[j], a=self._a[j], r=self._r[j],
                          s_next=self._s_next[j], done=self._done[j])

    @property
    def cursor(self) -> int:
        return self._cursor

    def state_arrays(self) -> dict:
        """Snapshot of the occupied storage prefix in raw ring order.

        The physical layout is preserved exactly (not FIFO-compacted) so that
        a restored buffer replays identical sample indices; the write cursor
        is restored separately via load_state_arrays.
        """
        if self._size == 0:
            return {"s": np.zeros((0, 0)), "a": np.zeros((0, 0)), "r": np.zeros(0),
                    "s_next": np.zeros((0, 0)), "done": np.zeros(0)}
        n = self._size
        return {"s": self._s[:n].copy(), "a": self._a[:n].copy(), "r": self._r[:n].copy(),
                "s_next": self._s_next[:n].copy(), "done": self._done[:n].copy()}

    def load_state_arrays(self, arrays: dict, cursor: int | None = None) -> None:
        """Restore from a snapshot produced by state_arrays."""
        n = arrays["r"].shape[0]
        if n > self.capacity:
            raise ValueError("snapshot larger than buffer capacity")
        self._s = self._a = self._r = self._s_next = self._done = None
        self._cursor = 0
        self._size = 0
        if n == 0:
            return
        self._allocate(arrays["s"].shape[1], arrays["a"].shape[1])
        self._s[:n] = arrays["s"]
        self._a[:n] = arrays["a"]
        self._r[:n] = arrays["r"]
        self._s_next[:n] = arrays["s_next"]
        self._done[:n] = arrays["done"]
        self._size = n
        self._cursor = (n % self.capacity) if cursor is None else int(cursor)
