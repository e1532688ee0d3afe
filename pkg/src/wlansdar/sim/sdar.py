"""Model-based engine: state-dependent attempt rates on a slotted channel.

Only one channel event is ever pending: the end of the next channel
activity. Its start time is kept alongside, so arrivals can tell
whether the activity has begun. At each slot boundary every
non-empty node draws a geometric backoff with per-boundary attempt
probability beta_n (n = number of non-empty nodes); the smallest draw
wins and ties collide. The channel activity then occupies T_s + sigma
(success) or T_c + sigma (collision) and ends on a new boundary.

Arrivals follow the slot bookkeeping of the analytical chain:

* during channel activity they are held back and enqueued at its end,
  after the departure, so Q' = min(K, Q - D + A);
* while the channel is idle, an arrival to an empty queue makes that
  node visible at the next boundary, which cancels the pending
  transmission (the contending set has changed) and redraws backoffs.
"""

from __future__ import annotations

import math
from collections import Counter

from ..params import Scenario
from ..saturation import AttemptProfile, attempt_profile
from .core import Cell
from .events import PRIO_MAC
from .stats import SimStats
from .streams import BACKOFF, NEVER, substream

SLOT_END = 11
_BATCH = 1024


class SdarCell(Cell):
    engine = "sdar"

    def __init__(self, s: Scenario, seed: int, horizon: float, profile: AttemptProfile | None = None,
                 track_states: bool = False, **kw):
        super().__init__(s, seed, horizon, attempt_hist=True, **kw)
        betas = (profile or attempt_profile(s.m, s.mac)).betas.tolist()
        # 1 / log(1 - beta_n) for inverse-transform geometric draws
        self.inv_log = [0.0] + [1.0 / math.log1p(-b) if b < 1 else 0.0 for b in betas[1:]]
        self.rng = substream(seed, BACKOFF)
        self.uniforms = []
        self.run_start = 0
        self.run_n = 0
        self.pending = None
        self.tx_time = NEVER
        self.deferred = []
        self.tx = []
        self.nonempty = set()
        self.track = track_states
        self.state_from = 0
        if track_states:
            self.stats.state_visits = Counter()

    def _credit(self, upto: int) -> None:
        """Count the visible queue vector once per boundary in [state_from, upto)."""
        cnt = (upto - self.state_from) // self.sig
        if cnt > 0:
            if self.state_from >= self.W:
                self.stats.state_visits[tuple(len(q) for q in self.queues)] += cnt
            self.state_from += cnt * self.sig

    def _geometric(self, n: int) -> int:
        """Slot index (>= 1) of a node's first attempt, attempt prob beta_n per slot."""
        if not self.uniforms:
            self.uniforms = (1.0 - self.rng.random(_BATCH)).tolist()
        c = self.inv_log[n]
        u = self.uniforms.pop()
        return int(math.log(u) * c) + 1 if c else 1

    def _start_run(self, T: int) -> None:
        """Draw backoffs for the nodes visible at boundary T."""
        self.run_start = T
        ne = self.nonempty
        n = len(ne)
        self.run_n = n
        if n == 0:
            self.tx_time = NEVER
            return
        if n == 1:
            b = self._geometric(1)
            tx = list(ne)
        else:
            b = 1 << 62
            tx = []
            for i in ne:
                g = self._geometric(n)
                if g < b:
                    b, tx = g, [i]
                elif g == b:
                    tx.append(i)
        self.tx = tx
        self.tx_time = T + (b - 1) * self.sig
        end = self.tx_time + (self.ts if len(tx) == 1 else self.tc) + self.sig
        self.pending = self.eq.push(end, PRIO_MAC, SLOT_END)

    def _tally_idle(self, upto: int) -> None:
        if upto >= self.W and upto > self.run_start:
            self.stats.attempt_hist[self.run_n, 0] += (upto - self.run_start) // self.sig

    def on_arrival(self, i: int, t: int) -> None:
        if t >= self.tx_time:
            # channel activity under way (an arrival at its start belongs to the next slot)
            self.deferred.append((t, i))
            return
        if t < self.run_start:
            # a redraw is already scheduled for the coming boundary
            nxt = self.run_start
        else:
            nxt = self.run_start + ((t - self.run_start) // self.sig + 1) * self.sig
        if self.track:
            self._credit(nxt)
        was_empty = not self.queues[i]
        self.accept(i, t)
        self.log(t, "arrival", i)
        if was_empty:
            # the contending set changes at the next boundary: close the
            # current run there and redraw with the new population
            if self.pending is not None:
                self.eq.cancel(self.pending)
                self.pending = None
            self._tally_idle(nxt)
            self.nonempty.add(i)
            self._start_run(nxt)

    def handle(self, kind: int, t: int, node: int) -> None:
        if kind == SLOT_END:
            self._slot_end(t)

    def _tally_activity(self) -> None:
        st = self.stats
        tx, t0 = self.tx, self.tx_time
        k = len(tx)
        if t0 >= self.W:
            st.attempt_hist[self.run_n, 0] += (t0 - self.run_start) // self.sig
            st.attempt_hist[self.run_n, k] += 1
            for i in tx:
                st.attempts[i] += 1
                if k > 1:
                    st.collisions[i] += 1
        if self.track:
            self._credit(t0 + self.sig)

    def _slot_end(self, t: int) -> None:
        self.pending = None
        self._tally_activity()
        leaver = self.tx[0] if len(self.tx) == 1 else None
        self.log(t, "success" if leaver is not None else "collision", -1 if leaver is None else leaver)
        if leaver is not None:
            self.depart(leaver, t, record_left=False)
        for a, i in self.deferred:
            if self.accept(i, a):
                self.nonempty.add(i)
        self.deferred.clear()
        if leaver is not None:
            # left-behind count includes the slot's arrivals, as in the chain
            self.record_left_behind(leaver, t)
            self.settle(leaver, t)
            if not self.queues[leaver]:
                self.nonempty.discard(leaver)
        self.state_from = t
        self._start_run(t)


def run_sdar(s: Scenario, seed: int = 0, horizon: float = 100.0, **kw) -> SimStats:
    return SdarCell(s, seed, horizon, **kw).run()
