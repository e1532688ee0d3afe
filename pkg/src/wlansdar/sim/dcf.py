"""Reference engine: binary exponential backoff with per-node timers.

Each contending node keeps a backoff counter drawn uniformly from
[0, CW_stage] and a timer event that fires when the counter reaches
zero. Counters tick once per idle sigma on a grid anchored at the end
of the last channel activity; when the channel turns busy every other
timer is cancelled and the elapsed idle slots are subtracted, and all
timers are rescheduled when the channel goes idle again. A success
resets the stage; a collision doubles the window until cw_max, and the
packet is dropped once the retry limit is exceeded (finite-retry model).

Durations follow the same anatomy as the model engine, except that no
extra sigma is appended to busy periods.
"""

from __future__ import annotations

from ..params import Scenario
from .core import Cell
from .events import PRIO_MAC
from .stats import SimStats
from .streams import BACKOFF, substream

TIMER = 20
TX_END = 21


class DcfCell(Cell):
    engine = "dcf"

    def __init__(self, s: Scenario, seed: int, horizon: float, **kw):
        super().__init__(s, seed, horizon, **kw)
        m = s.m
        self.mac = s.mac
        self.windows = [s.mac.window(k) for k in range(s.mac.retry_limit + s.mac.max_stage + 2)]
        self.finite = s.mac.retry_model == "finite"
        self.rng = substream(seed, BACKOFF)
        self.uniforms = []
        self.contending = [False] * m
        self.counter = [0] * m
        self.count_from = [0] * m
        self.timer = [None] * m
        self.stage = [0] * m
        self.retries = [0] * m
        self.busy = False
        self.resume = 0
        self.tx = []

    def _window(self, stage: int) -> int:
        w = self.windows
        return w[stage] if stage < len(w) else w[-1]

    def _draw(self, i: int) -> None:
        """Uniform backoff counter on 0..CW for the node's current stage."""
        if not self.uniforms:
            self.uniforms = self.rng.random(1024).tolist()
        self.counter[i] = int(self.uniforms.pop() * (self._window(self.stage[i]) + 1))

    def _arm(self, i: int, start: int) -> None:
        self.count_from[i] = start
        self.timer[i] = self.eq.push(start + self.counter[i] * self.sig, PRIO_MAC, TIMER, i)

    def on_arrival(self, i: int, t: int) -> None:
        was_empty = not self.queues[i]
        if not self.accept(i, t) or not was_empty:
            return
        self.log(t, "arrival", i)
        self.contending[i] = True
        self.stage[i] = 0
        self.retries[i] = 0
        self._draw(i)
        if not self.busy:
            # join the idle-slot grid at its next tick
            self._arm(i, self.resume + ((t - self.resume) // self.sig + 1) * self.sig)

    def handle(self, kind: int, t: int, node: int) -> None:
        if kind == TIMER:
            self._fire(t, node)
        elif kind == TX_END:
            self._end(t)

    def _fire(self, t: int, first: int) -> None:
        eq = self.eq
        tx = [first]
        self.timer[first] = None
        while True:
            nxt = eq.peek()
            if nxt is None or nxt[0] != t or nxt[3] != TIMER:
                break
            eq.pop()
            tx.append(nxt[4])
            self.timer[nxt[4]] = None
        # freeze everyone else
        sig = self.sig
        for i in range(self.m):
            ev = self.timer[i]
            if ev is not None:
                eq.cancel(ev)
                self.timer[i] = None
                elapsed = (t - self.count_from[i]) // sig
                if elapsed > 0:
                    self.counter[i] -= elapsed
        st = self.stats
        k = len(tx)
        if t >= self.W:
            for i in tx:
                st.attempts[i] += 1
                if k > 1:
                    st.collisions[i] += 1
        self.busy = True
        self.tx = tx
        self.log(t, "success" if k == 1 else "collision", tx[0] if k == 1 else -1)
        eq.push(t + (self.ts if k == 1 else self.tc), PRIO_MAC, TX_END)

    def _end(self, t: int) -> None:
        self.busy = False
        self.resume = t
        tx = self.tx
        if len(tx) == 1:
            i = tx[0]
            self.depart(i, t)
            self.settle(i, t)
            self._next_packet(i)
        else:
            for i in tx:
                self.retries[i] += 1
                if self.finite and self.retries[i] > self.mac.retry_limit:
                    self.drop(i, t)
                    self.settle(i, t)
                    self._next_packet(i)
                else:
                    self.stage[i] += 1
                    self._draw(i)
        for i in range(self.m):
            if self.contending[i]:
                self._arm(i, t)

    def _next_packet(self, i: int) -> None:
        self.stage[i] = 0
        self.retries[i] = 0
        if self.queues[i]:
            self._draw(i)
        else:
            self.contending[i] = False


def run_dcf(s: Scenario, seed: int = 0, horizon: float = 100.0, **kw) -> SimStats:
    return DcfCell(s, seed, horizon, **kw).run()
