"""State and bookkeeping shared by both engines: queues, arrivals, tallies."""

from __future__ import annotations

import time
from collections import deque

from ..params import NS_PER_S, Scenario, to_ns, validate_scenario
from .events import PRIO_ARRIVAL, PRIO_CONTROL, EventQueue
from .stats import SimStats
from .streams import ARRIVALS, NEVER, PoissonArrivals, substream

# event kinds
ARRIVAL = 1
STOP = 2
SAMPLE = 3

WARMUP_FRACTION = 0.05
BACKLOG_SAMPLES = 200
UNBOUNDED = 1 << 62
_INF_HIST = 64  # histogram cap for infinite buffers


class Cell:
    """M FIFO queues fed by Poisson sources, with real-time accounting.

    Subclasses add the channel access rule by handling their own event
    kinds in :meth:`handle`.
    """

    engine = "base"

    def __init__(
        self,
        s: Scenario,
        seed: int,
        horizon: float,
        warmup_fraction: float = WARMUP_FRACTION,
        trace=None,
        attempt_hist: bool = False,
    ):
        validate_scenario(s)
        if horizon <= 0:
            raise ValueError("horizon must be positive")
        self.s = s
        self.m = s.m
        self.kcap = s.buffer if s.buffer is not None else UNBOUNDED
        self.hist_cap = s.buffer if s.buffer is not None else _INF_HIST
        sl = s.slots()
        self.sig, self.ts, self.tc = sl.sigma_ns, sl.t_s_ns, sl.t_c_ns
        self.H = to_ns(horizon)
        self.W = to_ns(horizon * warmup_fraction)
        self.eq = EventQueue()
        self.queues = [deque() for _ in range(self.m)]
        self.sources = [PoissonArrivals(lam, substream(seed, ARRIVALS, i)) for i, lam in enumerate(s.lambdas)]
        self.stats = SimStats.empty(
            self.engine, self.m, s.buffer, seed, horizon, horizon * warmup_fraction, attempt_hist
        )
        self.trace = trace
        # real-time busy periods per node and for the whole cell
        self.open = [False] * self.m
        self.busy_since = [0] * self.m
        self.last_dep = [0] * self.m
        self.nbusy = 0
        self.empty_since = 0

    # -- time-window helpers -------------------------------------------------

    def clip(self, a: int, b: int) -> float:
        """Seconds of [a, b] inside the measurement window."""
        lo = a if a > self.W else self.W
        hi = b if b < self.H else self.H
        return (hi - lo) / NS_PER_S if hi > lo else 0.0

    def log(self, t, kind, node):
        if self.trace is not None:
            self.trace.write(f"{t},{kind},{node},{self.nbusy}\n")

    # -- queue operations ----------------------------------------------------

    def accept(self, i: int, t: int) -> bool:
        st = self.stats
        counted = t >= self.W
        if counted:
            st.offered[i] += 1
        q = self.queues[i]
        if len(q) >= self.kcap:
            if counted:
                st.blocked[i] += 1
            self.log(t, "block", i)
            return False
        if counted:
            st.accepted[i] += 1
        if not self.open[i]:
            self.open[i] = True
            self.busy_since[i] = t
            if self.nbusy == 0:
                st.system_empty_time += self.clip(self.empty_since, t)
            self.nbusy += 1
        q.append(t)
        return True

    def depart(self, i: int, t: int, record_left: bool = True) -> None:
        """Remove the head packet of node i as a successful delivery."""
        a = self.queues[i].popleft()
        st = self.stats
        st.queue_area[i] += self.clip(a, t)
        if t >= self.W:
            st.successes[i] += 1
            st.delay_sum[i] += (t - a) / NS_PER_S
            start = a if a > self.last_dep[i] else self.last_dep[i]
            st.service_sum[i] += (t - start) / NS_PER_S
            if record_left:
                self.record_left_behind(i, t)
        self.last_dep[i] = t
        self.log(t, "depart", i)

    def record_left_behind(self, i: int, t: int) -> None:
        if t >= self.W:
            left = min(len(self.queues[i]), self.hist_cap)
            self.stats.departure_hist[i][left] += 1

    def drop(self, i: int, t: int) -> None:
        a = self.queues[i].popleft()
        self.stats.queue_area[i] += self.clip(a, t)
        if t >= self.W:
            self.stats.dropped[i] += 1
        self.last_dep[i] = t
        self.log(t, "drop", i)

    def settle(self, i: int, t: int) -> None:
        """Close node i's busy period if its queue is now empty."""
        if self.open[i] and not self.queues[i]:
            self.open[i] = False
            self.stats.busy_time[i] += self.clip(self.busy_since[i], t)
            self.nbusy -= 1
            if self.nbusy == 0:
                self.empty_since = t

    # -- driver --------------------------------------------------------------

    def next_arrival(self, i: int) -> None:
        t = self.sources[i].next()
        if t != NEVER and t <= self.H:
            self.eq.push(t, PRIO_ARRIVAL, ARRIVAL, i)

    def setup(self) -> None:
        """Engine-specific initial events."""

    def handle(self, kind: int, t: int, node: int) -> None:
        raise NotImplementedError

    def run(self) -> SimStats:
        eq = self.eq
        st = self.stats
        wall0 = time.perf_counter()
        for i in range(self.m):
            self.next_arrival(i)
        step = max(self.H // BACKLOG_SAMPLES, 1)
        eq.push(step, PRIO_CONTROL, SAMPLE)
        eq.push(self.H, PRIO_CONTROL, STOP)
        self.setup()
        events = 0
        while True:
            ev = eq.pop()
            t, kind, node = ev[0], ev[3], ev[4]
            events += 1
            if kind == ARRIVAL:
                self.next_arrival(node)
                self.on_arrival(node, t)
            elif kind == SAMPLE:
                st.backlog_t.append(t / NS_PER_S)
                st.backlog_v.append(sum(len(q) for q in self.queues))
                if t + step < self.H:
                    eq.push(t + step, PRIO_CONTROL, SAMPLE)
            elif kind == STOP:
                break
            else:
                self.handle(kind, t, node)
        self.finish()
        st.events = events
        st.wall_clock = time.perf_counter() - wall0
        return st

    def on_arrival(self, i: int, t: int) -> None:
        raise NotImplementedError

    def finish(self) -> None:
        st = self.stats
        for i, q in enumerate(self.queues):
            for a in q:
                st.queue_area[i] += self.clip(a, self.H)
            if self.open[i]:
                st.busy_time[i] += self.clip(self.busy_since[i], self.H)
        if self.nbusy == 0:
            st.system_empty_time += self.clip(self.empty_since, self.H)
