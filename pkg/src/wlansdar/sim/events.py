"""Integer-nanosecond event list with lazy cancellation."""

import heapq
import itertools

# ordering at equal timestamps: channel events first, then arrivals, so an
# arrival that lands exactly on an epoch belongs to the following slot
PRIO_MAC = 0
PRIO_ARRIVAL = 1
PRIO_CONTROL = 2

CANCELLED = -1


class EventQueue:
    """Min-heap of ``[time_ns, prio, seq, kind, node]`` entries.

    Entries are lists so they can be cancelled in place; a cancelled
    entry keeps its slot in the heap and is skipped when popped.
    """

    __slots__ = ("_heap", "_seq", "now")

    def __init__(self):
        self._heap = []
        self._seq = itertools.count()
        self.now = 0

    def __len__(self):
        return len(self._heap)

    def push(self, time_ns, prio, kind, node=-1):
        if time_ns < self.now:
            raise ValueError(f"event at {time_ns} ns scheduled in the past (now {self.now})")
        entry = [time_ns, prio, next(self._seq), kind, node]
        heapq.heappush(self._heap, entry)
        return entry

    @staticmethod
    def cancel(entry):
        entry[3] = CANCELLED

    def pop(self):
        heap = self._heap
        while heap:
            entry = heapq.heappop(heap)
            if entry[3] != CANCELLED:
                self.now = entry[0]
                return entry
        return None

    def peek(self):
        """Next live entry without removing it (drops cancelled heads)."""
        heap = self._heap
        while heap and heap[0][3] == CANCELLED:
            heapq.heappop(heap)
        return heap[0] if heap else None
