"""Event-exact SRPT simulation.

A run is driven by an :class:`ArrivalStream` (arrival times and sizes drawn
up-front from one seed), so truncated runs and intertwined pairs can share
randomness by filtering the same stream instead of redrawing it.
"""

from __future__ import annotations

import csv
import heapq
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

from .dists import ArrivalSpec, ServiceDist

ARRIVAL, PREEMPTION, COMPLETION, IDLE_START, INITIAL = 0, 1, 2, 3, 4
KIND_NAMES = {ARRIVAL: "arrival", PREEMPTION: "preemption", COMPLETION: "completion",
              IDLE_START: "idle-start", INITIAL: "initial"}
KIND_CODES = {v: k for k, v in KIND_NAMES.items()}


@dataclass(frozen=True)
class Job:
    id: int
    arrival_time: float
    initial_size: float
    origin: str = "external"

    def __post_init__(self):
        if not self.initial_size > 0:
            raise ValueError(f"job {self.id}: size must be positive")


@dataclass(frozen=True)
class QueueState:
    """Remaining sizes at one instant, ordered by (size, id)."""

    time: float
    remaining: tuple = ()

    @property
    def sizes(self) -> np.ndarray:
        return np.array([s for s, _ in self.remaining], dtype=float)

    @property
    def ids(self) -> list[int]:
        return [i for _, i in self.remaining]

    def __len__(self):
        return len(self.remaining)

    @classmethod
    def from_sizes(cls, sizes: Iterable[float], time: float = 0.0) -> "QueueState":
        items = sorted((float(s), -(k + 1)) for k, s in enumerate(sizes))
        return cls(time, tuple(items))


@dataclass(frozen=True)
class ArrivalStream:
    """External arrivals on [0, horizon]; job ``j`` (1-based) arrives at ``times[j-1]``."""

    times: np.ndarray
    sizes: np.ndarray

    def __post_init__(self):
        if len(self.times) != len(self.sizes):
            raise ValueError("times and sizes differ in length")
        if len(self.times) and np.any(np.diff(self.times) < 0):
            raise ValueError("arrival times must be nondecreasing")

    @classmethod
    def from_pairs(cls, pairs: Sequence[tuple[float, float]]) -> "ArrivalStream":
        t = np.array([p[0] for p in pairs], dtype=float)
        v = np.array([p[1] for p in pairs], dtype=float)
        return cls(t, v)

    @classmethod
    def empty(cls) -> "ArrivalStream":
        return cls(np.empty(0), np.empty(0))

    def __len__(self):
        return len(self.times)


def _child_rngs(seed, n: int) -> list[np.random.Generator]:
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return [np.random.default_rng(s) for s in ss.spawn(n)]


def draw_stream(arrivals: ArrivalSpec, service: ServiceDist, lambda_r: float | None,
                horizon: float, seed) -> ArrivalStream:
    """Pre-generate the (arrival time, size) stream up to ``horizon``.

    Gaps and sizes come from separate child streams so the i-th size does not
    depend on how many gaps were needed.
    """
    spec = arrivals.at_rate(lambda_r) if lambda_r is not None else arrivals
    gap_rng, size_rng = _child_rngs(seed, 2)
    first = spec.first_gap().sample(gap_rng, 1)
    chunk = max(16, int(1.2 * horizon / spec.inter_arrival.mean) + 16)
    pieces = [first]
    total = float(first[0])
    while total <= horizon:
        g = spec.inter_arrival.sample(gap_rng, chunk)
        pieces.append(g)
        total += float(g.sum())
    times = np.cumsum(np.concatenate(pieces))
    times = times[times <= horizon]
    sizes = service.sample(size_rng, len(times))
    return ArrivalStream(times, sizes)


@dataclass
class Trajectory:
    """Event log of one SRPT run.

    Columns: event time, kind code, job id, size delta (arrival size, 0
    otherwise), and queue length / workload right after the event.
    """

    times: np.ndarray
    kinds: np.ndarray
    job_ids: np.ndarray
    size_deltas: np.ndarray
    queue_len: np.ndarray
    workload: np.ndarray
    horizon: float
    threshold: float = math.inf
    seed: object = None
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.times)

    @property
    def n_events(self) -> int:
        return len(self.times)

    def events(self) -> Iterator[tuple[float, str, int, float]]:
        for t, k, j, d in zip(self.times, self.kinds, self.job_ids, self.size_deltas):
            yield float(t), KIND_NAMES[int(k)], int(j), float(d)

    def admitted(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(times, sizes, ids) of every job that entered, initial jobs first."""
        mask = (self.kinds == ARRIVAL) | (self.kinds == INITIAL)
        return self.times[mask], self.size_deltas[mask], self.job_ids[mask]

    def initial_work(self) -> float:
        return float(self.size_deltas[self.kinds == INITIAL].sum())

    def queue_length_path(self) -> tuple[np.ndarray, np.ndarray]:
        """Right-continuous step function (jump times, values); starts at time 0."""
        t = np.concatenate([[0.0], self.times])
        q = np.concatenate([[0], self.queue_len])
        # collapse simultaneous events, keeping the last value
        keep = np.concatenate([t[1:] != t[:-1], [True]])
        return t[keep], q[keep]

    def queue_length_at(self, t) -> np.ndarray:
        jt, jq = self.queue_length_path()
        idx = np.searchsorted(jt, t, side="right") - 1
        return jq[np.maximum(idx, 0)]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["# horizon", repr(float(self.horizon)), "threshold", repr(float(self.threshold))])
            w.writerow(["time", "kind", "job_id", "size_delta", "queue_len", "workload"])
            for i in range(len(self.times)):
                w.writerow([repr(float(self.times[i])), KIND_NAMES[int(self.kinds[i])],
                            int(self.job_ids[i]), repr(float(self.size_deltas[i])),
                            int(self.queue_len[i]), repr(float(self.workload[i]))])

    @classmethod
    def from_csv(cls, path) -> "Trajectory":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        head = rows[0]
        horizon, threshold = float(head[1]), float(head[3])
        body = rows[2:]
        return cls(
            times=np.array([float(r[0]) for r in body]),
            kinds=np.array([KIND_CODES[r[1]] for r in body], dtype=np.int8),
            job_ids=np.array([int(r[2]) for r in body], dtype=np.int64),
            size_deltas=np.array([float(r[3]) for r in body]),
            queue_len=np.array([int(r[4]) for r in body], dtype=np.int64),
            workload=np.array([float(r[5]) for r in body]),
            horizon=horizon, threshold=threshold,
        )


def run_srpt(initial: Sequence[Job], stream: ArrivalStream, horizon: float,
             threshold: float = math.inf, seed=None, meta: dict | None = None) -> Trajectory:
    """Simulate SRPT on a fixed stream, admitting only jobs with size <= threshold.

    Completions precede arrivals at equal times; equal remaining sizes are
    served in id order. Jobs still present at ``horizon`` are left in the
    system (no completion is logged for them).
    """
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    T, K, J, D, Q, W = [], [], [], [], [], []
    heap: list[list] = []  # entries [remaining, id]; heap[0] is in service
    work = 0.0

    def log(t, kind, jid, delta):
        T.append(t); K.append(kind); J.append(jid); D.append(delta)
        Q.append(len(heap)); W.append(work)

    for job in sorted(initial, key=lambda j: j.id):
        if job.initial_size <= threshold:
            heapq.heappush(heap, [job.initial_size, job.id])
            work += job.initial_size
            log(0.0, INITIAL, job.id, job.initial_size)

    times, sizes = stream.times, stream.sizes
    n = len(times)
    i = 0
    # skip jobs the truncation rejects
    while i < n and sizes[i] > threshold:
        i += 1
    t = 0.0
    while True:
        t_arr = times[i] if i < n else math.inf
        if heap:
            t_done = t + heap[0][0]
            if t_done <= t_arr:
                if t_done > horizon:
                    break
                rem, jid = heapq.heappop(heap)
                work = max(work - rem, 0.0) if heap else 0.0
                t = t_done
                log(t, COMPLETION, jid, 0.0)
                if not heap:
                    log(t, IDLE_START, jid, 0.0)
                continue
        if t_arr > horizon:
            break
        v = float(sizes[i])
        jid = i + 1
        preempted = None
        if heap:
            heap[0][0] -= t_arr - t
            if v < heap[0][0]:
                preempted = heap[0][1]
        work = max(work - (t_arr - t), 0.0) + v if heap else v
        t = float(t_arr)
        heapq.heappush(heap, [v, jid])
        log(t, ARRIVAL, jid, v)
        if preempted is not None:
            log(t, PREEMPTION, preempted, 0.0)
        i += 1
        while i < n and sizes[i] > threshold:
            i += 1

    return Trajectory(
        times=np.array(T, dtype=float), kinds=np.array(K, dtype=np.int8),
        job_ids=np.array(J, dtype=np.int64), size_deltas=np.array(D, dtype=float),
        queue_len=np.array(Q, dtype=np.int64), workload=np.array(W, dtype=float),
        horizon=float(horizon), threshold=float(threshold), seed=seed, meta=dict(meta or {}),
    )


def simulate_srpt(arrivals: ArrivalSpec, service: ServiceDist, lambda_r: float | None,
                  initial: Sequence[Job], horizon: float, seed,
                  stream: ArrivalStream | None = None) -> Trajectory:
    """One SRPT trajectory on [0, horizon]; ``stream`` overrides the random draw."""
    if stream is None:
        stream = draw_stream(arrivals, service, lambda_r, horizon, seed)
    return run_srpt(initial, stream, horizon, seed=seed)


def iter_states(traj: Trajectory, times: Iterable[float], side: str = "right") -> Iterator[QueueState]:
    """Replay the log once, yielding the state at each (sorted) query time.

    ``side="right"`` includes events at the query time, ``"left"`` gives the
    left limit.
    """
    heap: list[list] = []
    k, n = 0, len(traj.times)
    ev_t, ev_k, ev_j, ev_d = traj.times, traj.kinds, traj.job_ids, traj.size_deltas
    clock = 0.0
    last_q = -math.inf
    for q in times:
        if q < last_q:
            raise ValueError("query times must be sorted")
        last_q = q
        while k < n and (ev_t[k] <= q if side == "right" else ev_t[k] < q):
            te = float(ev_t[k])
            if heap:
                heap[0][0] -= te - clock
            clock = te
            kind = ev_k[k]
            if kind == ARRIVAL or kind == INITIAL:
                heapq.heappush(heap, [float(ev_d[k]), int(ev_j[k])])
            elif kind == COMPLETION:
                # the served job is the heap minimum
                if heap and heap[0][1] == ev_j[k]:
                    heapq.heappop(heap)
                else:
                    heap = [e for e in heap if e[1] != ev_j[k]]
                    heapq.heapify(heap)
            k += 1
        items = sorted((e[0], e[1]) for e in heap)
        if items:
            s0, j0 = items[0]
            items[0] = (s0 - (q - clock), j0)
            if items[0][0] <= 0:
                items.pop(0)
        yield QueueState(float(q), tuple(items))


def state_at(traj: Trajectory, t: float) -> QueueState:
    if not 0 <= t <= traj.horizon:
        raise ValueError(f"t={t} outside [0, {traj.horizon}]")
    return next(iter_states(traj, [t]))


def coupled_truncated_runs(initial: Sequence[Job], stream: ArrivalStream, horizon: float,
                           thresholds: Sequence[float], seed=None) -> list[Trajectory]:
    """Runs that see the same stream, each admitting sizes <= its threshold."""
    if list(thresholds) != sorted(thresholds):
        raise ValueError("thresholds must be ascending")
    return [run_srpt(initial, stream, horizon, threshold=y, seed=seed) for y in thresholds]


# ---------------------------------------------------------------- initial jobs

@dataclass(frozen=True)
class SizeLaw:
    """Law of a scaled initial size: constant, uniform(lo, hi) or exponential(mean)."""

    kind: str = "constant"
    value: float = 1.0
    lo: float = 0.0
    hi: float = 1.0
    mean_: float = 1.0

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.kind == "constant":
            return np.full(n, float(self.value))
        if self.kind == "uniform":
            return rng.uniform(self.lo, self.hi, n)
        if self.kind == "exponential":
            return rng.exponential(self.mean_, n)
        raise ValueError(f"unknown size law {self.kind!r}")

    def truncated_mean(self, a: float) -> float:
        """``E[v 1{v <= a}]``."""
        if self.kind == "constant":
            return self.value if self.value <= a else 0.0
        if self.kind == "uniform":
            x = min(max(a, self.lo), self.hi)
            return (x * x - self.lo * self.lo) / (2.0 * (self.hi - self.lo))
        if self.kind == "exponential":
            if math.isinf(a):
                return self.mean_
            m = self.mean_
            return m - (a + m) * math.exp(-a / m)
        raise ValueError(f"unknown size law {self.kind!r}")

    @property
    def mean(self) -> float:
        return self.truncated_mean(math.inf)


@dataclass(frozen=True)
class InitialConditionSpec:
    """Either an empty start or ``q_r`` i.i.d. jobs of raw size ``c_r * v``.

    ``count_mode`` "floor" uses ``q_r = floor(q_star r / c_r)``, "poisson" draws
    it. ``eta_star``, ``alpha_star``, ``a_star`` are carried as metadata only.
    """

    kind: str = "empty"
    q_star: float = 0.0
    size_law: SizeLaw = field(default_factory=SizeLaw)
    count_mode: str = "floor"
    eta_star: float | None = None
    alpha_star: float | None = None
    a_star: float | None = None


def generate_initial(spec: InitialConditionSpec, r: float, c_r: float, seed) -> list[Job]:
    if spec.kind == "empty":
        return []
    if spec.kind != "iid":
        raise ValueError(f"unknown initial condition kind {spec.kind!r}")
    count_rng, size_rng = _child_rngs(seed, 2)
    target = spec.q_star * r / c_r
    if spec.count_mode == "floor":
        q = int(math.floor(target))
    elif spec.count_mode == "poisson":
        q = int(count_rng.poisson(target))
    else:
        raise ValueError(f"unknown count mode {spec.count_mode!r}")
    sizes = c_r * spec.size_law.sample(size_rng, q)
    return [Job(-(l + 1), 0.0, float(s), "initial") for l, s in enumerate(sizes)]


def jobs_from_sizes(sizes: Iterable[float]) -> list[Job]:
    return [Job(-(l + 1), 0.0, float(s), "initial") for l, s in enumerate(sizes)]


# ---------------------------------------------------------------- intertwining

def is_intertwined(s1, s2, tol: float = 0.0) -> tuple[int, int] | None:
    """Return (k, l) if ``s2`` is intertwined in ``s1``, else None.

    Accepts QueueStates or plain size iterables. ``tol`` is the slack used
    for the equal prefix and the strict interleaving.
    """
    v1 = np.cumsum(np.sort(_sizes(s1)))
    v2 = np.cumsum(np.sort(_sizes(s2)))
    n1, n2 = len(v1), len(v2)
    k = 0
    while k < min(n1, n2) and abs(v1[k] - v2[k]) <= tol:
        k += 1
    l = n2 - k
    if l < 1 or n1 not in (k + l - 1, k + l):
        return None
    V1 = np.concatenate([[0.0], v1, [math.inf] if n1 == k + l - 1 else []])
    V2 = np.concatenate([[0.0], v2])
    for j in range(1, l + 1):
        lo, mid, hi = V1[k + j - 1], V2[k + j], V1[k + j]
        if not (mid - lo > tol and hi - mid > tol):
            return None
    return k, l


def _sizes(s) -> np.ndarray:
    if isinstance(s, QueueState):
        return s.sizes
    return np.asarray(list(s), dtype=float)


@dataclass
class PairPath:
    """Queue lengths of two coupled systems at every event time of either."""

    times: np.ndarray
    q1: np.ndarray
    q2: np.ndarray
    runs: tuple


def intertwined_pair_sim(arrivals: ArrivalSpec | None, service: ServiceDist | None,
                         lambda_r: float | None, init1: Sequence[float], init2: Sequence[float],
                         horizon: float, seed, stream: ArrivalStream | None = None,
                         tol: float = 0.0) -> PairPath:
    """Feed two SRPT systems the same arrivals from intertwined starts.

    Requires system 2 intertwined in system 1 at time 0 and one extra job.
    """
    if len(init2) != len(init1) + 1 or is_intertwined(init1, init2, tol) is None:
        raise ValueError("initial states are not intertwined with Q2(0) = Q1(0) + 1")
    if stream is None:
        stream = draw_stream(arrivals, service, lambda_r, horizon, seed)
    run1 = run_srpt(jobs_from_sizes(init1), stream, horizon, seed=seed)
    run2 = run_srpt(jobs_from_sizes(init2), stream, horizon, seed=seed)
    t = np.unique(np.concatenate([[0.0], run1.times, run2.times]))
    return PairPath(t, run1.queue_length_at(t), run2.queue_length_at(t), (run1, run2))
