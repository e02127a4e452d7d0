"""Compute substrate model: cores, fixed-priority FIFO scheduling and
per-core memory-bandwidth budgets.

Four cores run registered tasks under preemptive fixed-priority FIFO
(higher number first, FIFO within a priority). A job consists of a
memory phase (mem_demand accesses served by the shared memory
controller) followed by a CPU burst (cpu_work seconds); the core makes
no CPU progress while its running job waits on memory or while the
core is bandwidth-throttled.

The shared memory controller serves at service_rate accesses per
second, split equally (round-robin in the fluid limit) across cores
whose running job currently demands memory. With the bandwidth
governor enabled, each core also has an access budget per regulation
period; a core that exhausts its budget is stalled until the budget is
replenished at the next period boundary.

The model is event-driven rather than tick-driven: between state
changes service rates are constant, so the next interesting instant
(a memory phase completing, a budget exhausting, a period boundary)
is computed analytically and scheduled as a single event.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from .kernel import Engine, EventHandle, TICKS_PER_SECOND, ticks_from_s

_EPS = 1e-6


@dataclass
class TaskSpec:
    name: str
    core: int
    priority: int
    period_s: float = 0.0       # 0 = event-triggered
    cpu_work_s: float = 0.0     # pure compute per job
    mem_demand: float = 0.0     # memory accesses per job

    def validate(self, n_cores: int) -> None:
        if not 0 <= self.core < n_cores:
            raise ValueError(f"task {self.name}: core {self.core} out of range")
        if self.cpu_work_s < 0 or self.mem_demand < 0 or self.period_s < 0:
            raise ValueError(f"task {self.name}: work figures must be non-negative")


@dataclass
class MemGuardConfig:
    enabled: bool = False
    period_s: float = 1e-3
    budget_per_core: tuple[float, ...] = (0.0, 0.0, 0.0, 0.0)  # 0 = unlimited

    def validate(self, n_cores: int) -> None:
        if self.period_s <= 0:
            raise ValueError("memguard period must be positive")
        if len(self.budget_per_core) != n_cores:
            raise ValueError(f"budget_per_core needs {n_cores} entries")
        if any(b < 0 for b in self.budget_per_core):
            raise ValueError("budgets must be non-negative")

    def budget(self, core: int) -> float | None:
        b = self.budget_per_core[core]
        return None if b == 0 else b


@dataclass
class JobRecord:
    task: str
    core: int
    priority: int
    submit_tick: int
    start_tick: int | None = None
    complete_tick: int | None = None
    run_intervals: list[tuple[int, int]] = field(default_factory=list)

    @property
    def response_ticks(self) -> int | None:
        if self.complete_tick is None:
            return None
        return self.complete_tick - self.submit_tick


class Job:
    __slots__ = (
        "task", "seq", "submit_tick", "remaining_cpu", "remaining_mem",
        "payload", "record", "started", "mem_done", "cpu_event",
        "cpu_started_at", "run_started_at",
    )

    def __init__(self, task: "Task", seq: int, submit_tick: int, payload):
        self.task = task
        self.seq = seq
        self.submit_tick = submit_tick
        self.remaining_cpu = ticks_from_s(task.spec.cpu_work_s)
        self.remaining_mem = float(task.spec.mem_demand)
        self.payload = payload
        self.record = JobRecord(
            task.spec.name, task.spec.core, task.spec.priority, submit_tick
        )
        self.started = False
        self.mem_done = self.remaining_mem <= _EPS
        self.cpu_event: EventHandle | None = None
        self.cpu_started_at: int | None = None
        self.run_started_at: int | None = None


class Task:
    def __init__(self, spec: TaskSpec, on_complete, overrun: str):
        if overrun not in ("queue", "skip"):
            raise ValueError("overrun policy must be 'queue' or 'skip'")
        self.spec = spec
        self.on_complete = on_complete
        self.overrun = overrun
        self.outstanding = 0
        self.skipped = 0
        self.stop_periodic: Callable[[], None] | None = None


class CoreState:
    def __init__(self, index: int):
        self.index = index
        self.ready: list[Job] = []  # sorted on demand by (-priority, seq)
        self.running: Job | None = None
        self.throttled = False
        self.used_this_period = 0.0


class UnknownTaskError(KeyError):
    pass


class IncompleteJobError(RuntimeError):
    pass


class Governor:
    """Owns cores, tasks and the shared memory controller on one engine."""

    def __init__(
        self,
        engine: Engine,
        memguard: MemGuardConfig,
        service_rate: float = 1e7,
        n_cores: int = 4,
        record_periods: bool = False,
    ):
        memguard.validate(n_cores)
        if service_rate <= 0:
            raise ValueError("service_rate must be positive")
        self.engine = engine
        self.memguard = memguard
        self.service_rate = service_rate
        self.n_cores = n_cores
        self.cores = [CoreState(i) for i in range(n_cores)]
        self.tasks: dict[str, Task] = {}
        self.job_records: list[JobRecord] = []
        self._job_seq = 0
        self._last_accrual = 0
        self._transition: EventHandle | None = None
        self._period_index = 0
        # memory accounting for trace assertions
        self.record_periods = record_periods
        self.period_log: list[tuple[int, tuple[float, ...]]] = []
        self.max_served_per_period = [0.0] * n_cores
        self.budget_violations = 0
        self._budgets: list[float | None] = [
            memguard.budget(i) if memguard.enabled else None
            for i in range(n_cores)
        ]
        if memguard.enabled:
            period = ticks_from_s(memguard.period_s)
            engine.every(period, self._period_boundary, start=period)

    # -- task registry -------------------------------------------------

    def register_task(self, spec: TaskSpec, on_complete=None, overrun: str = "queue") -> Task:
        spec.validate(self.n_cores)
        if spec.name in self.tasks:
            raise ValueError(f"task {spec.name} already registered")
        task = Task(spec, on_complete, overrun)
        self.tasks[spec.name] = task
        return task

    def activate_periodic(
        self,
        name: str,
        start_tick: int = 0,
        until_tick: int | None = None,
        payload_fn: Callable[[], object] | None = None,
    ) -> None:
        """Submit a job every spec.period_s over [start, until]."""
        task = self._task(name)
        if task.spec.period_s <= 0:
            raise ValueError(f"task {name} is event-triggered, not periodic")
        period = ticks_from_s(task.spec.period_s)

        def fire():
            payload = payload_fn() if payload_fn else None
            self.submit_job(name, payload)

        task.stop_periodic = self.engine.every(
            period, fire, start=start_tick, until=until_tick
        )

    def deactivate(self, name: str) -> None:
        task = self._task(name)
        if task.stop_periodic is not None:
            task.stop_periodic()
            task.stop_periodic = None

    def _task(self, name: str) -> Task:
        try:
            return self.tasks[name]
        except KeyError:
            raise UnknownTaskError(name) from None

    # -- job lifecycle ---------------------------------------------------

    def submit_job(self, name: str, payload=None) -> Job | None:
        """Queue one job. Under the 'skip' overrun policy a submission
        while a previous job of the task is still outstanding is dropped
        and counted instead of queued."""
        task = self._task(name)
        if task.overrun == "skip" and task.outstanding > 0:
            task.skipped += 1
            return None
        self._sync_memory()
        job = Job(task, self._job_seq, self.engine.now, payload)
        self._job_seq += 1
        task.outstanding += 1
        self.job_records.append(job.record)
        core = self.cores[task.spec.core]
        self._enqueue(core, job)
        self._dispatch(core)
        self._reschedule_transition()
        return job

    def response_time(self, job: Job) -> float:
        if job.record.complete_tick is None:
            raise IncompleteJobError(f"job of {job.task.spec.name} not complete")
        return job.record.response_ticks / TICKS_PER_SECOND

    # -- scheduling ------------------------------------------------------

    @staticmethod
    def _key(job: Job):
        return (-job.task.spec.priority, job.seq)

    def _enqueue(self, core: CoreState, job: Job) -> None:
        core.ready.append(job)
        core.ready.sort(key=self._key)

    def _dispatch(self, core: CoreState) -> None:
        if not core.ready:
            return
        head = core.ready[0]
        if core.running is None:
            core.ready.pop(0)
            self._start(core, head)
        elif head.task.spec.priority > core.running.task.spec.priority:
            self._preempt(core)
            core.ready.pop(0)
            self._start(core, head)

    def _start(self, core: CoreState, job: Job) -> None:
        core.running = job
        job.run_started_at = self.engine.now
        if not job.started:
            job.started = True
            job.record.start_tick = self.engine.now
        if job.mem_done:
            self._start_cpu(core, job)
        # else: memory demand becomes visible via the share map

    def _start_cpu(self, core: CoreState, job: Job) -> None:
        if core.throttled:
            return  # resumes at the period boundary
        if job.remaining_cpu <= 0:
            self._complete(core, job)
            return
        job.cpu_started_at = self.engine.now
        job.cpu_event = self.engine.schedule_in(
            job.remaining_cpu, lambda: self._complete(core, job)
        )

    def _pause_cpu(self, job: Job) -> None:
        if job.cpu_event is not None:
            elapsed = self.engine.now - job.cpu_started_at
            job.remaining_cpu -= elapsed
            self.engine.cancel(job.cpu_event)
            job.cpu_event = None
            job.cpu_started_at = None

    def _preempt(self, core: CoreState) -> None:
        job = core.running
        self._pause_cpu(job)
        job.record.run_intervals.append((job.run_started_at, self.engine.now))
        job.run_started_at = None
        core.running = None
        self._enqueue(core, job)

    def _complete(self, core: CoreState, job: Job) -> None:
        self._sync_memory()
        job.cpu_event = None
        job.record.run_intervals.append((job.run_started_at, self.engine.now))
        job.record.complete_tick = self.engine.now
        job.task.outstanding -= 1
        core.running = None
        if job.task.on_complete is not None:
            job.task.on_complete(job)
        self._dispatch(core)
        self._reschedule_transition()

    # -- memory controller -----------------------------------------------

    def _demand_map(self) -> list[tuple[int, Job]]:
        """Cores whose running job is in its memory phase and may be served."""
        out = []
        for core in self.cores:
            job = core.running
            if (job is not None and not job.mem_done
                    and job.remaining_mem > 0.0 and not core.throttled):
                out.append((core.index, job))
        return out

    def _sync_memory(self) -> None:
        """Serve memory fluid-fashion from the last accrual instant to now,
        then apply any phase or throttle changes that became due."""
        now = self.engine.now
        if now > self._last_accrual:
            remaining = now - self._last_accrual
            while remaining > 0:
                demand = self._demand_map()
                if not demand:
                    break
                share = self.service_rate / len(demand) / TICKS_PER_SECOND
                # longest stretch with this share map
                stretch = remaining
                for idx, job in demand:
                    stretch = min(stretch, job.remaining_mem / share)
                    budget = self._budgets[idx]
                    if budget is not None:
                        left = budget - self.cores[idx].used_this_period
                        stretch = min(stretch, left / share)
                stretch_ticks = max(1, int(stretch)) if stretch < remaining else remaining
                for idx, job in demand:
                    budget = self._budgets[idx]
                    core = self.cores[idx]
                    served = share * stretch_ticks
                    served = min(served, job.remaining_mem)
                    if budget is not None:
                        served = min(served, budget - core.used_this_period)
                    served = max(served, 0.0)
                    job.remaining_mem -= served
                    core.used_this_period += served
                    if job.remaining_mem <= _EPS:
                        job.remaining_mem = 0.0
                    if budget is not None and core.used_this_period >= budget - _EPS:
                        core.used_this_period = min(core.used_this_period, budget)
                        self._throttle(core)
                remaining -= stretch_ticks
            self._last_accrual = now
        for core in self.cores:
            job = core.running
            if job is not None and not job.mem_done and job.remaining_mem <= 0.0:
                job.mem_done = True
                self._start_cpu(core, job)

    def _throttle(self, core: CoreState) -> None:
        if core.throttled:
            return
        core.throttled = True
        job = core.running
        if job is not None and job.mem_done:
            self._pause_cpu(job)

    def _period_boundary(self) -> None:
        self._sync_memory()
        if all(c.used_this_period == 0.0 for c in self.cores):
            self._period_index += 1
            return
        served = tuple(c.used_this_period for c in self.cores)
        for i, s in enumerate(served):
            budget = self._budgets[i]
            if s > self.max_served_per_period[i]:
                self.max_served_per_period[i] = s
            if budget is not None and s > budget + _EPS:
                self.budget_violations += 1
        if self.record_periods:
            self.period_log.append((self._period_index, served))
        self._period_index += 1
        for core in self.cores:
            core.used_this_period = 0.0
            if core.throttled:
                core.throttled = False
                job = core.running
                if job is not None and job.mem_done and job.cpu_event is None:
                    self._start_cpu(core, job)
        self._reschedule_transition()

    def _reschedule_transition(self) -> None:
        """Schedule the next analytically-known memory event: a running
        job finishing its memory phase or a core hitting its budget."""
        if self._transition is not None:
            self.engine.cancel(self._transition)
            self._transition = None
        demand = self._demand_map()
        if not demand:
            return
        share = self.service_rate / len(demand) / TICKS_PER_SECOND
        horizon = None
        for idx, job in demand:
            t = job.remaining_mem / share
            budget = self._budgets[idx]
            if budget is not None:
                t = min(t, (budget - self.cores[idx].used_this_period) / share)
            horizon = t if horizon is None else min(horizon, t)
        ticks = max(1, -int(-horizon // 1))  # ceil
        self._transition = self.engine.schedule_in(ticks, self._on_transition)

    def _on_transition(self) -> None:
        self._transition = None
        self._sync_memory()
        self._reschedule_transition()

    def finalize_records(self) -> None:
        """Close the open run interval of any still-running job so the
        records are analyzable as a complete trace."""
        for core in self.cores:
            job = core.running
            if job is not None and job.run_started_at is not None:
                job.record.run_intervals.append((job.run_started_at, self.engine.now))
                job.run_started_at = None
