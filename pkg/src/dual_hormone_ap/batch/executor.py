"""Worker pool executor for parallel patient runs."""

from __future__ import annotations

import signal
import sys
from collections.abc import Callable
from concurrent.futures import Executor, Future, ProcessPoolExecutor, ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from threading import Event

from dual_hormone_ap.batch.job import PatientJob


@dataclass
class CompletionResult[T]:
    """Result of waiting for futures to complete.

    Attributes:
        results: List of successful results.
        errors: List of (job, exception) tuples for failed futures.
    """

    results: list[T] = field(default_factory=list)
    errors: list[tuple[PatientJob | None, Exception]] = field(default_factory=list)

    @property
    def success_count(self) -> int:
        """Number of successful results."""
        return len(self.results)


# Set by SIGINT/SIGTERM; new jobs are not submitted once set.
shutdown_event = Event()

_handlers_installed = False


def _signal_handler(_signum: int, _frame: object) -> None:
    shutdown_event.set()


def install_signal_handlers() -> None:
    """Install SIGINT/SIGTERM handlers once; a no-op off the main thread."""
    global _handlers_installed
    if _handlers_installed:
        return

    try:
        signal.signal(signal.SIGINT, _signal_handler)
        if sys.platform != "win32":
            signal.signal(signal.SIGTERM, _signal_handler)
        _handlers_installed = True
    except ValueError:
        pass


def is_shutdown_requested() -> bool:
    """Check if shutdown has been requested."""
    return shutdown_event.is_set()


def reset_shutdown() -> None:
    """Clear a previous shutdown request."""
    shutdown_event.clear()


@dataclass
class WorkerPool[T]:
    """Process or thread pool running one patient per task.

    Processes give real parallelism for the numerical work; submitted
    callables and their arguments must then be picklable.

    Attributes:
        max_workers: Maximum number of concurrent workers.
        use_processes: Use a process pool instead of threads.
    """

    max_workers: int
    use_processes: bool = True
    _executor: Executor | None = field(default=None, init=False, repr=False)
    _jobs: dict[Future[T], PatientJob] = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self) -> None:
        """Validate the worker count."""
        if self.max_workers < 1:
            raise ValueError(f"max_workers must be >= 1, got {self.max_workers}")

    def __enter__(self) -> WorkerPool[T]:
        """Start the executor."""
        install_signal_handlers()
        pool_cls = ProcessPoolExecutor if self.use_processes else ThreadPoolExecutor
        self._executor = pool_cls(max_workers=self.max_workers)
        return self

    def __exit__(self, exc_type: type | None, exc_val: Exception | None, exc_tb: object) -> None:
        """Shut the executor down, dropping queued work."""
        if self._executor:
            self._executor.shutdown(wait=True, cancel_futures=True)
            self._executor = None

    def submit(self, fn: Callable[..., T], *args: object, **kwargs: object) -> Future[T] | None:
        """Submit a task.

        Returns:
            Future for the task, or None if shutdown was requested.
        """
        if is_shutdown_requested():
            return None

        if self._executor is None:
            raise RuntimeError("WorkerPool must be used as context manager")

        return self._executor.submit(fn, *args, **kwargs)

    def submit_job(self, job: PatientJob, fn: Callable[..., T], *args: object) -> Future[T] | None:
        """Submit ``fn(*args)`` for a patient job; the future is tagged with ``job``."""
        future = self.submit(fn, *args)
        if future is not None:
            self._jobs[future] = job
        return future

    def job_for(self, future: Future[T]) -> PatientJob | None:
        """Job a future was submitted for, if any."""
        return self._jobs.get(future)

    def wait_for_completion(
        self,
        futures: list[Future[T]],
        callback: Callable[[Future[T], PatientJob | None], None] | None = None,
    ) -> CompletionResult[T]:
        """Wait for futures and collect their results.

        Args:
            futures: Futures to wait for.
            callback: Called as ``(future, job)`` when each one finishes.

        Returns:
            Successful results and any errors, in completion order.
        """
        completion = CompletionResult[T]()

        for future in as_completed(futures):
            job = self.job_for(future)

            if callback:
                callback(future, job)

            try:
                completion.results.append(future.result())
            except Exception as e:
                completion.errors.append((job, e))

        return completion

    def shutdown(self) -> None:
        """Request graceful shutdown of the worker pool."""
        shutdown_event.set()
        if self._executor:
            self._executor.shutdown(wait=False, cancel_futures=True)
