"""Job runner for independent replication jobs, sequential or in a process pool."""
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, asdict
from typing import Any, Callable, Sequence

logger = logging.getLogger(__name__)


@dataclass
class JobRecord:
    index: int
    status: str = "Pending"
    seconds: float = 0.0
    error_message: str | None = None


def _timed_call(fn: Callable, args: tuple) -> tuple[Any, float]:
    started = time.perf_counter()
    result = fn(*args)
    return result, time.perf_counter() - started


class JobRunner:
    """Runs ``fn(*args)`` for every argument tuple and returns results in submission order."""

    def __init__(self, jobs: int = 1):
        self.jobs = max(1, int(jobs))
        self.records: list[JobRecord] = []

    def run(self, fn: Callable, arg_list: Sequence[tuple]) -> list[Any]:
        self.records = [JobRecord(i) for i in range(len(arg_list))]
        if self.jobs == 1 or len(arg_list) <= 1:
            return [self._run_one(i, fn, args) for i, args in enumerate(arg_list)]

        logger.info("Dispatching %s jobs to %s worker processes", len(arg_list), self.jobs)
        with ProcessPoolExecutor(max_workers=self.jobs) as pool:
            futures = [pool.submit(_timed_call, fn, args) for args in arg_list]
            results = []
            for i, future in enumerate(futures):
                record = self.records[i]
                record.status = "Running"
                try:
                    result, seconds = future.result()
                except Exception as e:
                    record.status = "Failed"
                    record.error_message = str(e)
                    logger.error("Job %s failed: %s", i, e)
                    raise
                record.status, record.seconds = "Completed", seconds
                results.append(result)
        return results

    def _run_one(self, i: int, fn: Callable, args: tuple) -> Any:
        record = self.records[i]
        record.status = "Running"
        try:
            result, seconds = _timed_call(fn, args)
        except Exception as e:
            record.status = "Failed"
            record.error_message = str(e)
            logger.error("Job %s failed: %s", i, e)
            raise
        record.status, record.seconds = "Completed", seconds
        logger.info("Job %s finished in %.1f s", i, seconds)
        return result

    def timing(self) -> list[dict]:
        return [asdict(r) for r in self.records]
