# src/utils/metrics.py
# Run bookkeeping for sweeps: row counters, phase timers and solver
# iteration histograms. Snapshots go into manifest metadata only.

import json
import threading
import time
from collections import defaultdict, deque
from contextlib import contextmanager
from typing import Dict, List, Optional

import numpy as np


class MetricsCollector:
    """Thread-safe counters, gauges, histograms and timers for one CLI run"""

    def __init__(self, run_name: str, max_history: int = 10_000):
        self.run_name = run_name
        self.max_history = max_history

        self.counters = defaultdict(int)
        self.gauges = defaultdict(float)
        self.histograms = defaultdict(lambda: deque(maxlen=max_history))
        self.timers = {}

        # worker threads report rows concurrently
        self.lock = threading.RLock()
        self.start_time = time.time()

    def increment(self, metric_name: str, value: int = 1):
        with self.lock:
            self.counters[metric_name] += value

    def set_gauge(self, metric_name: str, value: float):
        with self.lock:
            self.gauges[metric_name] = float(value)

    def record_value(self, metric_name: str, value: float):
        with self.lock:
            self.histograms[metric_name].append(float(value))

    def record_row(self, sweep: str, error: Optional[str]):
        """Count one emitted row and whether it was flagged"""
        self.increment(f"{sweep}_rows")
        if error:
            self.increment(f"{sweep}_rows_flagged")
            self.increment(f"{sweep}_error_{error.split(':', 1)[0]}")

    def start_timer(self, timer_name: str) -> str:
        timer_id = f"{timer_name}_{time.perf_counter()}_{threading.get_ident()}"
        with self.lock:
            self.timers[timer_id] = (timer_name, time.perf_counter())
        return timer_id

    def stop_timer(self, timer_id: str) -> Optional[float]:
        with self.lock:
            if timer_id not in self.timers:
                return None
            name, started = self.timers.pop(timer_id)
        duration = time.perf_counter() - started
        self.record_value(f"{name}_duration", duration)
        return duration

    @contextmanager
    def phase(self, name: str):
        """Time a block as one sample of '<name>_duration'"""
        timer_id = self.start_timer(name)
        try:
            yield
        finally:
            self.stop_timer(timer_id)

    def get_counter(self, metric_name: str) -> int:
        with self.lock:
            return self.counters.get(metric_name, 0)

    def get_histogram_stats(self, metric_name: str) -> Dict:
        with self.lock:
            values = np.asarray(list(self.histograms.get(metric_name, [])))
        if values.size == 0:
            return {'count': 0, 'min': 0.0, 'max': 0.0, 'avg': 0.0, 'p50': 0.0, 'p95': 0.0}
        return {
            'count': int(values.size),
            'min': float(values.min()),
            'max': float(values.max()),
            'avg': float(values.mean()),
            'p50': float(np.percentile(values, 50)),
            'p95': float(np.percentile(values, 95)),
        }

    def get_all_metrics(self) -> Dict:
        with self.lock:
            names = list(self.histograms.keys())
            metrics = {
                'run_name': self.run_name,
                'timestamp': time.time(),
                'elapsed_seconds': time.time() - self.start_time,
                'counters': dict(sorted(self.counters.items())),
                'gauges': dict(sorted(self.gauges.items())),
            }
        metrics['histograms'] = {name: self.get_histogram_stats(name) for name in sorted(names)}
        return metrics

    def export_json(self) -> str:
        return json.dumps(self.get_all_metrics(), indent=2)

    def get_summary(self) -> str:
        """Human-readable summary for the CLI log"""
        metrics = self.get_all_metrics()
        lines: List[str] = [f"=== {self.run_name}: {metrics['elapsed_seconds']:.2f}s ==="]
        for name, value in metrics['counters'].items():
            lines.append(f"  {name}: {value}")
        for name, stats in metrics['histograms'].items():
            lines.append(f"  {name}: n={stats['count']} avg={stats['avg']:.4f}s max={stats['max']:.4f}s")
        return "\n".join(lines)
