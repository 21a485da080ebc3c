"""Deterministic random-number plumbing.

One 64-bit root seed; every stochastic task (a simulation round, a chain, an
arm of an experiment) gets its own counter-based stream keyed by
(root_seed, task_index). Philox is counter based, so streams for different
task indices are independent and the assignment of tasks to threads cannot
change any stream's output.
"""

import numpy as np


def task_rng(root_seed, task_index=0):
    """Generator for task `task_index` under `root_seed`.

    Same (root_seed, task_index) always yields the same stream, regardless
    of how many other tasks ran before or concurrently.
    """
    key = np.array([np.uint64(root_seed & 0xFFFFFFFFFFFFFFFF),
                    np.uint64(task_index & 0xFFFFFFFFFFFFFFFF)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))
