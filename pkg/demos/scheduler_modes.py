"""
Time-shared versus space-shared VMs
===================================

A time-shared VM splits its MIPS evenly over every task present; a
space-shared VM runs one task at a time in arrival order. Individual
completion times differ, but a busy VM finishes the same total work at the
same instant either way.
"""

import numpy as np

from cloudlb.config import SchedulingMode, VmSpec
from cloudlb.scheduler import run_task_set

vm = VmSpec(0, mips=1000)
tasks = [(0, 100.0), (0, 200.0), (50_000, 50.0)]  # (arrival us, length MI)

for mode in SchedulingMode:
    done = run_task_set(vm, mode, tasks)
    print(f"{mode.name:<13}", [d / 1000 for d in done], "ms")

# %%
# Under sharing, a short task that arrives late no longer waits behind the
# long ones, but everything present is slowed down.
rng = np.random.default_rng(0)
arrivals = np.sort(rng.integers(0, 200_000, 40)) // 10 * 10
lengths = rng.uniform(5, 30, 40)
batch = [(int(a), float(x)) for a, x in zip(arrivals, lengths)]
for mode in SchedulingMode:
    done = np.array(run_task_set(vm, mode, batch))
    sojourn = (done - arrivals) / 1000
    print(f"{mode.name:<13} mean {sojourn.mean():8.2f} ms  max {sojourn.max():8.2f} ms  "
          f"makespan {done.max() / 1000:.3f} ms")
