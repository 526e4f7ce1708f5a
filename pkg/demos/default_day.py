"""
A day on the six-region default scenario
========================================

Six user bases, each next to its own data center of five VMs, round-robin
balancing and time-shared VMs. Nothing saturates, so a response is
essentially two 25 ms network legs plus half a millisecond of execution,
spread by a few milliseconds of jitter.
"""

import tempfile
import time
from pathlib import Path

from cloudlb import default_paper_config, hourly_loading, simulate, summarize
from cloudlb.report import write_run

cfg = default_paper_config()
t = time.perf_counter()
result = simulate(cfg)
print(f"{result.generated} requests in {time.perf_counter() - t:.1f} s")

# %%
# Response time per user base, then processing time per data center.
tables = summarize(result.store)
print(tables["response"].format("Userbase"))
print()
print(tables["processing"].format("Data Center"))

# %%
# Traffic follows each user base's peak window, so the hourly load per data
# center has a plateau.
for dc, counts in hourly_loading(result.store).items():
    print(dc, " ".join(f"{c:>6}" for c in counts[:12]), "...")

# %%
# The standard report set: CSV per request, JSON summary, plot columns.
out = Path(tempfile.mkdtemp(prefix="cloudlb-day-"))
write_run(result, out)
print(sorted(p.name for p in out.iterdir()))
