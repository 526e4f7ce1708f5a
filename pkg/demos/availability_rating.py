"""
Rating a VM by expected availability
====================================

A VM that loses service once an hour for a minute is usable 59 minutes out
of 60. The rating feeds an optional admission filter: the balancers skip VMs
whose rating falls below a threshold.
"""

from cloudlb import AvailabilityParams, expected_availability, is_available

# %%
# One minute of downtime per hour.
p = AvailabilityParams(mp=60, r_l=1, d_e=1)
r = expected_availability(p)
print(f"rating {r.a_e:.6f} = {r.percent:.2f}%")
print("usable at 95%:", is_available(p, 0.95))
print("usable at 99%:", is_available(p, 0.99))

# %%
# Downtime longer than the period would give a negative rating. It is
# clamped to zero and the clamp is reported.
r = expected_availability(AvailabilityParams(mp=10, r_l=2, d_e=10))
print(f"raw {r.raw:+.2f} -> {r.a_e:.2f} (clamped: {r.clamped})")

# %%
# Stretching the period and the downtime by the same factor changes nothing.
for k in (1, 24, 24 * 7):
    print(k, expected_availability(AvailabilityParams(60 * k, 3, 2 * k)).a_e)
