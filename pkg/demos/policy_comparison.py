"""
Comparing the three balancing policies under overload
=====================================================

On the default scenario nothing ever queues, so the policies are
indistinguishable. Here every user base offers twice what its data center
can execute for one hour. Round robin runs time-shared; ESCE and throttled
run space-shared. A handful of seeds keeps this quick; the command-line
``compare`` defaults to twenty.
"""

from cloudlb import compare_policies, default_paper_config, overload_scenario

cfg = overload_scenario(default_paper_config(), load_factor=2.0)
ub = cfg.user_bases[0]
print(f"{ub.users_peak} users per base, {ub.request_length:.0f} MI per request")

cmp = compare_policies(cfg, seeds=range(3))
print(cmp.format())

# %%
# Processor sharing under sustained overload delays every task at once, so
# round robin ends with the longest responses. Throttling keeps a central
# queue per data center and migrates only when a neighbour has room.
for name, value in cmp.verdicts.items():
    print(f"{name:<36}{value}")
