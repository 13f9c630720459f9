"""
Finding communities in a check-in stream
=========================================

Load the bundled synthetic stream, run the four community searches and see
which communities survive the sanity rules.
"""

from spotcast.pipeline import PipelineConfig, prepare

# default config: bundled 1000-post stream, thresholds 100 users / 5 posts a day
cfg = PipelineConfig()
st = prepare(cfg)
print(st.counters)

# every community, with the reasons it was blocked (if it was)
reasons = {id(c): [r.value for r in rs] for c, rs in st.blocked}
for c in st.communities:
    cl = c.clusters[0]
    print(f"{c.kind.value:9s} {c.label:14s} users={cl.distinct_users:3d} "
          f"posts/day={cl.tuples_per_day():6.2f} {reasons.get(id(c), 'allowed')}")

# the language index of each continent: distinct languages per distinct user
for c in st.communities:
    if c.csl_index is not None:
        print(c.label, round(c.csl_index, 4))
