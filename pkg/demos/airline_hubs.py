"""Closeness hubs across airline layers, on the bundled toy airline network.

Walks through ranking cities per airline, finding the cities that are hubs
for Allegiant but for none of the other carriers, and joining the answer
with city populations.

    python3 demos/airline_hubs.py
"""

from pathlib import Path

from mlnkit.config import build_mln
from mlnkit.export import drilldown, result_document
from mlnkit.exprlang import Engine
from mlnkit.psi import TOP_DECILE

CONFIG = Path(__file__).resolve().parent.parent / "tests" / "data" / "airline" / "config.yaml"

mln = build_mln(CONFIG)
for line in mln.stats_lines():
    print(line)

engine = Engine(mln.schema, mln.store, default_hub_rule=TOP_DECILE)

print("\nbest-connected cities per airline")
for res in engine.evaluate_text("PSI[closeness]($EACH(other-airlines)); FILTER top_k(3)"):
    names = [res.universe.name_of(v) for v in res.nodes.members.tolist()]
    print(f"  {res.text.split('(')[1].split(')')[0]}: {', '.join(names)}")

query = ("PSI[closeness](USCITY-Allegiant-DirectFlight) MINUS "
         "(PSI[closeness](USCITY-Allegiant-DirectFlight) AND {OR PSI[closeness]($EACH(other-airlines))}) "
         "MINUS NODESET(allegiant-active-hubs); FILTER sort_by(population, desc)")
(res,) = engine.evaluate_text(query)
print(f"\nquery as evaluated (hub rule filled in):\n  {res.text}")
header, rows = drilldown(result_document(res, mln.schema), ["population", "state"], mln.store)
print("\ncandidate new Allegiant hubs")
print("  " + ",".join(header))
for row in rows:
    print("  " + ",".join(row))
