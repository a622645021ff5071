"""
A day at sea for a small fleet
==============================

Run the shipped reference scenario: two vessels, one of which burns
high-sulfur fuel inside an emission control area for two hours, and one
sensor that briefly reports an impossible value.
"""

import json
import tempfile
from importlib.resources import files

from maritime_ledger import load_scenario, run_scenario, verify_chain

scenario = load_scenario(files("maritime_ledger") / "scenarios" / "reference.json")

with tempfile.TemporaryDirectory() as out:
    result = run_scenario(scenario, out)
    metrics = json.loads(result.files["metrics.json"].read_text())
    mailboxes = json.loads(result.files["mailboxes.json"].read_text())

for key in ("blocks_produced", "tx_committed", "readings_rejected", "notifications", "notification_latency_mean_s"):
    print(f"{key:>30}: {metrics[key]}")

print("ledger verifies:", verify_chain(result.chain) is None)
for box, messages in sorted(mailboxes.items()):
    for m in messages:
        print(f"{box:<22} vessel {m['vessel']} t={m['timestamp']} {m['message']}")
