"""
What monitoring costs in gas
============================

Deploy the three contracts, register one vessel and record a day of hourly
compliant uploads, then print the cost tables.
"""

from maritime_ledger import CallContext, ContractWorld, GeoPosition, Role, cost_report, render_text

admin = CallContext("admin", Role.ADMIN)
owner = CallContext("AcmeShipping", Role.VESSEL_OWNER)

world = ContractWorld()
world.deploy_contracts(admin)
world.register_vessel(admin, 9074729, "AcmeShipping", "Panama")

# every upload is setPortState followed by recordEmission
for hour in range(24):
    world.clock = hour * 3600.0
    world.set_port_state(admin, "USA-EastCoast", "USCG", vessel=9074729)
    world.record_emission(owner, 9074729, 0.08, GeoPosition(40.0, -70.0), True, "USA-EastCoast", hour)

print(render_text(cost_report(world.call_log)))
