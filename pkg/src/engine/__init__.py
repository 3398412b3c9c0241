"""World model, scenarios and the force field."""
