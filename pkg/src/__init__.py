"""Multi-robot reinforced potential field planner."""
