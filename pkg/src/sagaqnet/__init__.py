"""Saga planning and event simulation for quantum repeater networks."""
