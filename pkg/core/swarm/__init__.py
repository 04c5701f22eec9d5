"""Swarm agents: dynamics, attrition and the three engagement scenarios plus the planner"""
