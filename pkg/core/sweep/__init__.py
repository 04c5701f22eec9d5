"""Parameter sweeps: grid expansion, parallel execution and run records"""
