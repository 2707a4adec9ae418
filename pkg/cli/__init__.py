"""
Command-line interface: gen, train, eval, oracle, sample-obs, sweep
"""
