"""
Command modules for the hydrobell CLI.
"""

# Import command modules to make them available
from . import config, hvt
from . import calibrate, run, sweep, validate

__all__ = ['config', 'hvt', 'calibrate', 'run', 'sweep', 'validate']
