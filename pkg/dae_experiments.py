#!/usr/bin/env python3
"""
Inherent-ODE experiment runner

Entry point for standalone execution. Without arguments it reproduces the
stiff linear experiment table; any arguments are handed to the CLI.
"""

import sys

from inherent_dae.cli.main import main


if __name__ == '__main__':
    main(sys.argv[1:] or ["run", "--problem", "wensch", "--preset"])
