"""
fptlie - Production Launcher

Run fptlie subcommands in PRODUCTION mode.
Artifacts: output/   Log: logs/fptlie.log

Usage: python run.py reproduce bachelier-levy
"""
import os
import sys

# Set environment to production BEFORE importing fptlie
os.environ['ENVIRONMENT'] = 'prod'

if __name__ == "__main__":
    print("=" * 60, file=sys.stderr)
    print("fptlie - PRODUCTION Environment", file=sys.stderr)
    print("=" * 60, file=sys.stderr)
    print("Artifacts: output/", file=sys.stderr)
    print("Log: logs/fptlie.log", file=sys.stderr)
    print("=" * 60, file=sys.stderr)

    from fptlie.main import main
    sys.exit(main(sys.argv[1:]))
