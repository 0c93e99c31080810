"""
fptlie - Staging Environment

Run fptlie subcommands in STAGING mode.
Artifacts: output/staging/   Log: logs/fptlie_staging.log

Use staging for trial configurations (small n_paths, new processes) so that
production artifacts and logs stay untouched.
"""
import io
import os
import sys

# Set UTF-8 encoding for Windows console
if sys.platform == 'win32':
    sys.stdout = io.TextIOWrapper(sys.stdout.buffer, encoding='utf-8')
    sys.stderr = io.TextIOWrapper(sys.stderr.buffer, encoding='utf-8')

# CRITICAL: Set environment to staging BEFORE importing fptlie
os.environ['ENVIRONMENT'] = 'staging'

if __name__ == "__main__":
    print("=" * 60, file=sys.stderr)
    print("fptlie - STAGING Environment", file=sys.stderr)
    print("=" * 60, file=sys.stderr)
    print("\n[WARNING] Running in STAGING mode", file=sys.stderr)
    print("Artifacts: output/staging/", file=sys.stderr)
    print("Log: logs/fptlie_staging.log", file=sys.stderr)
    print("=" * 60, file=sys.stderr)

    from fptlie.main import main
    sys.exit(main(sys.argv[1:]))
