import sys

from timing_triage.cli import main

sys.exit(main())
