import sys

from sfkalman.harness.cli import main

sys.exit(main())
