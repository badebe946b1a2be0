import sys

from gaugeflow.cli import main

sys.exit(main())
