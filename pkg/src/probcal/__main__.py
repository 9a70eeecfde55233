import sys

from probcal.cli import main

sys.exit(main())
