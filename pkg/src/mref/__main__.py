import sys

from mref.cli import main

sys.exit(main())
