import sys

from gapsoliton.cli import main

sys.exit(main())
