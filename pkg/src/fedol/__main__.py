import sys

from fedol.cli import main

sys.exit(main())
