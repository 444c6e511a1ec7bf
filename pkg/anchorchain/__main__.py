import sys

from anchorchain.cli import main

sys.exit(main())
