import sys

from segqe.cli import main

sys.exit(main())
