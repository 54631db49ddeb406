import sys

from caccsim.cli import main

sys.exit(main())
