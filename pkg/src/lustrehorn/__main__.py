import sys

from lustrehorn.cli import main

sys.exit(main())
