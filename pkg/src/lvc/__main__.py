import sys

from lvc.cli import main

sys.exit(main())
