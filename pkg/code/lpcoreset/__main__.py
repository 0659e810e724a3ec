import sys

from lpcoreset.cli import main

sys.exit(main())
