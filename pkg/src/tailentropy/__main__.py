import sys

from tailentropy.cli import main

sys.exit(main())
