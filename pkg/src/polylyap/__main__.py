import sys

from polylyap.cli import main

sys.exit(main())
