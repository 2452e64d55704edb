import sys

from wordfence.cli import main

sys.exit(main())
