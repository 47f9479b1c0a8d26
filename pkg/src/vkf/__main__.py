import sys

from vkf.cli import main

sys.exit(main())
