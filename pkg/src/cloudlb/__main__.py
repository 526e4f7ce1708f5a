import sys

from cloudlb.cli import main

sys.exit(main())
