import sys

from ictd.main import main

sys.exit(main())
