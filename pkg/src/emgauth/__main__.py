import sys

from emgauth.cli import main

sys.exit(main())
