import sys

from relu_lab.cli import main

sys.exit(main())
