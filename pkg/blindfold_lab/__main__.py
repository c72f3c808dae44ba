import sys

from blindfold_lab.cli import main

sys.exit(main())
