"""Allow ``python -m stiefel_polar`` as an alternative to the console script."""
import sys

from .cli import main

sys.exit(main())
