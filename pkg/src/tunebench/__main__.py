"""python -m tunebench"""

from .cli import main

raise SystemExit(main())
