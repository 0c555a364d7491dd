"""
LA-VA - Verbal autopsy cause-of-death coding

Generate or load cohorts, predict causes with a chat model or an embedding
classifier, calibrate and ensemble them, and evaluate across held-out sites.
"""
import sys
from src.ui.cli import main

if __name__ == '__main__':
    sys.exit(main())
