"""UI module for LA-VA."""

from .cli import main as cli_main, run
from .run_manifest import build_manifest, write_manifest

__all__ = ['cli_main', 'run', 'build_manifest', 'write_manifest']
