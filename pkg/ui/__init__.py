"""
UI package for the trip HMM pipeline.
Provides the rendering interface and its console implementation.
"""

from .base_ui import BaseUI
from .console_ui import ConsoleUI

__all__ = ['BaseUI', 'ConsoleUI']
