"""Distributed macroscopic traffic simulation on partitioned road networks"""

from .logger import *

__version__ = '0.1.0'
__license__ = 'MIT'
