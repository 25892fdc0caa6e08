"""Participant selection, report assessment, rewards and reputation for mobile crowdsensing."""
import logging

logging.getLogger(__name__).addHandler(logging.NullHandler())

__version__ = "0.1.0"
