"""Version file will be exec'd by setup.py and imported by __init__.py"""

__version__ = '0.1.0'
