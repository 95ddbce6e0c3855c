# Tests package
import os
import sys

# Source modules are imported by bare name, as run.py does
sys.path.insert(0, os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'src'))
