#!/usr/bin/env python3
"""
Setup script for real-moduli

This script provides installation and packaging configuration
for the real-moduli verification laboratory.
"""

from setuptools import setup
from pathlib import Path

# Read the contents of README file
this_directory = Path(__file__).parent
long_description = (this_directory / "README.md").read_text(encoding='utf-8')

# Read requirements from requirements.txt
requirements = []
requirements_file = this_directory / "requirements.txt"
if requirements_file.exists():
    with open(requirements_file, 'r', encoding='utf-8') as f:
        requirements = [
            line.strip()
            for line in f
            if line.strip() and not line.startswith('#')
        ]

setup(
    name="real-moduli",
    version="1.0.0",
    description="Numerical verification of the cohomology of a real moduli space of SU(2) representations",
    long_description=long_description,
    long_description_content_type="text/markdown",
    package_dir={"": "src"},
    py_modules=[
        "cli", "config", "errors", "morse", "quat", "realstruct",
        "report", "repvar", "spectral", "tasks",
    ],
    classifiers=[
        "Development Status :: 4 - Beta",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.8",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Topic :: Scientific/Engineering :: Mathematics",
    ],
    python_requires=">=3.8",
    install_requires=requirements,
    entry_points={
        "console_scripts": [
            "real-moduli=cli:main",
        ],
    },
    keywords="su2 representation variety morse-bott moduli space verification",
    include_package_data=True,
    zip_safe=False,
)
