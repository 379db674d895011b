#!/usr/bin/env python3
"""
Setup configuration for subspace-mapper
"""

from setuptools import setup, find_packages
import os
import re

# Read README for long description
def read_readme():
    with open("README.md", "r", encoding="utf-8") as fh:
        return fh.read()

# Read requirements
def read_requirements():
    with open("requirements.txt", "r", encoding="utf-8") as fh:
        return [line.strip() for line in fh if line.strip() and not line.startswith("#")]

# Read version from the package
def read_version():
    init_file = os.path.join(os.path.dirname(__file__), "subspace_mapper", "__init__.py")
    with open(init_file, "r", encoding="utf-8") as fh:
        match = re.search(r'^__version__ = "([^"]+)"', fh.read(), re.M)
    return match.group(1) if match else "0.0.0"

setup(
    name="subspace-mapper",
    version=read_version(),
    description="Constraint-reduced qubit mapping and measurement circuits for fermionic Hamiltonians",
    long_description=read_readme(),
    long_description_content_type="text/markdown",
    packages=find_packages(exclude=["tests*"]),
    classifiers=[
        "Development Status :: 4 - Beta",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Programming Language :: Python :: 3.12",
        "Topic :: Scientific/Engineering :: Chemistry",
        "Topic :: Scientific/Engineering :: Physics",
    ],
    python_requires=">=3.9",
    install_requires=read_requirements(),
    extras_require={
        "dev": [
            "pytest>=7.4.3",
            "pytest-cov>=4.1.0",
        ],
    },
    entry_points={
        "console_scripts": [
            "subspace-mapper=subspace_mapper.cli:main",
        ],
    },
    include_package_data=True,
    package_data={
        "subspace_mapper": ["*.json"],
    },
    keywords=[
        "quantum-computing",
        "quantum-chemistry",
        "qubit-reduction",
        "symmetry",
        "vqe",
    ],
    zip_safe=False,
)
