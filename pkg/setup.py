#!/usr/bin/env python

from os.path import abspath, dirname, join

from setuptools import find_packages, setup

with open(join(dirname(abspath(__file__)), "smuc", "version.py")) as version_file:
    exec(compile(version_file.read(), "version.py", "exec"))

setup(
    name="smuc",
    version=version,  # noqa
    description="Fixpoint formulas and programs over graph-shaped computational fields",
    packages=find_packages(exclude=["tests"]),
    # 3.6 and up, but not Python 4
    python_requires="~=3.6",
    install_requires=[
        "attrs>=19.2.0",
        "vistautils>=0.21.0",
        "immutablecollections>=0.10.0",
        "networkx>=2.3",
        "more_itertools>=8.2.0",
        "typing_extensions",
        "PyYAML>=5.4",
    ],
    entry_points={"console_scripts": ["smuc=smuc.cli:main"]},
    classifiers=[
        "Programming Language :: Python :: 3",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
    ],
)
