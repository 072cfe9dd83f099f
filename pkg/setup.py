"""
Copyright (c) Meta Platforms, Inc. and affiliates.
This source code is licensed under the MIT license found in the
LICENSE file in the root directory of this source tree.
"""

from setuptools import find_packages, setup

setup(
    name="sfkalman",
    version="0.1.0",
    description="Uncertainty-aware model-based successor features with Kalman-filtered models",
    packages=find_packages(exclude=["tests", "experiments"]),
    install_requires=[
        "numpy<2",
        "scipy",
        "pandas>=1.5",
        "tqdm",
        "monty",
        "psutil",
    ],
    extras_require={"test": ["pytest"]},
    entry_points={"console_scripts": ["sfkalman=sfkalman.harness.cli:main"]},
    package_data={"sfkalman": ["envs/tasks/*.json"]},
    include_package_data=True,
)
