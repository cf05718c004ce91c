from setuptools import find_packages, setup

install_requires = [
    "numpy",
    "scipy",
    "pyyaml",
]

setup(
    name="igamg",
    version="0.0.1",
    description="multigrid and polynomial extrapolation solvers for isogeometric Galerkin systems",
    license="MIT",
    install_requires=install_requires,
    extras_require={"test": ["pytest"]},
    packages=find_packages(exclude=("tests", "docs")),
    package_data={"igamg": ["data/*.yaml"]},
    entry_points={"console_scripts": ["igamg-bench = igamg.cli:main"]},
)
