import setuptools
from pathlib import Path

source_root = Path(".")

with open(source_root / "README.md", "r") as fh:
    long_description = fh.read()

version = "0.1.0"

with open(source_root / "cgmvi" / "version.py", "w") as fh:
    fh.writelines([
        f'__version__ = "{version}" \n '
    ])

setuptools.setup(
    name="constrained-gradient-vi",
    version=version,
    description="Constrained gradient method for monotone variational inequalities with functional constraints",
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=setuptools.find_packages(exclude=["tests", "examples", "examples.*"]),
    install_requires = [
        "joblib>=1.0",
        "numpy>=1.19",
        "pandas>=1.1",
        "scipy>=1.6",
    ],
    extras_require = {
        'plot':  ["matplotlib>=3.3"]
    },
    entry_points={
        "console_scripts": ["cgmvi=cgmvi.__main__:main"],
    },
    classifiers=[
        "Programming Language :: Python :: 3",
        "Operating System :: OS Independent",
    ],
    python_requires='>=3.7',
)
