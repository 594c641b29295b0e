import os
import sys
from setuptools import setup

install_requires = [
    "numpy>=1.17.0",
    "scipy>=1.3.0",
    "scikit-learn>=0.22.0",
    "scikit-image>=0.19.0",
    "tasklogger>=1.0",
    "joblib>=0.14",
    "pandas>=1.5.0",
]

test_requires = [
    "nose2",
    "coverage",
    "parameterized",
    "black",
]

doc_requires = ["sphinx", "sphinxcontrib-napoleon"]

if sys.version_info[:2] < (3, 7):
    raise RuntimeError("Python version >=3.7 required.")

version_py = os.path.join(os.path.dirname(__file__), "lenslesstools", "version.py")
version = open(version_py).read().strip().split("=")[-1].replace('"', "").strip()

readme = open("README.rst").read()

setup(
    name="lenslesstools",
    version=version,
    description="lenslesstools",
    packages=["lenslesstools",],
    install_requires=install_requires,
    extras_require={"test": test_requires, "doc": doc_requires},
    test_suite="nose2.collector.collector",
    entry_points={"console_scripts": ["lenslesstools = lenslesstools.cli:main"]},
    long_description=readme,
    keywords=[
        "lensless imaging",
        "computational imaging",
        "coded illumination",
        "3D reconstruction",
        "total variation",
    ],
    classifiers=[
        "Development Status :: 4 - Beta",
        "Environment :: Console",
        "Intended Audience :: Science/Research",
        "Natural Language :: English",
        "Operating System :: MacOS :: MacOS X",
        "Operating System :: Microsoft :: Windows",
        "Operating System :: POSIX :: Linux",
        "Programming Language :: Python :: 3",
        "Topic :: Scientific/Engineering :: Image Processing",
        "Topic :: Scientific/Engineering :: Physics",
    ],
)
