"""TERRA installation script."""

from codecs import open
from os import path

from setuptools import find_packages, setup

import terra

VERSION = str(terra.__version__)

here = path.abspath(path.dirname(__file__))

# Get the long description from the README file
with open(path.join(here, 'README.md'), encoding='utf-8') as f:
    long_description = f.read()

setup(
    name='terra-beam',
    version=VERSION,

    description='A slot-level simulator of millimeter-wave beam management',
    long_description=long_description,
    long_description_content_type='text/markdown',

    license='MIT',

    # See https://pypi.python.org/pypi?%3Aaction=list_classifiers
    classifiers=[
        'Development Status :: 3 - Alpha',
        'Environment :: Console',
        'License :: OSI Approved :: MIT License',
        'Programming Language :: Python :: 3',
        'Programming Language :: Python :: 3.8',
        'Topic :: Scientific/Engineering',
        'Intended Audience :: Science/Research',
        'Intended Audience :: Education',
    ],

    keywords='mmwave beam-management simulation phased-array',
    packages=find_packages(exclude=['tests']),
    python_requires='>=3.8',
    install_requires=[
        'numpy>=1.17',
        'scipy>=1.4',
    ],
    package_data={
        'terra': ['scenarios/*.json'],
    },

    entry_points={
        'console_scripts': [
            'terra=terra.main:main',
        ],
    },
)
