#!/usr/bin/env python
from setuptools import setup, find_packages

test_deps = [
    'coverage==7.4.3',
    'pytest-cov==4.1.0',
    'pytest-timeout==2.2.0',
    'mock==5.1.0',
    'pytest==8.0.2',
    'flake8==7.0.0'
]

extras = {
    'testing': test_deps,
}

setup(
    name='pairgen',
    version='0.1',
    description='Desk-scale generation of labeled image/report pairs with adversarial training.',
    packages=find_packages(exclude=['tests']),
    include_package_data=True,
    # PLEASE pin any dependencies to exact versions, otherwise things might unexpectedly break!!
    install_requires=[
        'click==8.1.7',
        'numpy==1.26.4',
        'pandas==2.2.1',
        'Pillow==10.2.0',
        'scipy==1.12.0',
        'torch==2.2.2',
    ],
    tests_require=test_deps,
    extras_require=extras,
    entry_points={
        'console_scripts': [
            'pairgen=pairgen.cli:entry_point',
        ],
    },
)
