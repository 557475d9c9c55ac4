from setuptools import find_packages, setup

requires = [
    'numpy',
    'scipy'
]

data_files = [
    ('share/circlift', ['cfg/circlift.conf'])
]

develop = [
    "flake8",
    "hypothesis",
    "pytest"
]

entry_points = {
    'console_scripts': [
        'circlift = circlift:main'
    ]
}

if __name__ == "__main__":
    setup(
        name='circlift',
        description='Phase field approximation and jump minimizing liftings of circle valued maps.',
        version='0.1.0',
        packages=find_packages(exclude=['tests']),
        entry_points=entry_points,
        data_files=data_files,
        include_package_data=True,
        install_requires=requires,
        python_requires='>=3.8',
        extras_require={
            "develop": requires + develop
        },
        classifiers=[
            'Development Status :: 2 - Pre-Alpha',
            'Intended Audience :: Science/Research',
            'Natural Language :: English',
            'License:: OSI Approved:: GNU General Public License v3',
            'Operating System :: OS Independent',
            'Programming Language :: Python',
            'Programming Language :: Python :: 3.8',
            'Programming Language :: Python :: 3.9',
            'Programming Language :: Python :: 3.11',
            'Topic :: Scientific/Engineering :: Mathematics',
        ],
    )
