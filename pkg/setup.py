from setuptools import setup, find_packages

setup(
    name='fbrl_lab',
    version='0.1',
    packages=find_packages(exclude=['examples', 'examples.*']),
    python_requires='>=3.10',
    install_requires=[
        'numpy>=1.22',
        'pandas>=1.5',
        'matplotlib>=3.5',
    ],
    extras_require={
        'test': ['pytest>=7', 'scipy>=1.8'],
    },
    entry_points={
        'console_scripts': [
            'fbrl-lab=fbrl_lab.main:main',
        ],
    },
    include_package_data=True,
    description='Forward-Backward Reinforcement Learning laboratory: DDQN with backward imagination on Gridworld and Towers of Hanoi.',
    author='Mark Koranda',
)
