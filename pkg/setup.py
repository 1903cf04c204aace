from setuptools import setup, find_packages
setup(name='wavefeat',
      version='0.1',
      packages=find_packages(exclude=['tests', 'examples', 'examples.*']),
      py_modules=['run_wavefeat'],
      install_requires=['numpy>=1.22', 'scipy>=1.7', 'scikit-learn>=1.0', 'pandas>=1.5', 'PyWavelets>=1.1',
                        'colorlog>=6.4'],
      extras_require={'test': ['pytest>=7.0']},
      )
