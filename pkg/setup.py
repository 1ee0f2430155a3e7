# -*- coding: utf-8 -*-
from setuptools import setup

package_dir = \
{'': '.'}

packages = \
['spectral_ins',
 'spectral_ins.workflow']

package_data = \
{'': ['*'], 'spectral_ins': ['experiments/*']}

install_requires = \
['click>=7.0,<8.0',
 'colorclass==2.2.2',
 'deepdiff>=5.3.0,<6.0.0',
 'deepmerge>=0.2.1,<0.3.0',
 'luigi>=3.0.2,<4.0.0',
 'numpy>=1.22.4,<2.0',
 'psutil>=5.7.0,<6.0.0',
 'pykwalify>=1.7.0,<2.0.0',
 'pyyaml>=5.4',
 'scipy>=1.12,<2.0',
 'terminaltables==3.1.0']

entry_points = \
{'console_scripts': ['spectral-ins = spectral_ins.cli:cli']}

setup_kwargs = {
    'name': 'spectral-ins',
    'version': '0.1.0',
    'description': 'Pseudo-spectral experiments for critical well-posedness of inhomogeneous incompressible Navier-Stokes',
    'long_description': open('README.md').read(),
    'long_description_content_type': 'text/markdown',
    'author': 'spectral-ins developers',
    'author_email': None,
    'maintainer': None,
    'maintainer_email': None,
    'url': None,
    'package_dir': package_dir,
    'packages': packages,
    'package_data': package_data,
    'install_requires': install_requires,
    'entry_points': entry_points,
    'python_requires': '>=3.9,<4',
}


setup(**setup_kwargs)
