from setuptools import setup
from setuptools import find_packages
from otmd import __version__
from otmd import __license__


with open('README.md', 'r') as fh:
    long_description = fh.read()

setup(
    name='otmd',
    version=__version__,
    license=__license__,
    description='Distributed macroscopic traffic simulation on partitioned road networks.',
    long_description=long_description,
    long_description_content_type='text/markdown',
    packages=find_packages(),
    package_data={'otmd.tests': ['resources/*']},
    python_requires='>=3.8',
    classifiers=[
        'Development Status :: 4 - Beta',
        'Intended Audience :: Science/Research',
        'License :: OSI Approved :: MIT License',
        'Operating System :: POSIX',
        'Programming Language :: Python :: 3',
        'Topic :: Scientific/Engineering',
        'Topic :: System :: Distributed Computing',
    ],
    install_requires=[
        'python3-logstash==0.4.80',
        'numpy>=1.19',
        'networkx>=2.5',
        'pandas>=1.1',
    ],
    entry_points={
        'console_scripts': ['otmd=otmd.cli:main'],
    },
)
