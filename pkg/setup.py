import setuptools

with open("README.md", "r") as fh:
    long_description = fh.read()

setuptools.setup(
    name="biobb_rnot",
    version="1.0.0",
    author="Biobb developers",
    author_email="pau.andrio@bsc.es",
    description="Biobb_rnot is the Biobb module collection to learn optimal transport maps on spheres and tori with neural prepotentials on landmark features.",
    long_description=long_description,
    long_description_content_type="text/markdown",
    keywords="Bioinformatics Workflows BioExcel Compatibility Optimal-Transport Riemannian",
    url="https://github.com/bioexcel/biobb_rnot",
    project_urls={
        "Documentation": "http://biobb-rnot.readthedocs.io/en/latest/",
        "Bioexcel": "https://bioexcel.eu/"
    },
    packages=setuptools.find_packages(exclude=['docs', 'test']),
    package_data={'biobb_rnot': ['py.typed']},
    install_requires=['biobb_common>=4.0.0', 'numpy>=1.20', 'scipy>=1.7'],
    extras_require={'test': ['pytest', 'hypothesis']},
    python_requires='>=3.8',
    entry_points={
        "console_scripts": [
            "rnot = biobb_rnot.cli:main",
            "rnot_train = biobb_rnot.rnot.train:main",
            "rnot_evaluate = biobb_rnot.rnot.evaluate:main",
            "rnot_transport = biobb_rnot.rnot.transport:main",
            "diagnose_embedding = biobb_rnot.rnot_extra.diagnose_embedding:main",
            "rnot_sweep = biobb_rnot.rnot_extra.sweep:main",
            "rnot_quantize = biobb_rnot.rnot_extra.quantize:main"
        ]
    },
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Programming Language :: Python :: 3.8",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "License :: OSI Approved :: Apache Software License",
        "Operating System :: MacOS :: MacOS X",
        "Operating System :: POSIX"
    ],
)
