from setuptools import setup, find_packages

setup(
    name="optomech-converter",
    version="0.1.0",
    description="Modelling, fitting and design tools for optomechanical microwave frequency converters",
    author="andrewlee377",
    author_email="",
    packages=find_packages(where="src"),
    package_dir={"": "src"},
    py_modules=["main"],
    install_requires=[
        "numpy>=1.22.0",
        "pandas>=2.0.0",
        "scipy>=1.9.0",
    ],
    entry_points={
        "console_scripts": ["optoconv=main:run"],
    },
    python_requires=">=3.9",
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: MIT License",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
    ],
)
