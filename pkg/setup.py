from setuptools import setup, find_packages

setup(
    name="quadmetric",
    version="0.1.0",
    packages=find_packages(exclude=["tests", "tests.*"]),
    python_requires=">=3.8",
    install_requires=[
        "numpy>=1.22",
        "scipy>=1.8",
        "scikit-learn>=1.1",
        "python-dotenv>=0.19.0",
        "pydantic>=1.8.0,<2",
    ],
    entry_points={
        "console_scripts": [
            "quadmetric=app.cli:main",
        ],
    },
)
