from setuptools import Extension, setup
from Cython.Build import cythonize

ext = Extension(
    "harmflow._core",
    ["src/harmflow/_core.pyx"],
)

setup(
    ext_modules=cythonize([ext], language_level="3"),
)
