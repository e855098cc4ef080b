"""Build the lithomap_py extension by delegating to cargo.

Neither maturin nor setuptools-rust is assumed; the extension is the
workspace's `crates/py` cdylib, compiled in release mode and copied to
wherever setuptools wants the module. Install from this directory with

    pip install -e . --no-build-isolation
"""

import pathlib
import shutil
import subprocess
import sys

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext

WORKSPACE = pathlib.Path(__file__).resolve().parent.parent


def built_library() -> pathlib.Path:
    stem = "lithomap_py"
    if sys.platform.startswith("win"):
        name = f"{stem}.dll"
    elif sys.platform == "darwin":
        name = f"lib{stem}.dylib"
    else:
        name = f"lib{stem}.so"
    return WORKSPACE / "target" / "release" / name


class CargoBuildExt(build_ext):
    def build_extension(self, ext: Extension) -> None:
        subprocess.run(
            ["cargo", "build", "--release", "-p", "lithomap-py"],
            cwd=WORKSPACE,
            check=True,
        )
        dest = pathlib.Path(self.get_ext_fullpath(ext.name))
        dest.parent.mkdir(parents=True, exist_ok=True)
        shutil.copyfile(built_library(), dest)


setup(
    ext_modules=[Extension("lithomap_py", sources=[])],
    cmdclass={"build_ext": CargoBuildExt},
)
