# Copyright 2026 the udcsim authors
# SPDX-License-Identifier: Apache-2.0
"""setuptools shim that drives the CMake build for the _core extension."""

import os
import shutil
import subprocess
import sys
from pathlib import Path

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class CMakeExtension(Extension):
    def __init__(self, name):
        super().__init__(name, sources=[])


class CMakeBuild(build_ext):
    def build_extension(self, ext):
        source_dir = Path(__file__).resolve().parent
        build_dir = Path(self.build_temp) / "cmake"
        build_dir.mkdir(parents=True, exist_ok=True)

        out_dir = Path(self.get_ext_fullpath(ext.name)).resolve().parent
        out_dir.mkdir(parents=True, exist_ok=True)

        configure = [
            "cmake",
            "-S", str(source_dir),
            "-B", str(build_dir),
            "-DSKBUILD=ON",
            "-DCMAKE_BUILD_TYPE=Release",
            f"-DPython3_EXECUTABLE={sys.executable}",
        ]
        if shutil.which("ninja"):
            configure.append("-GNinja")
        subprocess.run(configure, check=True)
        subprocess.run(
            ["cmake", "--build", str(build_dir), "--target", "_core",
             "--parallel", str(os.cpu_count() or 1)],
            check=True,
        )

        built = list(build_dir.glob("bindings/_core*.so"))
        if not built:
            raise RuntimeError("cmake did not produce the _core extension")
        shutil.copy2(built[0], out_dir / built[0].name)


setup(
    ext_modules=[CMakeExtension("udcsim._core")],
    cmdclass={"build_ext": CMakeBuild},
)
