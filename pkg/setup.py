from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    # -ffp-contract=off keeps the compiled loop bit-identical to the pure
    # Python fallback (no fused multiply-add), which the parity tests assert.
    extensions = cythonize(
        [
            Extension(
                "armsim._kernel_cy",
                ["src/armsim/_kernel_cy.pyx"],
                extra_compile_args=["-O2", "-ffp-contract=off"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
