"""Problem generators and data loaders."""

from .generators import (KINDS, GeneratorSpec, ar1_covariance, gen_basis_pursuit, gen_regression,
                         gen_svm, generate, problem_from_data)
from .libsvm import LibSVMFormatError, load_libsvm, parse_libsvm_lines, write_libsvm

__all__ = ["KINDS", "GeneratorSpec", "ar1_covariance", "gen_basis_pursuit", "gen_regression",
           "gen_svm", "generate", "problem_from_data", "LibSVMFormatError", "load_libsvm", "parse_libsvm_lines",
           "write_libsvm"]
