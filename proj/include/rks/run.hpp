#pragma once

//
// ... Standard header files
//
#include <string>

//
// ... rks header files
//
#include <rks/solver.hpp>
#include <rks/sparse.hpp>

namespace rks::cli {

  enum class Method { Rks, Ks, Both };
  enum class OutputFormat { Json, Csv };

  struct RunSpec {
    std::string matrix_path; // mutually exclusive with use_synthetic
    bool use_synthetic = false;
    SyntheticSpec synthetic;
    Method method = Method::Rks;
    SolverConfig cfg;
    std::string out_prefix = "run";
    OutputFormat format = OutputFormat::Json;
  };

  /// Exit codes: 0 success, 2 usage error, 3 parse/solve error,
  /// 4 non-convergence (artifacts are still written).
  int run(const RunSpec& spec);

  /// Flag parsing front-end; returns a process exit status.
  int main(int argc, const char* const* argv);

} // namespace rks::cli
