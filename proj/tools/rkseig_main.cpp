#include <rks/run.hpp>

int main(int argc, char** argv) {
  return rks::cli::main(argc, argv);
}
