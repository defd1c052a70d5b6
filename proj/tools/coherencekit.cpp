#include <coherencekit/cli.hpp>

int main(int argc, char** argv) { return coherencekit::cli::run(argc, argv); }
