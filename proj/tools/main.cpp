#include "accudrive/cli.hpp"

int main(int argc, char** argv) { return accudrive::cli::run(argc, argv); }
