#include "oskp/cli.hpp"

int main(int argc, char** argv) { return oskp::cli::execute(argc, argv); }
