#include "pcdc/cli.hpp"

int main(int argc, char** argv) { return pcdc::cli::run(argc, argv); }
