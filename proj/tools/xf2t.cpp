#include "xf2t/cli.hpp"

int main(int argc, char** argv) { return xf2t::cli::run(argc, argv); }
