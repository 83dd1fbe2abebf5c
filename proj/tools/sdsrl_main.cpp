#include "sdsrl/cli.hpp"

int main(int argc, char** argv) { return sdsrl::cli::run(argc, argv); }
