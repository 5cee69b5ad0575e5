#include "ralab/cli.hpp"

int main(int argc, char** argv) { return ralab::cli::run(argc, argv); }
