#include "aigc_alloc/cli.hpp"

int main(int argc, char** argv) { return aigc::cli::run_cli(argc, argv); }
