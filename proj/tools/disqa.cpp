#include "disqa/cli.hpp"

int main(int argc, char** argv) { return disqa::cli::run(argc, argv); }
