#include "commands.hpp"

int main(int argc, char** argv) { return nnk::cli::run(argc, argv); }
