#include "commands.hpp"

int main(int argc, char** argv) { return coopperc::cli::run(argc, argv); }
