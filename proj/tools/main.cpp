#include "commands.hpp"

int main(int argc, char** argv) { return calibr::cli::run(argc, argv); }
