#include "jsdm/cli.hpp"

int main(int argc, char** argv) { return jsdm::cli::command_dispatch(argc, argv); }
