#include "cli.hpp"

int main(int argc, char **argv) { return ctpd::cli::dispatch(argc, argv); }
