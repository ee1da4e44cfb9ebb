#include "pfdam/cli.hpp"

int main(int argc, char** argv) { return pfdam::cli_main(argc, argv); }
