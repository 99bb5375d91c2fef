#include "langsel/cli.hpp"

int main(int argc, char** argv) { return langsel::run(argc, argv); }
