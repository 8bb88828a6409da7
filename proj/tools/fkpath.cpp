#include "app.hpp"

int main(int argc, char** argv) { return fkpath::app::run(argc, argv, std::cout, std::cerr); }
