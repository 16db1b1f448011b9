#include "app.hpp"

int main(int argc, char** argv) { return carleman::app::main(argc, argv); }
