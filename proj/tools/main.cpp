#include "app.hpp"

int main(int argc, char** argv) { return dgcast::app::run(argc, argv); }
