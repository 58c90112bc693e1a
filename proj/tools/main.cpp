#include "segota/experiment.hpp"
int main() { return 0; }
