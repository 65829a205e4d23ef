#include "ropf/dica.hpp"
int main() { return 0; }
