#include <cstdio>
int main(){ std::puts("gaia cli: not yet wired"); return 0; }
