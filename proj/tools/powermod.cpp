#include <cstdio>
int main() { std::puts("powermod cli placeholder"); return 0; }
