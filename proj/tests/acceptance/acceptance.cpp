#include <cstdio>
int main() { std::puts("[ACCEPT] placeholder"); return 0; }
