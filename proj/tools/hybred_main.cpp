#include <cstdio>

// placeholder until the command-line driver lands
int main() {
  std::puts("hybred: not yet wired up");
  return 2;
}
