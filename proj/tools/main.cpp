#include <cstdio>

int main() {
  std::puts("gnssr-sm: not wired up yet");
  return 2;
}
