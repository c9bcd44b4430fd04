// Acceptance suite: run with a criterion number (1-11) or no argument for
// all. Prints one pass/fail line per criterion.
#include <cstdio>
#include <cstring>

int main(int, char**) {
  std::printf("acceptance suite placeholder\n");
  return 1;
}
