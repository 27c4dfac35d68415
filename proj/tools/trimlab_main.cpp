#include <csignal>

#include "trimlab/cli.hpp"
#include "trimlab/experiments.hpp"

extern "C" void trimlab_on_sigint(int) { trimlab::interrupt_flag().store(true); }

int main(int argc, char** argv) {
  std::signal(SIGINT, trimlab_on_sigint);
  return trimlab::run_cli(argc, argv);
}
