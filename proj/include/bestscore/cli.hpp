#pragma once

// Command-line front end. Every subcommand prints one JSON report on
// standard output (or to --out) and a short human summary on standard error.
// Exit status: 0 success, 1 data error, 2 usage error.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "bestscore/annotations.hpp"
#include "bestscore/best.hpp"
#include "bestscore/metrics.hpp"
#include "bestscore/simulation.hpp"

namespace bestscore::cli {

enum class Subcommand { fit_prior, best, evaluate, calibrate, simulate, permtest, latent };

std::string subcommand_name(Subcommand s);

struct Options {
  // Inputs.
  std::string annotations;
  std::string predictions;
  std::string reference;
  std::string items;
  std::string responses;
  std::string classes;
  std::optional<Format> format;  // by file extension when absent
  std::optional<PredictionKind> kind;
  bool drop_empty = false;

  // Outputs.
  std::string out;
  std::string loadings_out;
  std::string scores_out;

  // best, evaluate, simulate.
  std::vector<MetricKind> metrics;
  std::size_t rounds = kDefaultRounds;
  unsigned threads = 0;
  std::optional<ScenarioKind> scenario;
  std::optional<std::size_t> examples;
  std::optional<int> annotators;

  // permtest.
  double alpha = 0.05;
  std::size_t samples = 100'000;
  bool conservative = false;

  // latent.
  std::size_t traits = 0;
  std::size_t nodes = 20;
};

struct Command {
  Subcommand subcommand = Subcommand::best;
  Options options;
  std::uint64_t seed = 0;
};

// Thrown by parse for --help; what() holds the help text.
struct HelpRequested : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Arguments exclude the program name. Throws UsageError naming the offending
// flag, or HelpRequested.
Command parse(const std::vector<std::string>& args);

// Runs a parsed command. Module errors propagate as exceptions.
void execute(const Command& command, std::ostream& out, std::ostream& err);

// parse + execute with errors rendered as {"error": "..."} on `err`.
// Returns the exit status.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace bestscore::cli
