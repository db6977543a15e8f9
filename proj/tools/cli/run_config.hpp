#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "marco/search.hpp"
#include "marco/training.hpp"

namespace marco::cli {

/// Usage or configuration problem; maps to exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Profile { Desk, Paper };

Profile profile_from_string(const std::string& name);
std::string to_string(Profile profile);

/// Merged training, search and bench settings. Keys are namespaced
/// ("train.lr", "search.k", "bench.models"); see keys().
struct RunConfig {
  Problem problem = Problem::MaxCut;
  Profile profile = Profile::Desk;
  TrainConfig train;
  SearchConfig search;
  int bench_models = 2;

  static RunConfig defaults(Problem problem, Profile profile);

  /// Sets one key; returns an error message instead of throwing so callers
  /// can report every problem at once.
  std::string set(const std::string& key, const std::string& value);
  /// Effective value of every key in a stable order.
  std::vector<std::pair<std::string, std::string>> entries() const;
  static std::vector<std::string> keys();
  /// Validation errors of the train and search sections.
  std::vector<std::string> problems() const;
};

/// `key = value` lines; `#` starts a comment. Throws UsageError with the line number.
std::vector<std::pair<std::string, std::string>> read_config_file(const std::filesystem::path& path);

/// Applies file entries then `key=value` overrides; throws UsageError listing
/// every unknown key, bad value and validation failure.
void apply_settings(RunConfig& cfg, const std::vector<std::pair<std::string, std::string>>& file_entries,
                    const std::vector<std::string>& overrides);

void echo_config(const RunConfig& cfg, std::ostream& out);

}  // namespace marco::cli
