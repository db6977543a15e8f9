#include "run_config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace marco::cli {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

template <typename T>
bool parse_number(const std::string& text, T& out) {
  if constexpr (std::is_same_v<T, double>) {
    try {
      std::size_t used = 0;
      out = std::stod(text, &used);
      return used == text.size();
    } catch (const std::exception&) {
      return false;
    }
  } else {
    const char* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, out);
    return ec == std::errc() && ptr == end;
  }
}

bool parse_bool(const std::string& text, bool& out) {
  if (text == "true" || text == "1" || text == "yes") {
    out = true;
    return true;
  }
  if (text == "false" || text == "0" || text == "no") {
    out = false;
    return true;
  }
  return false;
}

std::string format(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

struct Key {
  std::string name;
  std::function<std::string(const RunConfig&)> get;
  std::function<bool(RunConfig&, const std::string&)> set;
};

template <typename T>
Key make_key(std::string name, std::function<T&(RunConfig&)> ref) {
  Key key;
  key.name = std::move(name);
  key.get = [ref](const RunConfig& c) {
    T& v = ref(const_cast<RunConfig&>(c));
    if constexpr (std::is_same_v<T, bool>) {
      return std::string(v ? "true" : "false");
    } else if constexpr (std::is_same_v<T, double>) {
      return format(v);
    } else {
      return std::to_string(v);
    }
  };
  key.set = [ref](RunConfig& c, const std::string& text) {
    if constexpr (std::is_same_v<T, bool>) {
      return parse_bool(text, ref(c));
    } else {
      return parse_number(text, ref(c));
    }
  };
  return key;
}

template <typename E>
Key enum_key(std::string name, std::function<E&(RunConfig&)> ref, std::function<E(const std::string&)> parse) {
  Key key;
  key.name = std::move(name);
  key.get = [ref](const RunConfig& c) { return to_string(ref(const_cast<RunConfig&>(c))); };
  key.set = [ref, parse](RunConfig& c, const std::string& text) {
    try {
      ref(c) = parse(text);
      return true;
    } catch (const std::exception&) {
      return false;
    }
  };
  return key;
}

const std::vector<Key>& key_table() {
  static const std::vector<Key> table = [] {
    std::vector<Key> t;
    auto tr = [](auto member) {
      return [member](RunConfig& c) -> auto& { return c.train.*member; };
    };
    auto enc = [](auto member) {
      return [member](RunConfig& c) -> auto& { return c.train.encoder.*member; };
    };
    auto se = [](auto member) {
      return [member](RunConfig& c) -> auto& { return c.search.*member; };
    };
    t.push_back(enum_key<FeatureLayout>("train.layout", tr(&TrainConfig::layout), feature_layout_from_string));
    t.push_back(make_key<int>("train.embed_dim", enc(&EncoderConfig::embed_dim)));
    t.push_back(make_key<int>("train.layers", enc(&EncoderConfig::layers)));
    t.push_back(make_key<int>("train.heads", enc(&EncoderConfig::heads)));
    t.push_back(make_key<int>("train.ffn_hidden", enc(&EncoderConfig::ffn_hidden)));
    t.push_back(make_key<double>("train.tanh_clip", enc(&EncoderConfig::tanh_clip)));
    t.push_back(enum_key<AttentionVariant>("train.attention", enc(&EncoderConfig::encoder_attention),
                                           attention_variant_from_string));
    t.push_back(make_key<int>("train.n_min", tr(&TrainConfig::n_min)));
    t.push_back(make_key<int>("train.n_max", tr(&TrainConfig::n_max)));
    t.push_back(make_key<double>("train.edge_p_min", tr(&TrainConfig::edge_p_min)));
    t.push_back(make_key<double>("train.edge_p_max", tr(&TrainConfig::edge_p_max)));
    t.push_back(make_key<double>("train.lr", tr(&TrainConfig::lr)));
    t.push_back(make_key<int>("train.batch_size", tr(&TrainConfig::batch_size)));
    t.push_back(make_key<int>("train.episodes_per_epoch", tr(&TrainConfig::episodes_per_epoch)));
    t.push_back(make_key<int>("train.epochs", tr(&TrainConfig::epochs)));
    t.push_back(make_key<int>("train.phase2_epochs", tr(&TrainConfig::phase2_epochs)));
    t.push_back(make_key<double>("train.penalty", tr(&TrainConfig::penalty)));
    t.push_back(make_key<double>("train.gamma", tr(&TrainConfig::gamma)));
    t.push_back(make_key<int>("train.episode_length", tr(&TrainConfig::episode_length)));
    t.push_back(make_key<int>("train.k", tr(&TrainConfig::k)));
    t.push_back(make_key<int>("train.constructions", tr(&TrainConfig::constructions)));
    t.push_back(make_key<int>("train.retrieval_frequency", tr(&TrainConfig::retrieval_frequency)));
    t.push_back(make_key<int>("train.start_cap", tr(&TrainConfig::start_cap)));
    t.push_back(make_key<double>("train.clip", tr(&TrainConfig::clip)));
    t.push_back(make_key<double>("train.beta1", tr(&TrainConfig::beta1)));
    t.push_back(make_key<double>("train.beta2", tr(&TrainConfig::beta2)));
    t.push_back(make_key<double>("train.eps", tr(&TrainConfig::eps)));
    t.push_back(make_key<double>("train.weight_decay", tr(&TrainConfig::weight_decay)));
    t.push_back(make_key<bool>("train.return_baseline", tr(&TrainConfig::return_baseline)));
    t.push_back(make_key<std::size_t>("train.capacity", tr(&TrainConfig::capacity)));
    t.push_back(make_key<std::uint64_t>("train.seed", tr(&TrainConfig::seed)));
    t.push_back(enum_key<MemoryMode>("search.memory_mode", se(&SearchConfig::memory_mode), memory_mode_from_string));
    t.push_back(make_key<int>("search.threads", se(&SearchConfig::threads)));
    t.push_back(make_key<int>("search.k", se(&SearchConfig::k)));
    t.push_back(make_key<int>("search.max_steps", se(&SearchConfig::max_steps)));
    t.push_back(make_key<int>("search.constructions", se(&SearchConfig::constructions)));
    t.push_back(make_key<int>("search.retrieval_frequency", se(&SearchConfig::retrieval_frequency)));
    t.push_back(enum_key<ActionSelection>("search.selection", se(&SearchConfig::selection),
                                          action_selection_from_string));
    t.push_back(make_key<bool>("search.exclude_self", se(&SearchConfig::exclude_self)));
    t.push_back(make_key<std::size_t>("search.capacity", se(&SearchConfig::capacity)));
    t.push_back(make_key<std::uint64_t>("search.seed", se(&SearchConfig::seed)));
    t.push_back(make_key<int>("bench.models", [](RunConfig& c) -> int& { return c.bench_models; }));
    return t;
  }();
  return table;
}

}  // namespace

Profile profile_from_string(const std::string& name) {
  if (name == "desk") return Profile::Desk;
  if (name == "paper") return Profile::Paper;
  throw UsageError("unknown profile '" + name + "' (expected desk or paper)");
}

std::string to_string(Profile profile) { return profile == Profile::Desk ? "desk" : "paper"; }

RunConfig RunConfig::defaults(Problem problem, Profile profile) {
  RunConfig cfg;
  cfg.problem = problem;
  cfg.profile = profile;
  cfg.train = profile == Profile::Desk ? TrainConfig::desk(problem) : TrainConfig::paper(problem);
  cfg.search = profile == Profile::Desk ? SearchConfig::desk(problem) : SearchConfig::paper(problem);
  return cfg;
}

std::string RunConfig::set(const std::string& key, const std::string& value) {
  for (const auto& k : key_table()) {
    if (k.name != key) continue;
    if (!k.set(*this, value)) return "invalid value '" + value + "' for key '" + key + "'";
    return "";
  }
  return "unknown key '" + key + "'";
}

std::vector<std::pair<std::string, std::string>> RunConfig::entries() const {
  std::vector<std::pair<std::string, std::string>> out;
  out.emplace_back("problem", to_string(problem));
  out.emplace_back("profile", to_string(profile));
  for (const auto& k : key_table()) out.emplace_back(k.name, k.get(*this));
  return out;
}

std::vector<std::string> RunConfig::keys() {
  std::vector<std::string> out;
  for (const auto& k : key_table()) out.push_back(k.name);
  return out;
}

std::vector<std::string> RunConfig::problems() const {
  std::vector<std::string> out = train.problems();
  try {
    search.validate();
  } catch (const std::exception& e) {
    out.emplace_back(e.what());
  }
  if (bench_models < 1) out.emplace_back("bench.models must be >= 1");
  return out;
}

std::vector<std::pair<std::string, std::string>> read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file '" + path.string() + "'");
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos || trim(line.substr(0, eq)).empty()) {
      throw UsageError(path.string() + ":" + std::to_string(number) + ": expected 'key = value'");
    }
    out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return out;
}

void apply_settings(RunConfig& cfg, const std::vector<std::pair<std::string, std::string>>& file_entries,
                    const std::vector<std::string>& overrides) {
  std::vector<std::string> errors;
  for (const auto& [key, value] : file_entries) {
    if (auto err = cfg.set(key, value); !err.empty()) errors.push_back("config file: " + err);
  }
  for (const auto& item : overrides) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) {
      errors.push_back("--set expects key=value, got '" + item + "'");
      continue;
    }
    if (auto err = cfg.set(trim(item.substr(0, eq)), trim(item.substr(eq + 1))); !err.empty()) {
      errors.push_back("--set: " + err);
    }
  }
  for (auto& p : cfg.problems()) errors.push_back(std::move(p));
  if (errors.empty()) return;
  std::ostringstream msg;
  msg << "configuration errors:";
  for (const auto& e : errors) msg << "\n  " << e;
  throw UsageError(msg.str());
}

void echo_config(const RunConfig& cfg, std::ostream& out) {
  for (const auto& [key, value] : cfg.entries()) out << "config " << key << " = " << value << '\n';
}

}  // namespace marco::cli
