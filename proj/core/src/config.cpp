#include "roiloc/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <functional>
#include <map>
#include <sstream>

#include "roiloc/error.hpp"

namespace roiloc {

namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(trim(cur));
  return out;
}

template <typename T>
T parse_number(const std::string& text, const std::string& key) {
  const std::string t = trim(text);
  T value{};
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    throw Error("config key " + key + ": cannot parse '" + text + "'");
  }
  return value;
}

template <typename T>
std::string format_number(T value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

template <typename T, std::size_t N>
std::array<T, N> parse_array(const std::string& text, const std::string& key) {
  const auto parts = split(text, ',');
  if (parts.size() != N) throw Error("config key " + key + ": expected " + std::to_string(N) + " values");
  std::array<T, N> out{};
  for (std::size_t i = 0; i < N; ++i) out[i] = parse_number<T>(parts[i], key);
  return out;
}

template <typename T, std::size_t N>
std::string format_array(const std::array<T, N>& a) {
  std::string out;
  for (std::size_t i = 0; i < N; ++i) out += (i ? "," : "") + format_number(a[i]);
  return out;
}

bool parse_bool(const std::string& text, const std::string& key) {
  const std::string t = trim(text);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  throw Error("config key " + key + ": expected a boolean, got '" + text + "'");
}

struct Field {
  std::function<void(ExperimentConfig&, const std::string& value, const std::string& key)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

// Keeps insertion order for to_ini.
struct Registry {
  std::vector<std::string> order;
  std::map<std::string, Field> fields;

  template <typename Get>
  void number(const std::string& key, Get member) {
    add(key, {[member](ExperimentConfig& c, const std::string& v, const std::string& k) {
                auto& ref = member(c);
                ref = parse_number<std::remove_reference_t<decltype(ref)>>(v, k);
              },
              [member](const ExperimentConfig& c) { return format_number(member(const_cast<ExperimentConfig&>(c))); }});
  }

  template <typename Get>
  void triple(const std::string& key, Get member) {
    add(key, {[member](ExperimentConfig& c, const std::string& v, const std::string& k) {
                auto& ref = member(c);
                ref = parse_array<typename std::remove_reference_t<decltype(ref)>::value_type, 3>(v, k);
              },
              [member](const ExperimentConfig& c) { return format_array(member(const_cast<ExperimentConfig&>(c))); }});
  }

  template <typename Get>
  void range(const std::string& key, Get member) {
    add(key, {[member](ExperimentConfig& c, const std::string& v, const std::string& k) {
                const auto a = parse_array<double, 2>(v, k);
                member(c) = Range{a[0], a[1]};
              },
              [member](const ExperimentConfig& c) {
                const Range r = member(const_cast<ExperimentConfig&>(c));
                return format_number(r.min) + "," + format_number(r.max);
              }});
  }

  template <typename Get>
  void flag(const std::string& key, Get member) {
    add(key, {[member](ExperimentConfig& c, const std::string& v, const std::string& k) { member(c) = parse_bool(v, k); },
              [member](const ExperimentConfig& c) {
                return std::string(member(const_cast<ExperimentConfig&>(c)) ? "true" : "false");
              }});
  }

  void add(const std::string& key, Field f) {
    order.push_back(key);
    fields.emplace(key, std::move(f));
  }
};

const Registry& registry() {
  static const Registry reg = [] {
    Registry r;
    using C = ExperimentConfig;
    r.triple("phantom.dims", [](C& c) -> auto& { return c.phantom.dims; });
    r.triple("phantom.spacing", [](C& c) -> auto& { return c.phantom.spacing; });
    r.number("phantom.background", [](C& c) -> auto& { return c.phantom.background; });
    r.number("phantom.noise_sigma", [](C& c) -> auto& { return c.phantom.noise_sigma; });
    r.range("phantom.target_intensity", [](C& c) -> auto& { return c.phantom.target_intensity; });
    r.range("phantom.target_semi_axes", [](C& c) -> auto& { return c.phantom.target_semi_axes; });
    r.number("phantom.target_centre_jitter", [](C& c) -> auto& { return c.phantom.target_centre_jitter; });
    r.number("phantom.distractor_count", [](C& c) -> auto& { return c.phantom.distractor_count; });
    r.range("phantom.distractor_intensity", [](C& c) -> auto& { return c.phantom.distractor_intensity; });
    r.range("phantom.distractor_semi_axes", [](C& c) -> auto& { return c.phantom.distractor_semi_axes; });
    r.number("phantom.seed", [](C& c) -> auto& { return c.phantom.seed; });
    r.add("phantom.organ_label", {[](C& c, const std::string& v, const std::string&) { c.phantom.organ_label = trim(v); },
                                  [](const C& c) { return c.phantom.organ_label; }});

    r.number("train.cycles", [](C& c) -> auto& { return c.train.cycles; });
    r.number("train.step_cap", [](C& c) -> auto& { return c.train.step_cap; });
    r.number("train.epsilon_start", [](C& c) -> auto& { return c.train.epsilon.start; });
    r.number("train.epsilon_end", [](C& c) -> auto& { return c.train.epsilon.end; });
    r.number("train.epsilon_decay_cycles", [](C& c) -> auto& { return c.train.epsilon.decay_cycles; });
    r.number("train.iou_threshold", [](C& c) -> auto& { return c.train.iou_threshold; });
    r.number("train.policy_capacity", [](C& c) -> auto& { return c.train.policy_capacity; });
    r.number("train.bbox_capacity", [](C& c) -> auto& { return c.train.bbox_capacity; });
    r.number("train.batch_size", [](C& c) -> auto& { return c.train.batch_size; });
    r.number("train.epochs_per_cycle", [](C& c) -> auto& { return c.train.epochs_per_cycle; });
    r.number("train.learning_rate", [](C& c) -> auto& { return c.train.learning_rate; });
    r.number("train.bbox_learning_rate", [](C& c) -> auto& { return c.train.bbox_learning_rate; });
    r.number("train.momentum", [](C& c) -> auto& { return c.train.momentum; });
    r.add("train.start_points",
          {[](C& c, const std::string& v, const std::string& k) {
             std::vector<Vec3> points;
             for (const auto& p : split(v, '|')) {
               const auto xyz = split(p, ' ');
               std::vector<std::string> parts;
               for (const auto& s : xyz) {
                 if (!s.empty()) parts.push_back(s);
               }
               if (parts.size() != 3) throw Error("config key " + k + ": start points are 'x y z' triples separated by '|'");
               points.push_back({parse_number<double>(parts[0], k), parse_number<double>(parts[1], k),
                                 parse_number<double>(parts[2], k)});
             }
             c.train.start_points = std::move(points);
           },
           [](const C& c) {
             std::string out;
             for (std::size_t i = 0; i < c.train.start_points.size(); ++i) {
               const auto& p = c.train.start_points[i];
               out += (i ? " | " : "") + format_number(p[0]) + " " + format_number(p[1]) + " " + format_number(p[2]);
             }
             return out;
           }});
    r.add("train.box_size_policy",
          {[](C& c, const std::string& v, const std::string& k) {
             const auto t = trim(v);
             if (t == "mean-gt") {
               c.train.box_size_policy = BoxSizePolicy::MeanGroundTruth;
             } else if (t == "fixed") {
               c.train.box_size_policy = BoxSizePolicy::Fixed;
             } else {
               throw Error("config key " + k + ": expected mean-gt or fixed");
             }
           },
           [](const C& c) {
             return std::string(c.train.box_size_policy == BoxSizePolicy::Fixed ? "fixed" : "mean-gt");
           }});
    r.triple("train.fixed_box_size", [](C& c) -> auto& { return c.train.fixed_box_size; });
    r.triple("train.input_shape", [](C& c) -> auto& { return c.train.input_shape; });
    r.triple("train.channel_widths", [](C& c) -> auto& { return c.train.channel_widths; });
    r.number("train.oracle_coarse_threshold", [](C& c) -> auto& { return c.train.oracle.coarse_threshold; });
    r.number("train.oracle_fine_threshold", [](C& c) -> auto& { return c.train.oracle.fine_threshold; });
    r.number("train.window_low", [](C& c) -> auto& { return c.train.patch.window_low; });
    r.number("train.window_high", [](C& c) -> auto& { return c.train.patch.window_high; });
    r.number("train.seed", [](C& c) -> auto& { return c.train.seed; });

    r.number("inference.step_cap", [](C& c) -> auto& { return c.inference.step_cap; });
    r.number("inference.mean_window", [](C& c) -> auto& { return c.inference.mean_window; });

    r.number("fusion.offset_percent", [](C& c) -> auto& { return c.fusion.offset_percent; });
    r.number("fusion.include_threshold", [](C& c) -> auto& { return c.fusion.include_threshold; });

    r.number("ssl.pseudo_threshold", [](C& c) -> auto& { return c.ssl.pseudo_threshold; });
    r.number("ssl.max_rounds", [](C& c) -> auto& { return c.ssl.max_rounds; });
    r.number("ssl.patience", [](C& c) -> auto& { return c.ssl.patience; });
    r.number("ssl.min_improvement", [](C& c) -> auto& { return c.ssl.min_improvement; });
    r.number("ssl.validation_fraction", [](C& c) -> auto& { return c.ssl.validation_fraction; });
    r.number("ssl.labelled_ratio", [](C& c) -> auto& { return c.ssl.labelled_ratio; });
    r.flag("ssl.warm_start", [](C& c) -> auto& { return c.ssl.warm_start; });
    r.number("ssl.seed", [](C& c) -> auto& { return c.ssl.seed; });

    r.number("experiment.folds", [](C& c) -> auto& { return c.folds; });
    r.number("experiment.scan_count", [](C& c) -> auto& { return c.scan_count; });
    return r;
  }();
  return reg;
}

void set_field(ExperimentConfig& config, const std::string& key, const std::string& value) {
  const auto& reg = registry();
  const auto it = reg.fields.find(key);
  if (it == reg.fields.end()) throw Error("unknown config key: " + key);
  it->second.set(config, value, key);
}

}  // namespace

void ExperimentConfig::set_seed(std::uint64_t seed) {
  phantom.seed = seed;
  train.seed = seed;
  ssl.seed = seed;
}

void ExperimentConfig::validate() const {
  phantom.validate();
  train.validate();
  inference.validate();
  fusion.validate();
  ssl.validate(fusion.include_threshold);
  if (folds < 2) throw Error("fold count must be >= 2");
  if (scan_count < 1) throw Error("scan count must be >= 1");
}

ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(path.string(), tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error("cannot read config " + path.string() + ": " + e.message());
  }
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw Error("config key outside a section: " + section);
    for (const auto& [key, value] : body) set_field(base, section + "." + key, value.data());
  }
  return base;
}

void apply_override(ExperimentConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw Error("override must look like section.key=value: " + assignment);
  set_field(config, trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

std::string to_ini(const ExperimentConfig& config) {
  const auto& reg = registry();
  std::ostringstream os;
  std::string section;
  for (const auto& key : reg.order) {
    const auto dot = key.find('.');
    const std::string s = key.substr(0, dot);
    if (s != section) {
      if (!section.empty()) os << '\n';
      os << '[' << s << "]\n";
      section = s;
    }
    os << key.substr(dot + 1) << " = " << reg.fields.at(key).get(config) << '\n';
  }
  return os.str();
}

std::vector<std::string> config_keys() { return registry().order; }

}  // namespace roiloc
