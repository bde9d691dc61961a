#include "cascadet/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace cascadet {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& text) {
  T value{};
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || text.empty()) throw std::invalid_argument("cannot parse '" + text + "' as a number");
  return value;
}

bool parse_bool(const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw std::invalid_argument("expected true or false, got '" + text + "'");
}

std::vector<int> parse_int_list(const std::string& text) {
  if (text.size() < 2 || text.front() != '[' || text.back() != ']') {
    throw std::invalid_argument("expected a list like [0,1], got '" + text + "'");
  }
  std::vector<int> out;
  const std::string body = trim(text.substr(1, text.size() - 2));
  if (body.empty()) return out;
  std::stringstream ss(body);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<int>(trim(item)));
  return out;
}

template <typename T>
std::string number(T v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string list(const std::vector<int>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s + "]";
}

struct Field {
  std::string key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

// Builds a field bound to a member reachable through `access`.
template <typename T, typename Access>
Field field(std::string key, Access access) {
  Field f;
  f.key = std::move(key);
  f.set = [access](RunConfig& c, const std::string& v) {
    T& dst = access(c);
    if constexpr (std::is_same_v<T, bool>) {
      dst = parse_bool(v);
    } else if constexpr (std::is_same_v<T, std::string>) {
      dst = v;
    } else if constexpr (std::is_same_v<T, std::vector<int>>) {
      dst = parse_int_list(v);
    } else {
      dst = parse_number<T>(v);
    }
  };
  f.get = [access](const RunConfig& c) {
    const T& src = access(const_cast<RunConfig&>(c));
    if constexpr (std::is_same_v<T, bool>) {
      return std::string(src ? "true" : "false");
    } else if constexpr (std::is_same_v<T, std::string>) {
      return src;
    } else if constexpr (std::is_same_v<T, std::vector<int>>) {
      return list(src);
    } else {
      return number(src);
    }
  };
  return f;
}

#define CASCADET_FIELD(T, key, expr) field<T>(key, [](RunConfig& c) -> T& { return expr; })

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      CASCADET_FIELD(std::uint64_t, "seed", c.seed),
      CASCADET_FIELD(std::string, "out_dir", c.out_dir),
      CASCADET_FIELD(int, "threads", c.threads),
      // data
      CASCADET_FIELD(std::uint64_t, "train_seed", c.data.train_seed),
      CASCADET_FIELD(int, "train_scenes", c.data.train_scenes),
      CASCADET_FIELD(std::uint64_t, "eval_seed", c.data.eval_seed),
      CASCADET_FIELD(int, "eval_scenes", c.data.eval_scenes),
      CASCADET_FIELD(double, "scale_mix", c.data.scale_mix),
      // model
      CASCADET_FIELD(int, "image_size", c.model.image_size),
      CASCADET_FIELD(std::vector<int>, "strides", c.model.strides),
      CASCADET_FIELD(int, "stem_channels", c.model.stem_channels),
      CASCADET_FIELD(int, "channels", c.model.channels),
      CASCADET_FIELD(int, "head_depth", c.model.head_depth),
      CASCADET_FIELD(bool, "rfe", c.model.rfe_enabled),
      CASCADET_FIELD(bool, "fsm", c.model.fsm_enabled),
      CASCADET_FIELD(int, "fsm_channels", c.model.fsm_channels),
      CASCADET_FIELD(int, "fsm_bins", c.model.fsm_bins),
      // train
      CASCADET_FIELD(double, "lr_start", c.train.lr_start),
      CASCADET_FIELD(double, "lr_peak", c.train.lr_peak),
      CASCADET_FIELD(int, "warmup_epochs", c.train.warmup_epochs),
      CASCADET_FIELD(std::vector<int>, "milestones", c.train.milestones),
      CASCADET_FIELD(int, "epochs", c.train.epochs),
      CASCADET_FIELD(double, "momentum", c.train.momentum),
      CASCADET_FIELD(double, "weight_decay", c.train.weight_decay),
      CASCADET_FIELD(int, "batch_size", c.train.batch_size),
      CASCADET_FIELD(bool, "augment", c.train.augment),
      // cascade
      CASCADET_FIELD(std::vector<int>, "str_levels", c.cascade.str_levels),
      CASCADET_FIELD(std::vector<int>, "stc_levels", c.cascade.stc_levels),
      CASCADET_FIELD(double, "stc_threshold", c.cascade.stc_threshold),
      CASCADET_FIELD(double, "step1_neg_iou", c.cascade.step1.neg),
      CASCADET_FIELD(double, "step1_pos_iou", c.cascade.step1.pos),
      CASCADET_FIELD(double, "step2_neg_iou", c.cascade.step2.neg),
      CASCADET_FIELD(double, "step2_pos_iou", c.cascade.step2.pos),
      CASCADET_FIELD(bool, "sml", c.cascade.sml_enabled),
      CASCADET_FIELD(double, "sml_alpha", c.cascade.sml_alpha),
      CASCADET_FIELD(double, "focal_gamma", c.cascade.focal_gamma),
      CASCADET_FIELD(double, "focal_balance", c.cascade.focal_balance),
      CASCADET_FIELD(double, "fsm_nms_overlap", c.cascade.fsm.nms_overlap),
      CASCADET_FIELD(int, "fsm_max_proposals", c.cascade.fsm.max_proposals),
      CASCADET_FIELD(double, "fsm_neg_iou", c.cascade.fsm.neg_iou),
      CASCADET_FIELD(double, "fsm_pos_iou", c.cascade.fsm.pos_iou),
      CASCADET_FIELD(double, "score_threshold", c.cascade.score_threshold),
      CASCADET_FIELD(int, "pre_nms_top", c.cascade.pre_nms_top),
      CASCADET_FIELD(double, "nms_overlap", c.cascade.nms_overlap),
      CASCADET_FIELD(int, "max_detections", c.cascade.max_detections),
  };
  return table;
}

#undef CASCADET_FIELD

}  // namespace

void RunConfig::validate() const {
  if (threads < 1) throw std::invalid_argument("threads must be at least 1");
  if (data.train_scenes < 0 || data.eval_scenes < 0) throw std::invalid_argument("scene counts must be non-negative");
  if (data.scale_mix < 0 || data.scale_mix > 1) throw std::invalid_argument("scale_mix must lie in [0,1]");
  model.validate();
  train.validate();
  cascade.validate(model.num_levels());
}

void apply_setting(RunConfig& config, const std::string& assignment, const std::string& where) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError(where + ": expected key=value, got '" + assignment + "'");
  const std::string key = trim(assignment.substr(0, eq));
  const std::string value = trim(assignment.substr(eq + 1));
  const auto& table = fields();
  const auto it = std::find_if(table.begin(), table.end(), [&](const Field& f) { return f.key == key; });
  if (it == table.end()) throw ConfigError(where + ": unknown key '" + key + "'");
  try {
    it->set(config, value);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(where + ": " + key + ": " + e.what());
  }
}

RunConfig parse_config(std::istream& in, const std::string& source) {
  RunConfig config;
  std::string line;
  int number_of_line = 0;
  while (std::getline(in, line)) {
    ++number_of_line;
    const auto hash = line.find('#');
    const std::string body = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (body.empty()) continue;
    apply_setting(config, body, source + ":" + std::to_string(number_of_line));
  }
  try {
    config.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(source + ": " + e.what());
  }
  return config;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  return parse_config(in, path.string());
}

void write_config(std::ostream& out, const RunConfig& config) {
  for (const Field& f : fields()) out << f.key << " = " << f.get(config) << "\n";
}

std::string serialize_config(const RunConfig& config) {
  std::ostringstream os;
  write_config(os, config);
  return os.str();
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const Field& f : fields()) keys.push_back(f.key);
  return keys;
}

}  // namespace cascadet
