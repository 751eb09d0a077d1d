#include "reid/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <variant>
#include <vector>

namespace reid {

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

using FieldPtr = std::variant<int RunConfig::*, double RunConfig::*, bool RunConfig::*,
                              std::string RunConfig::*, uint64_t RunConfig::*>;

struct Field {
  const char* section;
  const char* key;
  FieldPtr ptr;
};

const std::vector<Field>& fields() {
  static const std::vector<Field> f = {
      {"data", "root", &RunConfig::data_root},
      {"data", "image_height", &RunConfig::image_height},
      {"data", "image_width", &RunConfig::image_width},
      {"data", "augment_flip", &RunConfig::augment_flip},
      {"data", "norm_mean", &RunConfig::norm_mean},
      {"data", "norm_std", &RunConfig::norm_std},
      {"backbone", "preset", &RunConfig::backbone},
      {"backbone", "head_hidden", &RunConfig::head_hidden},
      {"optim", "lr", &RunConfig::lr},
      {"optim", "momentum", &RunConfig::momentum},
      {"optim", "epochs", &RunConfig::epochs},
      {"optim", "lr_decay_epoch", &RunConfig::lr_decay_epoch},
      {"optim", "lr_decay_factor", &RunConfig::lr_decay_factor},
      {"optim", "batch_size", &RunConfig::batch_size},
      {"optim", "positive_fraction", &RunConfig::positive_fraction},
      {"loss", "lambda1", &RunConfig::lambda1},
      {"loss", "lambda2", &RunConfig::lambda2},
      {"loss", "sa_alpha", &RunConfig::sa_alpha},
      {"attention", "mask_sharpness", &RunConfig::mask_sharpness},
      {"attention", "mask_threshold", &RunConfig::mask_threshold},
      {"attention", "trim_threshold", &RunConfig::trim_threshold},
      {"attention", "l_align", &RunConfig::l_align},
      {"ablation", "enable_ia", &RunConfig::enable_ia},
      {"ablation", "enable_sa", &RunConfig::enable_sa},
      {"eval", "mode", &RunConfig::eval_mode},
      {"eval", "max_rank", &RunConfig::max_rank},
      {"eval", "max_gallery", &RunConfig::max_gallery},
      {"synth", "identities", &RunConfig::synth_identities},
      {"synth", "images_per_identity", &RunConfig::synth_images_per_identity},
      {"synth", "cameras", &RunConfig::synth_cameras},
      {"run", "seed", &RunConfig::seed},
      {"run", "output_dir", &RunConfig::output_dir},
  };
  return f;
}

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

void set_field(RunConfig& cfg, const Field& f, const std::string& raw) {
  std::string v = trim(raw);
  auto fail = [&](const char* want) {
    throw ConfigError(std::string(f.section) + "." + f.key + ": cannot parse '" + v + "' as " +
                      want);
  };
  if (auto p = std::get_if<int RunConfig::*>(&f.ptr)) {
    int out{};
    auto r = std::from_chars(v.data(), v.data() + v.size(), out);
    if (r.ec != std::errc() || r.ptr != v.data() + v.size()) fail("int");
    cfg.**p = out;
  } else if (auto p = std::get_if<double RunConfig::*>(&f.ptr)) {
    char* end = nullptr;
    double out = std::strtod(v.c_str(), &end);
    if (v.empty() || end != v.c_str() + v.size()) fail("double");
    cfg.**p = out;
  } else if (auto p = std::get_if<bool RunConfig::*>(&f.ptr)) {
    if (v == "true" || v == "1")
      cfg.**p = true;
    else if (v == "false" || v == "0")
      cfg.**p = false;
    else
      fail("bool");
  } else if (auto p = std::get_if<uint64_t RunConfig::*>(&f.ptr)) {
    uint64_t out{};
    auto r = std::from_chars(v.data(), v.data() + v.size(), out);
    if (r.ec != std::errc() || r.ptr != v.data() + v.size()) fail("uint64");
    cfg.**p = out;
  } else {
    cfg.*std::get<std::string RunConfig::*>(f.ptr) = v;
  }
}

std::string get_field(const RunConfig& cfg, const Field& f) {
  if (auto p = std::get_if<int RunConfig::*>(&f.ptr)) return std::to_string(cfg.**p);
  if (auto p = std::get_if<double RunConfig::*>(&f.ptr)) return format_double(cfg.**p);
  if (auto p = std::get_if<bool RunConfig::*>(&f.ptr)) return cfg.**p ? "true" : "false";
  if (auto p = std::get_if<uint64_t RunConfig::*>(&f.ptr)) return std::to_string(cfg.**p);
  return cfg.*std::get<std::string RunConfig::*>(f.ptr);
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  std::istringstream is(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    std::string s = trim(line);
    if (s.empty() || s[0] == '#' || s[0] == ';') continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ConfigError("line " + std::to_string(lineno) + ": malformed section");
      section = trim(s.substr(1, s.size() - 2));
      continue;
    }
    size_t eq = s.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(s.substr(0, eq));
    std::string value = s.substr(eq + 1);
    bool found = false;
    for (const auto& f : fields()) {
      if (section == f.section && key == f.key) {
        set_field(cfg, f, value);
        found = true;
        break;
      }
    }
    if (!found)
      throw ConfigError("unknown config key '" + section + "." + key + "' (line " +
                        std::to_string(lineno) + ")");
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const RunConfig& cfg) {
  std::ostringstream os;
  std::string last_section;
  for (const auto& f : fields()) {
    if (f.section != last_section) {
      if (!last_section.empty()) os << "\n";
      os << "[" << f.section << "]\n";
      last_section = f.section;
    }
    os << f.key << " = " << get_field(cfg, f) << "\n";
  }
  return os.str();
}

void save_config(const RunConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write config file: " + path);
  out << serialize_config(cfg);
}

void apply_override(RunConfig& cfg, const std::string& assignment) {
  size_t eq = assignment.find('=');
  if (eq == std::string::npos)
    throw ConfigError("--set expects section.key=value, got '" + assignment + "'");
  std::string key = trim(assignment.substr(0, eq));
  std::string value = assignment.substr(eq + 1);
  size_t dot = key.find('.');
  if (dot == std::string::npos)
    throw ConfigError("--set expects section.key=value, got '" + assignment + "'");
  std::string section = key.substr(0, dot);
  std::string name = key.substr(dot + 1);
  for (const auto& f : fields()) {
    if (section == f.section && name == f.key) {
      set_field(cfg, f, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

uint64_t config_fingerprint(const RunConfig& cfg) {
  std::string text = serialize_config(cfg);
  uint64_t hash = 1469598103934665603ULL;
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 1099511628211ULL;
  }
  return hash;
}

RunConfig reference_synthetic_config() {
  RunConfig cfg;
  cfg.data_root = "data/synthetic";
  cfg.image_height = 64;
  cfg.image_width = 32;
  cfg.backbone = "tiny";
  cfg.head_hidden = 64;
  cfg.lr = 0.005;  // the paper's 0.03 presumes a pretrained stride-32 backbone
  cfg.epochs = 40;
  cfg.lr_decay_epoch = 30;
  cfg.batch_size = 16;
  cfg.synth_identities = 8;
  cfg.synth_images_per_identity = 6;
  cfg.seed = 42;
  cfg.output_dir = "runs/synthetic";
  return cfg;
}

void RunConfig::validate() const {
  if (image_height < 8 || image_width < 8) throw ConfigError("image size must be at least 8x8");
  if (norm_std <= 0) throw ConfigError("norm_std must be > 0");
  if (backbone != "tiny" && backbone != "small")
    throw ConfigError("backbone preset must be tiny or small");
  if (head_hidden < 1) throw ConfigError("head_hidden must be >= 1");
  if (lr <= 0) throw ConfigError("lr must be > 0");
  if (momentum < 0 || momentum >= 1) throw ConfigError("momentum must be in [0,1)");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (lr_decay_epoch < 1) throw ConfigError("lr_decay_epoch must be >= 1");
  if (lr_decay_factor <= 0 || lr_decay_factor > 1)
    throw ConfigError("lr_decay_factor must be in (0,1]");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (positive_fraction < 0 || positive_fraction > 1)
    throw ConfigError("positive_fraction must be in [0,1]");
  if (lambda1 < 0 || lambda2 < 0 || sa_alpha < 0)
    throw ConfigError("loss weights must be non-negative");
  if (mask_sharpness <= 0) throw ConfigError("mask_sharpness must be > 0");
  if (mask_threshold <= 0 || mask_threshold >= 1)
    throw ConfigError("mask_threshold must be in (0,1)");
  if (trim_threshold <= 0 || trim_threshold >= 1)
    throw ConfigError("trim_threshold must be in (0,1)");
  if (l_align < 0) throw ConfigError("l_align must be >= 0");
  if (eval_mode != "feature_only" && eval_mode != "fused")
    throw ConfigError("eval mode must be feature_only or fused");
  if (max_rank < 1) throw ConfigError("max_rank must be >= 1");
  if (max_gallery < 0) throw ConfigError("max_gallery must be >= 0");
  if (synth_identities < 2) throw ConfigError("synth identities must be >= 2");
  if (synth_images_per_identity < 3)
    throw ConfigError("synth images_per_identity must be >= 3");
  if (synth_cameras < 2) throw ConfigError("synth cameras must be >= 2");
}

}  // namespace reid
