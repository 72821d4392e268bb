#pragma once

// Declarative configuration: `key = value` lines, `#` comments, `[section]`
// headers. Parsing is strict — unknown keys and malformed values are fatal,
// naming the key and line. Every field has a default, listed in the README.

#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>

#include "pressim/core.hpp"
#include "pressim/dataset.hpp"
#include "pressim/motion.hpp"
#include "pressim/nn_train.hpp"
#include "pressim/sim.hpp"

namespace pressim {

struct Config {
  // [subject]
  std::string subject_id = "s1";
  double subject_mass_kg = 74.3;
  double subject_height_cm = 178.0;
  std::string subject_gender = "unspecified";

  // [plane]
  double plane_k = 1.0e3;
  double plane_d_max_mm = 10.0;
  double plane_gravity = 9.81;

  // [motion]
  std::string motion_template = "stand_sway";
  double motion_duration_s = 10.0;
  double motion_fps = 10.0;
  double motion_noise_m = 0.01;

  // [data]
  double align_tolerance_s = kAlignToleranceDefault;
  int window_width = kWindowWidth;
  double split_train = 0.8;
  double split_val = 0.1;
  double split_test = 0.1;
  std::uint64_t split_seed = 0;
  bool guard_gap = true;

  // [train]
  double lr = 1e-4;
  int batch_size = 128;
  int epochs_tpn = 10;
  int epochs_tdn = 10;
  int epochs_psn = 10;
  int epochs_baseline = 30;
  std::string loss_mode = "mse";  // mse | eq4_literal
  std::uint64_t train_seed = 0;
  double early_stop_mse = 0.0;
  int finetune_epochs = 0;
  double fusion_alpha = 1.0;
  double fusion_beta = 1.0;

  // [synth]
  double zero_floor_mmhg = 0.0;

  SubjectProfile subject() const {
    return SubjectProfile(subject_id, subject_mass_kg, subject_height_cm,
                          subject_gender);
  }
  PlaneModel plane() const {
    PlaneModel p;
    p.stiffness_k = plane_k;
    p.d_max_mm = plane_d_max_mm;
    p.gravity = plane_gravity;
    p.validate();
    return p;
  }
  MotionSpec motion(std::uint64_t seed) const {
    MotionSpec m;
    m.tmpl = motion_template_from_string(motion_template);
    m.duration_s = motion_duration_s;
    m.fps = motion_fps;
    m.noise_amplitude_m = motion_noise_m;
    m.seed = seed;
    return m;
  }
  nn::Hyperparams hyperparams() const {
    nn::Hyperparams hp;
    hp.learning_rate = lr;
    hp.batch_size = batch_size;
    hp.seed = train_seed;
    hp.early_stop_mse = early_stop_mse;
    hp.fusion_alpha = fusion_alpha;
    hp.fusion_beta = fusion_beta;
    if (loss_mode == "mse")
      hp.loss_mode = nn::LossMode::Mse;
    else if (loss_mode == "eq4_literal")
      hp.loss_mode = nn::LossMode::Eq4Literal;
    else
      throw ConfigTypeError("train.loss_mode must be 'mse' or 'eq4_literal'");
    return hp;
  }
};

namespace config_detail {

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

struct Field {
  std::function<void(Config&, const std::string&, const std::string&, int)> set;
};

inline double parse_double(const std::string& key, const std::string& value,
                           int line) {
  try {
    std::size_t used = 0;
    double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (...) {
    throw ConfigTypeError("'" + key + "' expects a number, got '" + value +
                          "' (line " + std::to_string(line) + ")");
  }
}

inline int parse_int(const std::string& key, const std::string& value,
                     int line) {
  try {
    std::size_t used = 0;
    int v = std::stoi(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (...) {
    throw ConfigTypeError("'" + key + "' expects an integer, got '" + value +
                          "' (line " + std::to_string(line) + ")");
  }
}

inline std::uint64_t parse_u64(const std::string& key,
                               const std::string& value, int line) {
  try {
    std::size_t used = 0;
    unsigned long long v = std::stoull(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing");
    return static_cast<std::uint64_t>(v);
  } catch (...) {
    throw ConfigTypeError("'" + key + "' expects an unsigned integer, got '" +
                          value + "' (line " + std::to_string(line) + ")");
  }
}

inline bool parse_bool(const std::string& key, const std::string& value,
                       int line) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigTypeError("'" + key + "' expects true/false, got '" + value +
                        "' (line " + std::to_string(line) + ")");
}

inline void require_positive(const std::string& key, double v, int line) {
  if (!(v > 0.0))
    throw ConfigTypeError("'" + key + "' must be positive (line " +
                          std::to_string(line) + ")");
}

inline const std::map<std::string, Field>& field_table() {
  using F = Field;
  static const std::map<std::string, Field> table = {
      {"subject.id", F{[](Config& c, const std::string&, const std::string& v,
                          int) { c.subject_id = v; }}},
      {"subject.mass_kg", F{[](Config& c, const std::string& k,
                               const std::string& v, int l) {
         c.subject_mass_kg = parse_double(k, v, l);
       }}},
      {"subject.height_cm", F{[](Config& c, const std::string& k,
                                 const std::string& v, int l) {
         c.subject_height_cm = parse_double(k, v, l);
       }}},
      {"subject.gender", F{[](Config& c, const std::string&,
                              const std::string& v, int) {
         c.subject_gender = v;
       }}},
      {"plane.k", F{[](Config& c, const std::string& k, const std::string& v,
                       int l) {
         c.plane_k = parse_double(k, v, l);
         require_positive(k, c.plane_k, l);
       }}},
      {"plane.d_max_mm", F{[](Config& c, const std::string& k,
                              const std::string& v, int l) {
         c.plane_d_max_mm = parse_double(k, v, l);
         require_positive(k, c.plane_d_max_mm, l);
       }}},
      {"plane.gravity", F{[](Config& c, const std::string& k,
                             const std::string& v, int l) {
         c.plane_gravity = parse_double(k, v, l);
         require_positive(k, c.plane_gravity, l);
       }}},
      {"motion.template", F{[](Config& c, const std::string&,
                               const std::string& v, int) {
         motion_template_from_string(v);  // validates
         c.motion_template = v;
       }}},
      {"motion.duration_s", F{[](Config& c, const std::string& k,
                                 const std::string& v, int l) {
         c.motion_duration_s = parse_double(k, v, l);
         require_positive(k, c.motion_duration_s, l);
       }}},
      {"motion.fps", F{[](Config& c, const std::string& k,
                          const std::string& v, int l) {
         c.motion_fps = parse_double(k, v, l);
         require_positive(k, c.motion_fps, l);
       }}},
      {"motion.noise_amplitude_m", F{[](Config& c, const std::string& k,
                                        const std::string& v, int l) {
         c.motion_noise_m = parse_double(k, v, l);
         if (c.motion_noise_m < 0.0)
           throw ConfigTypeError("'" + k + "' must be >= 0 (line " +
                                 std::to_string(l) + ")");
       }}},
      {"data.align_tolerance_s", F{[](Config& c, const std::string& k,
                                      const std::string& v, int l) {
         c.align_tolerance_s = parse_double(k, v, l);
         require_positive(k, c.align_tolerance_s, l);
       }}},
      {"data.window", F{[](Config& c, const std::string& k,
                           const std::string& v, int l) {
         c.window_width = parse_int(k, v, l);
         if (c.window_width < 1)
           throw ConfigTypeError("'" + k + "' must be >= 1 (line " +
                                 std::to_string(l) + ")");
       }}},
      {"data.split_train", F{[](Config& c, const std::string& k,
                                const std::string& v, int l) {
         c.split_train = parse_double(k, v, l);
       }}},
      {"data.split_val", F{[](Config& c, const std::string& k,
                              const std::string& v, int l) {
         c.split_val = parse_double(k, v, l);
       }}},
      {"data.split_test", F{[](Config& c, const std::string& k,
                               const std::string& v, int l) {
         c.split_test = parse_double(k, v, l);
       }}},
      {"data.split_seed", F{[](Config& c, const std::string& k,
                               const std::string& v, int l) {
         c.split_seed = parse_u64(k, v, l);
       }}},
      {"data.guard_gap", F{[](Config& c, const std::string& k,
                              const std::string& v, int l) {
         c.guard_gap = parse_bool(k, v, l);
       }}},
      {"train.lr", F{[](Config& c, const std::string& k, const std::string& v,
                        int l) {
         c.lr = parse_double(k, v, l);
         require_positive(k, c.lr, l);
       }}},
      {"train.batch_size", F{[](Config& c, const std::string& k,
                                const std::string& v, int l) {
         c.batch_size = parse_int(k, v, l);
         if (c.batch_size < 1)
           throw ConfigTypeError("'" + k + "' must be >= 1 (line " +
                                 std::to_string(l) + ")");
       }}},
      {"train.epochs_tpn", F{[](Config& c, const std::string& k,
                                const std::string& v, int l) {
         c.epochs_tpn = parse_int(k, v, l);
       }}},
      {"train.epochs_tdn", F{[](Config& c, const std::string& k,
                                const std::string& v, int l) {
         c.epochs_tdn = parse_int(k, v, l);
       }}},
      {"train.epochs_psn", F{[](Config& c, const std::string& k,
                                const std::string& v, int l) {
         c.epochs_psn = parse_int(k, v, l);
       }}},
      {"train.epochs_baseline", F{[](Config& c, const std::string& k,
                                     const std::string& v, int l) {
         c.epochs_baseline = parse_int(k, v, l);
       }}},
      {"train.loss_mode", F{[](Config& c, const std::string& k,
                               const std::string& v, int l) {
         if (v != "mse" && v != "eq4_literal")
           throw ConfigTypeError("'" + k + "' must be mse or eq4_literal "
                                 "(line " + std::to_string(l) + ")");
         c.loss_mode = v;
       }}},
      {"train.seed", F{[](Config& c, const std::string& k,
                          const std::string& v, int l) {
         c.train_seed = parse_u64(k, v, l);
       }}},
      {"train.early_stop_mse", F{[](Config& c, const std::string& k,
                                    const std::string& v, int l) {
         c.early_stop_mse = parse_double(k, v, l);
       }}},
      {"train.finetune_epochs", F{[](Config& c, const std::string& k,
                                     const std::string& v, int l) {
         c.finetune_epochs = parse_int(k, v, l);
       }}},
      {"train.fusion_alpha", F{[](Config& c, const std::string& k,
                                  const std::string& v, int l) {
         c.fusion_alpha = parse_double(k, v, l);
       }}},
      {"train.fusion_beta", F{[](Config& c, const std::string& k,
                                 const std::string& v, int l) {
         c.fusion_beta = parse_double(k, v, l);
       }}},
      {"synth.zero_floor_mmhg", F{[](Config& c, const std::string& k,
                                     const std::string& v, int l) {
         c.zero_floor_mmhg = parse_double(k, v, l);
         if (c.zero_floor_mmhg < 0.0)
           throw ConfigTypeError("'" + k + "' must be >= 0 (line " +
                                 std::to_string(l) + ")");
       }}},
  };
  return table;
}

}  // namespace config_detail

inline Config parse_config_text(const std::string& text) {
  using namespace config_detail;
  Config config;
  std::istringstream in(text);
  std::string line, section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigTypeError("malformed section header at line " +
                              std::to_string(line_no));
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigTypeError("expected 'key = value' at line " +
                            std::to_string(line_no));
    std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!section.empty()) key = section + "." + key;
    const auto& table = field_table();
    auto it = table.find(key);
    if (it == table.end())
      throw UnknownKey("'" + key + "' at line " + std::to_string(line_no));
    it->second.set(config, key, value, line_no);
  }
  return config;
}

inline Config load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoFailure("cannot open config: " + path);
  std::string text((std::istreambuf_iterator<char>(f)),
                   std::istreambuf_iterator<char>());
  return parse_config_text(text);
}

}  // namespace pressim
