#include "breathms/config.hpp"
#include "breathms/text_io.hpp"

#include <algorithm>
#include <climits>
#include <functional>
#include <map>

namespace breathms {

namespace {

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw Error(ErrorCode::InvalidConfig, std::string(key) + " expects a boolean, got '" + std::string(v) + "'");
}

int parse_int_value(std::string_view key, std::string_view v) {
  const auto parsed = text::parse_int(v);
  if (!parsed || *parsed < INT_MIN || *parsed > INT_MAX)
    throw Error(ErrorCode::InvalidConfig, std::string(key) + " expects an integer, got '" + std::string(v) + "'");
  return static_cast<int>(*parsed);
}

double parse_double_value(std::string_view key, std::string_view v) {
  const auto parsed = text::parse_double(v);
  if (!parsed) throw Error(ErrorCode::InvalidConfig, std::string(key) + " expects a number, got '" + std::string(v) + "'");
  return *parsed;
}

std::string bool_text(bool b) { return b ? "true" : "false"; }

struct Field {
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define BREATHMS_INT_FIELD(name, member)                                                       \
  {name,                                                                                       \
   {[](RunConfig& c, std::string_view v) { c.member = parse_int_value(name, v); },            \
    [](const RunConfig& c) { return std::to_string(c.member); }}}
#define BREATHMS_DOUBLE_FIELD(name, member)                                                    \
  {name,                                                                                       \
   {[](RunConfig& c, std::string_view v) { c.member = parse_double_value(name, v); },         \
    [](const RunConfig& c) { return text::format_double(c.member); }}}

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      {"ranges",
       {[](RunConfig& c, std::string_view v) {
          if (v == "whole") {
            c.range.reset();
          } else {
            const auto range = parse_range(v);
            if (!range) throw Error(ErrorCode::InvalidConfig, "ranges must be whole or R1..R4, got '" + std::string(v) + "'");
            c.range = *range;
          }
        },
        [](const RunConfig& c) { return c.range ? std::string(mass_range(*c.range).name()) : std::string("whole"); }}},
      {"filtering",
       {[](RunConfig& c, std::string_view v) { c.filter.filtering = parse_bool("filtering", v); },
        [](const RunConfig& c) { return bool_text(c.filter.filtering); }}},
      BREATHMS_INT_FIELD("sg.window", filter.sg_window),
      BREATHMS_INT_FIELD("sg.polyorder", filter.sg_polyorder),
      BREATHMS_INT_FIELD("sg.deriv", filter.sg_deriv),
      BREATHMS_INT_FIELD("baseline.window", filter.baseline_window),
      BREATHMS_INT_FIELD("baseline.polyorder", filter.baseline_polyorder),
      BREATHMS_DOUBLE_FIELD("hp1", filter.hp1),
      BREATHMS_DOUBLE_FIELD("hp2", filter.hp2),
      BREATHMS_DOUBLE_FIELD("plateau.q", filter.plateau_q),
      BREATHMS_DOUBLE_FIELD("outlier.z", filter.z_thresh),
      BREATHMS_DOUBLE_FIELD("peak.floor", filter.peak_floor),
      {"acquisition",
       {[](RunConfig& c, std::string_view v) {
          try {
            c.acquisition = parse_acquisition_mode(v);
          } catch (const Error& e) {
            throw Error(ErrorCode::InvalidConfig, e.what());
          }
        },
        [](const RunConfig& c) { return std::string(to_string(c.acquisition)); }}},
      {"augment.cap",
       {[](RunConfig& c, std::string_view v) {
          const int cap = parse_int_value("augment.cap", v);
          if (cap < 1) throw Error(ErrorCode::InvalidConfig, "augment.cap must be positive");
          c.augment_cap = static_cast<std::size_t>(cap);
        },
        [](const RunConfig& c) { return std::to_string(c.augment_cap); }}},
      {"scaler",
       {[](RunConfig& c, std::string_view v) { c.scaler = parse_scaler_kind(v); },
        [](const RunConfig& c) { return std::string(to_string(c.scaler)); }}},
      {"surf",
       {[](RunConfig& c, std::string_view v) { c.surf = parse_bool("surf", v); },
        [](const RunConfig& c) { return bool_text(c.surf); }}},
      BREATHMS_INT_FIELD("surf.k", surf_options.top_k),
      BREATHMS_INT_FIELD("surf.max_rows", surf_options.max_rows),
      BREATHMS_INT_FIELD("pca_components", pca_components),
      BREATHMS_INT_FIELD("folds", folds),
      {"seed",
       {[](RunConfig& c, std::string_view v) {
          const int s = parse_int_value("seed", v);
          if (s < 0) throw Error(ErrorCode::InvalidConfig, "seed must be non-negative");
          c.seed = static_cast<std::uint64_t>(s);
        },
        [](const RunConfig& c) { return std::to_string(c.seed); }}},
      BREATHMS_INT_FIELD("knn.k", hp.knn_k),
      BREATHMS_INT_FIELD("rf.trees", hp.rf_trees),
      BREATHMS_INT_FIELD("rf.max_depth", hp.rf_max_depth),
      BREATHMS_INT_FIELD("rf.min_leaf", hp.rf_min_leaf),
      BREATHMS_INT_FIELD("gb.rounds", hp.gb_rounds),
      BREATHMS_INT_FIELD("gb.depth", hp.gb_depth),
      BREATHMS_DOUBLE_FIELD("gb.shrinkage", hp.gb_shrinkage),
      BREATHMS_DOUBLE_FIELD("svm.c", hp.svm_c),
      BREATHMS_DOUBLE_FIELD("svm.gamma", hp.svm_gamma),
      BREATHMS_DOUBLE_FIELD("svm.tol", hp.svm_tol),
      BREATHMS_DOUBLE_FIELD("lr.l2", hp.lr_l2),
      BREATHMS_INT_FIELD("tree.bins", hp.max_bins),
  };
  return table;
}

#undef BREATHMS_INT_FIELD
#undef BREATHMS_DOUBLE_FIELD

const Field* find_field(std::string_view key) {
  for (const auto& [name, field] : fields())
    if (name == key) return &field;
  return nullptr;
}

}  // namespace

void RunConfig::set(std::string_view key, std::string_view value) {
  const Field* field = find_field(key);
  if (!field) throw Error(ErrorCode::InvalidConfig, "unknown config key '" + std::string(key) + "'");
  field->set(*this, text::trim(value));
}

std::vector<std::pair<std::string, std::string>> RunConfig::entries() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& [name, field] : fields()) out.emplace_back(name, field.get(*this));
  return out;
}

std::vector<RangeId> RunConfig::experiment_ranges() const {
  if (range) return {*range};
  return {RangeId::R1, RangeId::R2, RangeId::R3, RangeId::R4};
}

void RunConfig::validate() const {
  try {
    filter.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::InvalidConfig, e.what());
  }
  if (folds < 2) throw Error(ErrorCode::InvalidConfig, "folds must be at least 2");
  if (pca_components < 0) throw Error(ErrorCode::InvalidConfig, "pca_components must be >= 0");
  if (surf_options.top_k < 1) throw Error(ErrorCode::InvalidConfig, "surf.k must be >= 1");
  if (surf_options.max_rows < 4) throw Error(ErrorCode::InvalidConfig, "surf.max_rows must be >= 4");
  if (hp.knn_k < 1) throw Error(ErrorCode::InvalidConfig, "knn.k must be >= 1");
  if (hp.rf_trees < 1 || hp.rf_max_depth < 0 || hp.rf_min_leaf < 1)
    throw Error(ErrorCode::InvalidConfig, "rf.trees >= 1, rf.max_depth >= 0, rf.min_leaf >= 1 required");
  if (hp.gb_rounds < 1 || hp.gb_depth < 1 || !(hp.gb_shrinkage > 0.0))
    throw Error(ErrorCode::InvalidConfig, "gb.rounds >= 1, gb.depth >= 1, gb.shrinkage > 0 required");
  if (!(hp.svm_c > 0.0) || hp.svm_gamma < 0.0 || !(hp.svm_tol > 0.0))
    throw Error(ErrorCode::InvalidConfig, "svm.c > 0, svm.gamma >= 0, svm.tol > 0 required");
  if (!(hp.lr_l2 > 0.0)) throw Error(ErrorCode::InvalidConfig, "lr.l2 must be positive");
  if (hp.max_bins < 2 || hp.max_bins > 256) throw Error(ErrorCode::InvalidConfig, "tree.bins must be in [2, 256]");
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [name, field] : fields()) keys.push_back(name);
  return keys;
}

bool is_config_key(std::string_view key) { return find_field(key) != nullptr; }

RunConfig parse_config(std::string_view content, RunConfig base) {
  std::size_t line_no = 0;
  for (const auto& raw : text::split(content, '\n')) {
    ++line_no;
    const auto line = text::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw Error(ErrorCode::InvalidConfig, "expected key=value", line_no);
    try {
      base.set(text::trim(line.substr(0, eq)), text::trim(line.substr(eq + 1)));
    } catch (const Error& e) {
      throw Error(ErrorCode::InvalidConfig, e.what(), line_no);
    }
  }
  return base;
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
  return parse_config(text::read_file(path), std::move(base));
}

std::string format_config(const RunConfig& config) {
  std::string out;
  for (const auto& [key, value] : config.entries()) out += key + "=" + value + "\n";
  return out;
}

}  // namespace breathms
