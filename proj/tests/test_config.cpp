#include "breathms/config.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>

using namespace breathms;

namespace {

ErrorCode config_error(std::string_view text, std::optional<std::size_t>* line = nullptr) {
  try {
    parse_config(text).validate();
  } catch (const Error& e) {
    if (line) *line = e.line();
    return e.code();
  }
  FAIL("expected a config error");
  return ErrorCode::IoFailure;
}

}  // namespace

TEST_CASE("defaults are the documented protocol") {
  const RunConfig c;
  CHECK(!c.range.has_value());
  CHECK(c.acquisition == AcquisitionMode::MultipleAugmented);
  CHECK(c.scaler == ScalerKind::Robust);
  CHECK(c.pca_components == 20);
  CHECK(c.folds == 10);
  CHECK(c.filter.filtering);
  CHECK(c.experiment_ranges().size() == 4);
  c.validate();
}

TEST_CASE("key=value parsing with comments and blank lines") {
  const auto c = parse_config(
      "# protocol\n"
      "ranges = R2\n"
      "\n"
      "acquisition=single\n"
      "scaler=standard\n"
      "filtering=false\n"
      "pca_components=0\n"
      "knn.k=7\n"
      "svm.c=2.5\n"
      "seed=42\n");
  REQUIRE(c.range.has_value());
  CHECK(*c.range == RangeId::R2);
  CHECK(c.experiment_ranges() == std::vector<RangeId>{RangeId::R2});
  CHECK(c.acquisition == AcquisitionMode::SingleAveraged);
  CHECK(c.scaler == ScalerKind::Standard);
  CHECK(!c.filter.filtering);
  CHECK(c.pca_components == 0);
  CHECK(c.hp.knn_k == 7);
  CHECK(c.hp.svm_c == 2.5);
  CHECK(c.seed == 42u);
}

TEST_CASE("format_config round-trips every key") {
  RunConfig c;
  c.set("ranges", "R4");
  c.set("gb.shrinkage", "0.05");
  c.set("hp1", "0.0002");
  c.set("surf", "true");
  const auto text = format_config(c);
  const auto back = parse_config(text);
  CHECK(format_config(back) == text);
  CHECK(back.entries() == c.entries());
  CHECK(c.entries().size() == config_keys().size());
  for (const auto& key : config_keys()) CHECK(is_config_key(key));
  CHECK(!is_config_key("bogus"));
}

TEST_CASE("later values override earlier ones") {
  const auto base = parse_config("folds=5\n");
  const auto c = parse_config("folds=3\n", base);
  CHECK(c.folds == 3);
  RunConfig overridden = base;
  overridden.set("folds", "4");
  CHECK(overridden.folds == 4);
}

TEST_CASE("invalid configurations report InvalidConfig") {
  std::optional<std::size_t> line;
  CHECK(config_error("folds=10\nbogus=1\n", &line) == ErrorCode::InvalidConfig);
  CHECK(line == 2u);
  CHECK(config_error("folds\n") == ErrorCode::InvalidConfig);
  CHECK(config_error("folds=ten\n") == ErrorCode::InvalidConfig);
  CHECK(config_error("folds=1\n") == ErrorCode::InvalidConfig);
  CHECK(config_error("knn.k=0\n") == ErrorCode::InvalidConfig);
  CHECK(config_error("ranges=R7\n") == ErrorCode::InvalidConfig);
  CHECK(config_error("acquisition=double\n") == ErrorCode::InvalidConfig);
  CHECK(config_error("filtering=maybe\n") == ErrorCode::InvalidConfig);
  CHECK(config_error("sg.window=4\n") == ErrorCode::InvalidConfig);
  CHECK(config_error("tree.bins=1000\n") == ErrorCode::InvalidConfig);
  CHECK(config_error("seed=-3\n") == ErrorCode::InvalidConfig);
}

TEST_CASE("load_config reads a file") {
  const auto path = std::filesystem::temp_directory_path() / "breathms_config_test.txt";
  {
    std::ofstream out(path);
    out << "ranges=whole\npca_components=5\n";
  }
  const auto c = load_config(path);
  CHECK(!c.range.has_value());
  CHECK(c.pca_components == 5);
  CHECK_THROWS_AS(load_config(path.string() + ".missing"), Error);
}
