#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <regex>

namespace fs = std::filesystem;

// Learning and alignment code must not read ground-truth labels.
TEST_CASE("learning and alignment sources never touch ground truth") {
  const std::regex forbidden(R"(\btruth\b|\bextraneous\b|GroundTruth)");
  std::size_t scanned = 0;
  for (const std::string module : {"encoder", "tcc", "align", "bc"}) {
    const fs::path dir = fs::path(EIL_SOURCE_DIR) / "src" / module;
    REQUIRE(fs::is_directory(dir));
    for (const auto& e : fs::directory_iterator(dir)) {
      std::ifstream in(e.path());
      std::string line;
      int n = 0;
      while (std::getline(in, line)) {
        ++n;
        INFO(e.path().string() << ":" << n << ": " << line);
        CHECK_FALSE(std::regex_search(line, forbidden));
      }
      ++scanned;
    }
  }
  CHECK(scanned >= 4);
}
