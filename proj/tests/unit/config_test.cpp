#include <doctest.h>

#include <sstream>

#include "streamrec/config.hpp"
#include "streamrec/error.hpp"

using streamrec::ConfigError;
using streamrec::KeyValueConfig;

TEST_CASE("key/value parsing with sections and comments") {
  std::istringstream in(
      "# top\n"
      "seed = 7\n"
      "\n"
      "[sampler]\n"
      "delta = 0.5   # trailing\n"
      "strategy=vrs\n"
      "[model]\n"
      "expert_widths = 32,16\n");
  const auto kv = KeyValueConfig::parse(in);
  CHECK(*kv.find("seed") == "7");
  CHECK(*kv.find("sampler.delta") == "0.5");
  CHECK(*kv.find("sampler.strategy") == "vrs");
  CHECK(*kv.find("model.expert_widths") == "32,16");
  CHECK(kv.find("delta") == nullptr);
  CHECK(kv.values().size() == 4);
}

TEST_CASE("later assignments override earlier ones") {
  std::istringstream in("a = 1\na = 2\n");
  auto kv = KeyValueConfig::parse(in);
  CHECK(*kv.find("a") == "2");
  kv.set_assignment("a=3");
  kv.set_assignment(" b.c = x y ");
  CHECK(*kv.find("a") == "3");
  CHECK(*kv.find("b.c") == "x y");
}

TEST_CASE("malformed config lines name the line") {
  std::istringstream bad("a = 1\nno equals sign\n");
  try {
    KeyValueConfig::parse(bad);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  std::istringstream open_section("[oops\n");
  CHECK_THROWS_AS(KeyValueConfig::parse(open_section), ConfigError);
  std::istringstream empty_key(" = 3\n");
  CHECK_THROWS_AS(KeyValueConfig::parse(empty_key), ConfigError);
  KeyValueConfig kv;
  CHECK_THROWS_AS(kv.set_assignment("novalue"), ConfigError);
  CHECK_THROWS_AS(KeyValueConfig::parse_file("/nonexistent/streamrec.cfg"), ConfigError);
}

TEST_CASE("write then parse reproduces the values") {
  KeyValueConfig kv;
  kv.set("seed", "3");
  kv.set("sampler.delta", "0.25");
  kv.set("sampler.strategy", "rr");
  kv.set("model.n_experts", "4");
  kv.set("dataset.delimiter", "::");
  std::stringstream ss;
  kv.write(ss);
  const auto back = KeyValueConfig::parse(ss);
  CHECK(back.values() == kv.values());
}
