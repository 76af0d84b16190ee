#include <catch2/catch_amalgamated.hpp>

#include "restocnet/config.hpp"
#include "restocnet/error.hpp"

using namespace restocnet;

TEST_CASE("config parses sections, comments, and whitespace", "[config]") {
  const Config c = Config::parse(
      "# top comment\n"
      "[experiment]\n"
      "name = demo   # trailing comment\n"
      "seed=7\n"
      "\n"
      "[stdp]\n"
      "  p_drop =  0.5 \n"
      "enabled = true\n");
  CHECK(c.get_string("experiment", "name") == "demo");
  CHECK(c.get_int("experiment", "seed") == 7);
  CHECK(c.get_double("stdp", "p_drop") == 0.5);
  CHECK(c.get_bool("stdp", "enabled", false));
  CHECK(c.has_section("stdp"));
  CHECK_FALSE(c.has_section("missing"));
  CHECK_FALSE(c.has("stdp", "missing"));
}

TEST_CASE("config round-trips through serialize", "[config]") {
  Config c;
  c.set("a", "x", "1");
  c.set("a", "y", "hello world");
  c.set("b", "z", "2.5");
  c.set("a", "x", "3");  // overwrite keeps position
  const Config back = Config::parse(c.serialize());
  CHECK(back == c);
  CHECK(back.get_string("a", "x") == "3");
  CHECK(back.sections()[0].name == "a");
  CHECK(back.sections()[0].entries[0].key == "x");
}

TEST_CASE("config rejects malformed input", "[config]") {
  CHECK_THROWS_AS(Config::parse("key = 1\n"), Error);          // no section
  CHECK_THROWS_AS(Config::parse("[a]\nnoequals\n"), Error);    // no '='
  CHECK_THROWS_AS(Config::parse("[a\nx = 1\n"), Error);        // bad header
  CHECK_THROWS_AS(Config::parse("[a]\n = 1\n"), Error);        // empty key
  const Config c = Config::parse("[a]\nx = abc\nb = maybe\n");
  CHECK_THROWS_AS(c.get_double("a", "x"), Error);
  CHECK_THROWS_AS(c.get_int("a", "x"), Error);
  CHECK_THROWS_AS(c.get_bool("a", "b", true), Error);
  CHECK_THROWS_AS(c.get_string("a", "missing"), Error);
  try {
    c.get_string("a", "missing");
  } catch (const Error& e) {
    CHECK(e.error_class() == ErrorClass::Config);
  }
}

TEST_CASE("fallback getters only apply when the key is absent", "[config]") {
  const Config c = Config::parse("[s]\nx = 4\n");
  CHECK(c.get_int("s", "x", 9) == 4);
  CHECK(c.get_int("s", "y", 9) == 9);
  CHECK(c.get_double("t", "x", 1.5) == 1.5);
  CHECK(c.get_string("s", "y", "d") == "d");
  CHECK(c.get_bool("s", "y", true));
}

TEST_CASE("split_list trims items and skips blanks", "[config]") {
  CHECK(split_list("a, b ,c") == std::vector<std::string>{"a", "b", "c"});
  CHECK(split_list("") == std::vector<std::string>{});
  CHECK(split_list(" , x , ") == std::vector<std::string>{"x"});
}
