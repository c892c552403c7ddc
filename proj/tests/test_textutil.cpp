#include <doctest.h>

#include <string>
#include <vector>

#include "planexec/textutil.hpp"

using namespace planexec::text;

TEST_SUITE_BEGIN("textutil");

TEST_CASE("collapse_ws squeezes runs and trims") {
  CHECK(collapse_ws("  a   b\t\nc  ") == "a b c");
  CHECK(collapse_ws("") == "");
  CHECK(collapse_ws("   \n ") == "");
  CHECK(collapse_ws("plain") == "plain");
}

TEST_CASE("to_lower touches ASCII only") {
  CHECK(to_lower("MiXeD Case 42!") == "mixed case 42!");
}

TEST_CASE("ifind matches case-insensitively") {
  CHECK(ifind("The Answer Is here", "the answer is") == 0);
  CHECK(ifind("nothing", "absent") == std::string::npos);
  CHECK(ifind("xxABCxx", "abc") == 2);
  CHECK(ifind("abcabc", "abc", 1) == 3);
}

TEST_CASE("tokenize yields lowercased alphanumeric runs") {
  auto t = tokenize("Three  red apples, 42 of them!");
  std::vector<std::string> want{"three", "red", "apples", "42", "of", "them"};
  CHECK(t == want);
  CHECK(tokenize("").empty());
  CHECK(tokenize("...---...").empty());
}

TEST_CASE("content_words drops stop words and non-alphabetic tokens") {
  auto c = content_words("The answer is 42.");
  std::vector<std::string> want{"answer"};
  CHECK(c == want);
  auto scene = content_words("three red apples on a plate");
  std::vector<std::string> want2{"three", "red", "apples", "plate"};
  CHECK(scene == want2);
}

TEST_CASE("jaccard on content-word sets") {
  auto a = content_words("three red apples on a plate");
  auto b = content_words("a blue car at night");
  CHECK(jaccard(a, b) == 0.0);
  CHECK(jaccard(a, a) == 1.0);
  CHECK(jaccard({}, {}) == 1.0);
  // overlap {red}: union {three, red, apples, plate, car} -> 1/5
  auto c = content_words("a red car");
  CHECK(jaccard(a, c) == doctest::Approx(1.0 / 5.0));
  // duplicates collapse: set semantics, not bags
  CHECK(jaccard({"red", "red", "car"}, {"red", "car"}) == 1.0);
}

TEST_CASE("starts_with / ends_with") {
  CHECK(starts_with("#PARTIAL line", "#"));
  CHECK_FALSE(starts_with("", "#"));
  CHECK(ends_with("file.jsonl", ".jsonl"));
  CHECK_FALSE(ends_with("file.json", ".jsonl"));
}

TEST_SUITE_END();
