// Copyright 2026 The I2CR Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "i2cr/text.hpp"

#include <random>
#include <string>

#include "gtest/gtest.h"

namespace i2cr::text {
namespace {

TEST(Utf8Test, DecodesMultibyte) {
  auto cps = decode_utf8("a\xC3\xA9\xE2\x82\xAC\xF0\x9F\x98\x80");
  ASSERT_TRUE(cps.has_value());
  EXPECT_EQ(*cps, (std::u32string{U'a', U'é', U'€', U'\U0001F600'}));
  EXPECT_EQ(encode_utf8(*cps), "a\xC3\xA9\xE2\x82\xAC\xF0\x9F\x98\x80");
}

TEST(Utf8Test, RejectsMalformed) {
  EXPECT_FALSE(is_valid_utf8("\xC3"));          // truncated
  EXPECT_FALSE(is_valid_utf8("\xC0\xAF"));      // overlong
  EXPECT_FALSE(is_valid_utf8("\xED\xA0\x80"));  // surrogate
  EXPECT_FALSE(is_valid_utf8("\xFF"));
  EXPECT_TRUE(is_valid_utf8(""));
}

TEST(NormalizeTest, FoldsCaseAndCollapsesWhitespace) {
  EXPECT_EQ(encode_utf8(normalize("  Hello\t\tWORLD \n")), "hello world");
  EXPECT_EQ(encode_utf8(normalize("New-York, NY!")), "new-york, ny!");
  EXPECT_EQ(encode_utf8(normalize("\xC3\x89t\xC3\xA9")), "\xC3\x89t\xC3\xA9");
  EXPECT_TRUE(normalize(" \t ").empty());
}

TEST(Base64Test, KnownVectors) {
  EXPECT_EQ(base64_encode(""), "");
  EXPECT_EQ(base64_encode("f"), "Zg==");
  EXPECT_EQ(base64_encode("fo"), "Zm8=");
  EXPECT_EQ(base64_encode("foobar"), "Zm9vYmFy");
  EXPECT_FALSE(base64_decode("Zm9").has_value());
  EXPECT_FALSE(base64_decode("Zm9v!mFy").has_value());
  EXPECT_FALSE(base64_decode("Z===").has_value());
}

TEST(Base64Test, RoundTripsRandomBytes) {
  std::mt19937 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    std::string bytes(rng() % 64, '\0');
    for (auto& c : bytes) c = static_cast<char>(rng() & 0xFF);
    auto back = base64_decode(base64_encode(bytes));
    ASSERT_TRUE(back.has_value());
    EXPECT_EQ(*back, bytes);
  }
}

TEST(DigestTest, StableAndDistinct) {
  EXPECT_EQ(digest("abc"), digest("abc"));
  EXPECT_NE(digest("abc"), digest("abd"));
  EXPECT_EQ(digest("").size(), 16u);
}

}  // namespace
}  // namespace i2cr::text
