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

// Writes the synthetic steering corpus and a recorded mock transcript.

#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "i2cr/synthetic.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generate the synthetic steering fixture"};
  std::string out = "fixture";
  std::size_t n = 200;
  app.add_option("--out", out, "output directory");
  app.add_option("--samples", n, "number of samples")->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);

  const auto fixture = i2cr::synthetic::make_steering_fixture(n);
  const auto configs = i2cr::synthetic::steering_configs(i2cr::PipelineConfig{});
  const auto transcript = i2cr::synthetic::record_transcript(fixture, configs);
  i2cr::synthetic::write_fixture(fixture, *transcript, out);
  std::cout << "wrote " << fixture.dataset.size() << " samples, "
            << fixture.kg.size() << " entities, " << transcript->size()
            << " transcript entries to " << out << "\n";
  return 0;
}
