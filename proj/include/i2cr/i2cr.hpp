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

#pragma once

#include "i2cr/backends.hpp"
#include "i2cr/config.hpp"
#include "i2cr/dataset.hpp"
#include "i2cr/errors.hpp"
#include "i2cr/evaluation.hpp"
#include "i2cr/fuzzy.hpp"
#include "i2cr/http_backends.hpp"
#include "i2cr/instruction_data.hpp"
#include "i2cr/kg_store.hpp"
#include "i2cr/mock_backends.hpp"
#include "i2cr/pipeline.hpp"
#include "i2cr/pipeline_config.hpp"
#include "i2cr/retrieval.hpp"
#include "i2cr/service.hpp"
#include "i2cr/trace.hpp"
