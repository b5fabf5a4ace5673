//  Copyright 2026 The SGPT Authors. All Rights Reserved.
//
//  Licensed under the Apache License, Version 2.0 (the "License");
//  you may not use this file except in compliance with the License.
//  You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
//  Unless required by applicable law or agreed to in writing, software
//  distributed under the License is distributed on an "AS IS" BASIS,
//  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
//  See the License for the specific language governing permissions and
//  limitations under the License.

#pragma once

#include "sgpt/checkpoint.hpp"
#include "sgpt/common.hpp"
#include "sgpt/config.hpp"
#include "sgpt/corpus.hpp"
#include "sgpt/downstream.hpp"
#include "sgpt/encoder.hpp"
#include "sgpt/evalkit.hpp"
#include "sgpt/objectives.hpp"
#include "sgpt/optimizer.hpp"
#include "sgpt/pipeline.hpp"
#include "sgpt/pretrain.hpp"
#include "sgpt/semantic_graph.hpp"
#include "sgpt/similarity.hpp"
#include "sgpt/term_extraction.hpp"
