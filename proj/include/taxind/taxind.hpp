// Umbrella header.
#pragma once

#include "taxind/arborescence.hpp"
#include "taxind/calibration.hpp"
#include "taxind/candidates.hpp"
#include "taxind/config.hpp"
#include "taxind/core.hpp"
#include "taxind/dataset.hpp"
#include "taxind/definitions.hpp"
#include "taxind/evaluation.hpp"
#include "taxind/llm/gateway.hpp"
#include "taxind/llm/hashing_embedder.hpp"
#include "taxind/llm/http_backend.hpp"
#include "taxind/llm/oracle.hpp"
#include "taxind/pipeline.hpp"
#include "taxind/ranking.hpp"
#include "taxind/wikipedia.hpp"
