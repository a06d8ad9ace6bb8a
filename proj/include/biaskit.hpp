#pragma once

#include "biaskit/core.hpp"
#include "biaskit/fetch.hpp"
#include "biaskit/ingest.hpp"
#include "biaskit/io.hpp"
#include "biaskit/labeling.hpp"
#include "biaskit/metrics.hpp"
#include "biaskit/random.hpp"
#include "biaskit/report.hpp"
#include "biaskit/sampler.hpp"
#include "biaskit/sizing.hpp"
#include "biaskit/synth.hpp"
#include "biaskit/workflow.hpp"
