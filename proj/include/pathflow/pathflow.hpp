#pragma once

#include "pathflow/aggregate.hpp"
#include "pathflow/dataio/image.hpp"
#include "pathflow/dataio/manifest.hpp"
#include "pathflow/dataio/patches.hpp"
#include "pathflow/dataio/synth.hpp"
#include "pathflow/dataio/tissue.hpp"
#include "pathflow/errors.hpp"
#include "pathflow/harness/config.hpp"
#include "pathflow/harness/dataset.hpp"
#include "pathflow/harness/evaluate.hpp"
#include "pathflow/harness/report.hpp"
#include "pathflow/harness/scoring.hpp"
#include "pathflow/harness/split.hpp"
#include "pathflow/harness/train.hpp"
#include "pathflow/heads.hpp"
#include "pathflow/metrics.hpp"
#include "pathflow/nn/gradcheck.hpp"
#include "pathflow/nn/layers.hpp"
#include "pathflow/nn/model_io.hpp"
#include "pathflow/nn/network.hpp"
#include "pathflow/nn/sgd.hpp"
#include "pathflow/rng.hpp"
#include "pathflow/tensor.hpp"
